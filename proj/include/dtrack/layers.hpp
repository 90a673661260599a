#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dtrack/ops.hpp"
#include "dtrack/rng.hpp"
#include "dtrack/tensor.hpp"

namespace dtrack {

// Named parameter tensors in insertion order.
class ParameterSet {
 public:
  // Adds a tensor; throws InvalidConfig on a duplicate name.
  std::size_t add(const std::string& name, Tensor value);

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& value(std::size_t i) { return values_[i]; }
  const Tensor& value(std::size_t i) const { return values_[i]; }
  Tensor& operator[](const std::string& name) { return values_[index_of(name)]; }
  const Tensor& operator[](const std::string& name) const { return values_[index_of(name)]; }

  std::size_t scalar_count() const;
  // FNV-1a over names, shapes and raw value bits.
  std::uint64_t checksum() const;

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    return a.names_ == b.names_ && a.values_ == b.values_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::map<std::string, std::size_t> index_;
};

// Gradients aligned index-for-index with a ParameterSet.
using Gradients = std::vector<Tensor>;

Gradients zero_gradients(const ParameterSet& params);

// Parameters registered as gradient-requiring leaves on one tape.
class BoundParameters {
 public:
  // requires_grad = false records the parameters as constants (inference).
  BoundParameters(ad::Tape& tape, const ParameterSet& params, bool requires_grad = true);
  // Uses existing vars (one per parameter, same order).
  BoundParameters(const ParameterSet& params, std::vector<ad::Var> vars);

  ad::Var operator[](const std::string& name) const;
  ad::Var at(std::size_t i) const { return vars_[i]; }
  std::size_t size() const { return vars_.size(); }

  // Adds the tape gradients (after backward) into grads.
  void accumulate_into(Gradients& grads) const;

 private:
  const ParameterSet* params_;
  std::vector<ad::Var> vars_;
};

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng);

// Adds W_{i,f,g,o} [H, D+H] and b_{i,f,g,o} [H] under prefix; forget bias 1.
void add_lstm_parameters(ParameterSet& params, const std::string& prefix, std::size_t input_size,
                         std::size_t hidden_size, Rng& rng);
ad::LstmParams bind_lstm(const BoundParameters& bound, const std::string& prefix);
std::size_t lstm_parameter_count(std::size_t input_size, std::size_t hidden_size);

// Adds W [out, in] and b [out] under prefix.
void add_linear_parameters(ParameterSet& params, const std::string& prefix, std::size_t in_size,
                           std::size_t out_size, Rng& rng);

}  // namespace dtrack
