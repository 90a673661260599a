#include "dtrack/layers.hpp"

#include <bit>
#include <cmath>

#include "dtrack/error.hpp"

namespace dtrack {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_mix(std::uint64_t& h, std::uint64_t word) {
  for (int i = 0; i < 8; ++i) {
    h ^= (word >> (8 * i)) & 0xFF;
    h *= kFnvPrime;
  }
}

const char* const kGates[] = {"input", "forget", "cell", "output"};

}  // namespace

std::size_t ParameterSet::add(const std::string& name, Tensor value) {
  if (index_.count(name)) throw Error(ErrorCode::InvalidConfig, "duplicate parameter " + name);
  index_[name] = values_.size();
  names_.push_back(name);
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorCode::InvalidConfig, "no parameter named " + name);
  return it->second;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const Tensor& t : values_) n += t.numel();
  return n;
}

std::uint64_t ParameterSet::checksum() const {
  std::uint64_t h = kFnvOffset;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    for (char ch : names_[i]) fnv_mix(h, static_cast<unsigned char>(ch));
    for (std::size_t d : values_[i].shape()) fnv_mix(h, d);
    for (double v : values_[i].data()) fnv_mix(h, std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

Gradients zero_gradients(const ParameterSet& params) {
  Gradients g;
  g.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) g.emplace_back(params.value(i).shape(), 0.0);
  return g;
}

BoundParameters::BoundParameters(ad::Tape& tape, const ParameterSet& params, bool requires_grad)
    : params_(&params) {
  vars_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    vars_.push_back(tape.leaf(params.value(i), requires_grad));
  }
}

BoundParameters::BoundParameters(const ParameterSet& params, std::vector<ad::Var> vars)
    : params_(&params), vars_(std::move(vars)) {
  if (vars_.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "bound vars do not match the parameter count");
  }
}

ad::Var BoundParameters::operator[](const std::string& name) const {
  return vars_[params_->index_of(name)];
}

void BoundParameters::accumulate_into(Gradients& grads) const {
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    const Tensor g = vars_[i].tape->grad(vars_[i]);
    auto dst = grads[i].data();
    auto src = g.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
}

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

void add_lstm_parameters(ParameterSet& params, const std::string& prefix, std::size_t input_size,
                         std::size_t hidden_size, Rng& rng) {
  const std::size_t fan_in = input_size + hidden_size;
  for (const char* gate : kGates) {
    params.add(prefix + ".W_" + gate, uniform_init({hidden_size, fan_in}, fan_in, rng));
  }
  for (const char* gate : kGates) {
    Tensor bias = uniform_init({hidden_size}, fan_in, rng);
    if (std::string(gate) == "forget") bias.fill(1.0);
    params.add(prefix + ".b_" + gate, std::move(bias));
  }
}

ad::LstmParams bind_lstm(const BoundParameters& bound, const std::string& prefix) {
  return {bound[prefix + ".W_input"], bound[prefix + ".W_forget"],
          bound[prefix + ".W_cell"],  bound[prefix + ".W_output"],
          bound[prefix + ".b_input"], bound[prefix + ".b_forget"],
          bound[prefix + ".b_cell"],  bound[prefix + ".b_output"]};
}

std::size_t lstm_parameter_count(std::size_t input_size, std::size_t hidden_size) {
  return 4 * (hidden_size * (input_size + hidden_size) + hidden_size);
}

void add_linear_parameters(ParameterSet& params, const std::string& prefix, std::size_t in_size,
                           std::size_t out_size, Rng& rng) {
  params.add(prefix + ".W", uniform_init({out_size, in_size}, in_size, rng));
  params.add(prefix + ".b", uniform_init({out_size}, in_size, rng));
}

}  // namespace dtrack
