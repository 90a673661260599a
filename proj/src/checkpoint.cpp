#include "dtrack/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dtrack/error.hpp"

namespace dtrack {

namespace {

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

class LeReader {
 public:
  explicit LeReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint64_t get(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (n > data_.size() - pos_) throw Error(ErrorCode::Format, "checkpoint truncated");
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ParameterSet& tensors) {
  std::vector<std::uint8_t> out = {'D', 'T', 'C', 'K'};
  put_le(out, kCheckpointVersion, 4);
  put_le(out, tensors.size(), 4);
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const std::string& name = tensors.name(i);
    const Tensor& t = tensors.value(i);
    put_le(out, name.size(), 4);
    out.insert(out.end(), name.begin(), name.end());
    put_le(out, t.rank(), 4);
    for (std::size_t d : t.shape()) put_le(out, d, 8);
    for (double v : t.data()) put_le(out, std::bit_cast<std::uint64_t>(v), 8);
  }
  return out;
}

ParameterSet decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "DTCK", 4) != 0) {
    throw Error(ErrorCode::Format, "missing DTCK magic");
  }
  LeReader in(bytes.subspan(4));
  const auto version = in.get(4);
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::Format, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = in.get(4);
  ParameterSet tensors;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = in.get(4);
    auto name_bytes = in.take(name_len);
    std::string name(name_bytes.begin(), name_bytes.end());
    const auto rank = in.get(4);
    if (rank > 8) throw Error(ErrorCode::Format, "implausible rank for " + name);
    Shape shape;
    std::size_t numel = 1;
    for (std::uint64_t r = 0; r < rank; ++r) {
      shape.push_back(in.get(8));
      if (shape.back() != 0 && numel > (std::size_t{1} << 40) / shape.back()) {
        throw Error(ErrorCode::Format, "implausible size for " + name);
      }
      numel *= shape.back();
    }
    std::vector<double> data(numel);
    for (double& v : data) v = std::bit_cast<double>(in.get(8));
    tensors.add(name, Tensor(std::move(shape), std::move(data)));
  }
  if (!in.done()) throw Error(ErrorCode::Format, "trailing bytes after checkpoint");
  return tensors;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& tensors) {
  const auto bytes = encode_checkpoint(tensors);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

ParameterSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace dtrack
