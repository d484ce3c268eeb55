#include "fusenet/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "byte_io.hpp"

namespace fusenet {

namespace detail {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path);
}

}  // namespace detail

template <typename T>
Checkpoint<T> Checkpoint<T>::capture(const ParameterStore<T>& params, std::uint64_t config_hash,
                                     std::uint32_t epoch) {
  Checkpoint ckpt;
  ckpt.config_hash = config_hash;
  ckpt.epoch = epoch;
  for (const auto& p : params) ckpt.tensors.emplace_back(p.name, p.value);
  return ckpt;
}

template <typename T>
void Checkpoint<T>::restore(ParameterStore<T>& params) const {
  for (const auto& [name, tensor] : tensors) {
    if (!params.contains(name)) throw ConfigError("checkpoint parameter not in network: " + name);
    auto& p = params.get(name);
    if (p.value.shape() != tensor.shape()) {
      throw DimensionError("checkpoint shape " + shape_string(tensor.shape()) + " differs from " +
                           shape_string(p.value.shape()) + " for " + name);
    }
    p.value = tensor;
  }
}

template <typename T>
std::vector<std::pair<std::string, std::uint64_t>> Checkpoint<T>::hashes() const {
  std::vector<std::pair<std::string, std::uint64_t>> out;
  for (const auto& [name, tensor] : tensors) out.emplace_back(name, content_hash(tensor));
  return out;
}

template <typename T>
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint<T>& ckpt) {
  detail::ByteWriter w;
  for (char c : std::string_view("FZNT")) w.put(static_cast<std::uint8_t>(c));
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint8_t>(sizeof(T)));
  w.put(ckpt.config_hash);
  w.put(ckpt.epoch);
  for (const auto& [name, tensor] : ckpt.tensors) {
    w.put_string(name);
    w.put(static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) w.put(static_cast<std::uint32_t>(d));
    for (T v : tensor.data()) w.put_float(v);
  }
  return std::move(w.bytes());
}

template <typename T>
Checkpoint<T> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  const auto magic = r.get_bytes(4);
  if (std::string_view(reinterpret_cast<const char*>(magic.data()), 4) != "FZNT") {
    throw FormatError("not a checkpoint: bad magic");
  }
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw UnsupportedFormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto dtype = r.get<std::uint8_t>();
  if (dtype != 4 && dtype != 8) throw FormatError("checkpoint dtype must be 4 or 8");
  Checkpoint<T> ckpt;
  ckpt.config_hash = r.get<std::uint64_t>();
  ckpt.epoch = r.get<std::uint32_t>();
  while (!r.done()) {
    std::string name = r.get_string();
    const auto rank = r.get<std::uint32_t>();
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint32_t>();
    const std::size_t count = shape_size(shape);
    if (count * dtype > r.remaining()) throw FormatError("checkpoint payload truncated for " + name);
    AlignedVector<T> data(count);
    for (auto& v : data) v = dtype == 4 ? static_cast<T>(r.get_f32()) : static_cast<T>(r.get_f64());
    ckpt.tensors.emplace_back(std::move(name), Tensor<T>(std::move(shape), std::move(data)));
  }
  return ckpt;
}

template <typename T>
void save_checkpoint(const Checkpoint<T>& ckpt, const std::string& path) {
  detail::write_file(path, encode_checkpoint(ckpt));
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  return decode_checkpoint<T>(detail::read_file(path));
}

Precision checkpoint_precision(const std::string& path) {
  const auto bytes = detail::read_file(path);
  if (bytes.size() < 7) throw FormatError("checkpoint too short");
  return bytes[6] == 8 ? Precision::F64 : Precision::F32;
}

template struct Checkpoint<float>;
template struct Checkpoint<double>;
template std::vector<std::uint8_t> encode_checkpoint(const Checkpoint<float>&);
template std::vector<std::uint8_t> encode_checkpoint(const Checkpoint<double>&);
template Checkpoint<float> decode_checkpoint(std::span<const std::uint8_t>);
template Checkpoint<double> decode_checkpoint(std::span<const std::uint8_t>);
template void save_checkpoint(const Checkpoint<float>&, const std::string&);
template void save_checkpoint(const Checkpoint<double>&, const std::string&);
template Checkpoint<float> load_checkpoint(const std::string&);
template Checkpoint<double> load_checkpoint(const std::string&);

}  // namespace fusenet
