#include <zlib.h>

#include "byte_io.hpp"
#include "fusenet/dataset.hpp"

namespace fusenet {

namespace {

constexpr char kMagic[4] = {'F', 'Z', 'D', 'S'};

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

void put_shape(detail::ByteWriter& w, const Shape& s) {
  for (std::size_t i = 0; i < 3; ++i) w.put(static_cast<std::uint32_t>(s.empty() ? 0 : s[i]));
}

Shape get_shape(detail::ByteReader& r) {
  Shape s(3);
  for (auto& d : s) d = r.get<std::uint32_t>();
  return s;
}

template <typename T>
void put_payload(detail::ByteWriter& w, const Tensor<T>& t) {
  for (T v : t.data()) w.put_float(v);
}

template <typename T>
Tensor<T> get_payload(detail::ByteReader& r, const Shape& shape, std::uint8_t dtype) {
  Tensor<T> t(shape);
  for (auto& v : t.data()) v = dtype == 8 ? static_cast<T>(r.get_f64()) : static_cast<T>(r.get_f32());
  return t;
}

}  // namespace

template <typename T>
std::vector<std::uint8_t> encode_container(const PairedDataset<T>& data) {
  data.validate();
  detail::ByteWriter w;
  w.put_bytes({reinterpret_cast<const std::uint8_t*>(kMagic), 4});
  w.put(kContainerVersion);
  w.put(static_cast<std::uint8_t>(sizeof(T)));
  w.put(static_cast<std::uint32_t>(data.classes.size()));
  for (const auto& name : data.classes) w.put_string(name);
  w.put(static_cast<std::uint64_t>(data.samples.size()));
  put_shape(w, data.empty() ? Shape{} : data.samples[0].image.shape());
  put_shape(w, data.empty() ? Shape{} : data.samples[0].spectrogram.shape());
  w.put(crc_of(w.bytes()));

  for (const auto& s : data.samples) {
    const std::size_t start = w.size();
    w.put(static_cast<std::uint32_t>(s.label));
    w.put(static_cast<std::uint8_t>(s.split));
    w.put_string(s.image_id);
    w.put_string(s.audio_id);
    put_payload(w, s.image);
    put_payload(w, s.spectrogram);
    w.put(crc_of(std::span<const std::uint8_t>(w.bytes()).subspan(start)));
  }
  return std::move(w.bytes());
}

template <typename T>
PairedDataset<T> decode_container(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  const auto magic = r.get_bytes(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic)) throw FormatError("not an FZDS container (bad magic)");
  const auto version = r.get<std::uint16_t>();
  if (version != kContainerVersion)
    throw UnsupportedFormatError("FZDS version " + std::to_string(version) + " is not supported");
  const auto dtype = r.get<std::uint8_t>();
  if (dtype != 4 && dtype != 8) throw FormatError("FZDS dtype must be 4 or 8, got " + std::to_string(dtype));

  PairedDataset<T> out;
  const auto class_count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < class_count; ++i) out.classes.push_back(r.get_string());
  const auto count = r.get<std::uint64_t>();
  const Shape image_shape = get_shape(r);
  const Shape spec_shape = get_shape(r);
  const std::uint32_t header_crc = crc_of(bytes.first(r.position()));
  if (r.get<std::uint32_t>() != header_crc) throw FormatError("FZDS header checksum mismatch");

  const std::size_t image_bytes = shape_size(image_shape) * dtype;
  const std::size_t spec_bytes = shape_size(spec_shape) * dtype;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t start = r.position();
    try {
      const auto label = r.get<std::uint32_t>();
      const auto split = r.get<std::uint8_t>();
      auto image_id = r.get_string();
      auto audio_id = r.get_string();
      // Size-check both payloads before the checksum so truncation reports as such.
      const std::size_t payload_at = r.position();
      r.get_bytes(image_bytes + spec_bytes);
      const std::uint32_t actual = crc_of(bytes.subspan(start, r.position() - start));
      if (r.get<std::uint32_t>() != actual)
        throw ChecksumError("FZDS record " + std::to_string(i) + " failed its CRC-32 check", i);
      if (split > 1) throw FormatError("FZDS record " + std::to_string(i) + " has split tag " + std::to_string(split));

      detail::ByteReader payload(bytes.subspan(payload_at, image_bytes + spec_bytes));
      PairedSample<T> s;
      s.label = label;
      s.split = static_cast<Split>(split);
      s.image_id = std::move(image_id);
      s.audio_id = std::move(audio_id);
      s.image = get_payload<T>(payload, image_shape, dtype);
      s.spectrogram = get_payload<T>(payload, spec_shape, dtype);
      out.samples.push_back(std::move(s));
    } catch (const ChecksumError&) {
      throw;
    } catch (const FormatError& e) {
      // A damaged length field looks like truncation; the checksum may still be able to tell.
      throw ChecksumError("FZDS record " + std::to_string(i) + " is damaged or truncated: " + e.what(),
                          static_cast<std::size_t>(i));
    }
  }
  if (!r.done()) throw FormatError("FZDS has " + std::to_string(r.remaining()) + " trailing bytes");
  out.validate();
  return out;
}

template <typename T>
void save_container(const PairedDataset<T>& data, const std::string& path) {
  detail::write_file(path, encode_container(data));
}

template <typename T>
PairedDataset<T> load_container(const std::string& path) {
  return decode_container<T>(detail::read_file(path));
}

Precision container_precision(const std::string& path) {
  const auto bytes = detail::read_file(path);
  if (bytes.size() < 7) throw FormatError("container too short");
  return bytes[6] == 8 ? Precision::F64 : Precision::F32;
}

template std::vector<std::uint8_t> encode_container(const PairedDataset<float>&);
template std::vector<std::uint8_t> encode_container(const PairedDataset<double>&);
template PairedDataset<float> decode_container(std::span<const std::uint8_t>);
template PairedDataset<double> decode_container(std::span<const std::uint8_t>);
template void save_container(const PairedDataset<float>&, const std::string&);
template void save_container(const PairedDataset<double>&, const std::string&);
template PairedDataset<float> load_container(const std::string&);
template PairedDataset<double> load_container(const std::string&);

}  // namespace fusenet
