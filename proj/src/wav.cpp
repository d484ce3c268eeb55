#include <algorithm>
#include <cmath>
#include <string_view>

#include "byte_io.hpp"
#include "fusenet/audio.hpp"
#include "fusenet/errors.hpp"

namespace fusenet::audio {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::string_view tag(std::span<const std::uint8_t> b) {
  return {reinterpret_cast<const char*>(b.data()), b.size()};
}

}  // namespace

Waveform decode_wav(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  try {
    if (tag(r.get_bytes(4)) != "RIFF") throw FormatError("wav: missing RIFF tag");
    r.get<std::uint32_t>();
    if (tag(r.get_bytes(4)) != "WAVE") throw FormatError("wav: missing WAVE tag");
  } catch (const FormatError& e) {
    throw FormatError(std::string("wav: malformed header: ") + e.what());
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::span<const std::uint8_t> data;
  bool have_data = false;
  while (r.remaining() >= 8 && !have_data) {
    const auto id = tag(r.get_bytes(4));
    const auto size = r.get<std::uint32_t>();
    if (size > r.remaining()) throw FormatError("wav: chunk '" + std::string(id) + "' runs past end of file");
    auto body = r.get_bytes(size);
    if (size % 2 == 1 && r.remaining() > 0) r.get<std::uint8_t>();
    if (id == "fmt ") {
      if (size < 16) throw FormatError("wav: fmt chunk too short");
      detail::ByteReader f(body);
      format = f.get<std::uint16_t>();
      channels = f.get<std::uint16_t>();
      rate = f.get<std::uint32_t>();
      f.get<std::uint32_t>();
      f.get<std::uint16_t>();
      bits = f.get<std::uint16_t>();
      if (format == kFormatExtensible) {
        if (size < 40) throw FormatError("wav: extensible fmt chunk too short");
        f.get<std::uint16_t>();
        f.get<std::uint16_t>();
        f.get<std::uint32_t>();
        format = f.get<std::uint16_t>();
      }
      have_fmt = true;
    } else if (id == "data") {
      data = body;
      have_data = true;
    }
  }
  if (!have_fmt) throw FormatError("wav: missing fmt chunk");
  if (!have_data) throw FormatError("wav: missing data chunk");
  if (channels == 0 || rate == 0) throw FormatError("wav: zero channels or sample rate");

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    throw UnsupportedFormatError("wav: unsupported codec (format " + std::to_string(format) + ", " +
                                 std::to_string(bits) + " bits)");
  }
  const std::size_t width = bits / 8;
  const std::size_t frame_bytes = width * channels;
  const std::size_t frames = data.size() / frame_bytes;
  if (frames == 0) throw FormatError("wav: no samples");

  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(frames);
  detail::ByteReader d(data);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c) {
      acc += pcm16 ? static_cast<double>(d.get<std::int16_t>()) / 32768.0 : static_cast<double>(d.get_f32());
    }
    w.samples[i] = std::clamp(acc / channels, -1.0, 1.0);
  }
  return w;
}

Waveform read_wav(const std::string& path) { return decode_wav(detail::read_file(path)); }

std::vector<std::uint8_t> encode_wav(const Waveform& w, WavEncoding encoding) {
  const bool pcm = encoding == WavEncoding::Pcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * bits / 8);
  detail::ByteWriter out;
  auto put_tag = [&](std::string_view t) {
    for (char c : t) out.put(static_cast<std::uint8_t>(c));
  };
  put_tag("RIFF");
  out.put(static_cast<std::uint32_t>(36 + data_bytes));
  put_tag("WAVE");
  put_tag("fmt ");
  out.put(std::uint32_t{16});
  out.put(pcm ? kFormatPcm : kFormatFloat);
  out.put(std::uint16_t{1});
  out.put(w.sample_rate);
  out.put(static_cast<std::uint32_t>(w.sample_rate * bits / 8));
  out.put(static_cast<std::uint16_t>(bits / 8));
  out.put(bits);
  put_tag("data");
  out.put(data_bytes);
  for (double s : w.samples) {
    const double v = std::clamp(s, -1.0, 1.0);
    if (pcm) {
      out.put(static_cast<std::int16_t>(std::clamp(std::lround(v * 32768.0), -32768L, 32767L)));
    } else {
      out.put_float(static_cast<float>(v));
    }
  }
  return std::move(out.bytes());
}

void write_wav(const std::string& path, const Waveform& w, WavEncoding encoding) {
  detail::write_file(path, encode_wav(w, encoding));
}

}  // namespace fusenet::audio
