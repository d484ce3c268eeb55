#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fusenet/colormap.hpp"

namespace fusenet::audio {

/// Mono audio in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  std::uint32_t sample_rate = 0;

  double duration_seconds() const {
    return sample_rate == 0 ? 0.0 : static_cast<double>(samples.size()) / sample_rate;
  }
  friend bool operator==(const Waveform&, const Waveform&) = default;
};

struct StftConfig {
  std::size_t window_size = 512;
  double overlap = 0.5;
  double segment_seconds = 10.0;
  double band_low_hz = 0.0;
  double band_high_hz = 10000.0;

  /// Samples between consecutive frames: window_size * (1 - overlap).
  std::size_t hop() const;
  void validate() const;
};

/// Magnitudes laid out [freq_bins x time_frames], row-major.
struct SpectrogramMatrix {
  std::size_t freq_bins = 0;
  std::size_t frames = 0;
  std::vector<double> magnitudes;
  double bin_hz = 0.0;
  std::size_t hop = 0;

  double at(std::size_t bin, std::size_t frame) const { return magnitudes[bin * frames + frame]; }
  friend bool operator==(const SpectrogramMatrix&, const SpectrogramMatrix&) = default;
};

inline constexpr std::size_t kRenderSize = 227;

/// 227 x 227 RGB bytes, row-major, row 0 = highest frequency.
struct RenderedSpectrogram {
  std::vector<std::uint8_t> pixels;
  std::size_t width = kRenderSize;
  std::size_t height = kRenderSize;

  friend bool operator==(const RenderedSpectrogram&, const RenderedSpectrogram&) = default;
};

enum class WavEncoding { Pcm16, Float32 };

/// RIFF/WAVE decoder for PCM 16-bit and IEEE float 32-bit, any channel count (averaged to
/// mono). Throws FormatError for malformed headers and UnsupportedFormatError for other codecs.
Waveform decode_wav(std::span<const std::uint8_t> bytes);
Waveform read_wav(const std::string& path);

std::vector<std::uint8_t> encode_wav(const Waveform& w, WavEncoding encoding = WavEncoding::Pcm16);
void write_wav(const std::string& path, const Waveform& w, WavEncoding encoding = WavEncoding::Pcm16);

/// Linear-interpolation resampling.
Waveform resample(const Waveform& w, std::uint32_t target_hz);

/// Drops hop-sized frames whose peak |sample| is strictly below a quarter of the global peak.
/// Throws EmptyResultError when nothing survives (including all-zero input).
Waveform trim_silence(const Waveform& w, const StftConfig& cfg);

/// Non-overlapping segments of cfg.segment_seconds. A trailing remainder at least half a
/// segment long is zero-padded; a shorter one is dropped.
std::vector<Waveform> segment(const Waveform& w, const StftConfig& cfg);

/// Periodic Hann window, w[i] = 0.5 * (1 - cos(2 pi i / n)).
std::vector<double> hann_window(std::size_t n);

/// Magnitude STFT keeping bins 0..window_size/2. Throws if the signal is shorter than one window.
SpectrogramMatrix stft(const Waveform& w, const StftConfig& cfg);

/// Keeps bins k with k * bin_hz <= band_high_hz.
SpectrogramMatrix crop_band(const SpectrogramMatrix& s, const StftConfig& cfg, std::uint32_t sample_rate);

/// log10(1 + mag), min-max normalized, bilinearly resized to 227 x 227 and colored through
/// spectrogram_colormap(). A constant matrix maps to entry 0 when it is all zero and to the
/// middle entry otherwise.
RenderedSpectrogram render(const SpectrogramMatrix& s);

/// decode -> resample -> trim -> segment -> stft -> crop -> render for one recording.
/// Throws EmptyResultError when trimming or segmentation leaves nothing.
std::vector<RenderedSpectrogram> spectrogram_pipeline(const Waveform& w, std::uint32_t sample_rate,
                                                      const StftConfig& cfg);

}  // namespace fusenet::audio
