#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "fusenet/audio.hpp"
#include "fusenet/errors.hpp"

namespace fusenet::audio {

std::size_t StftConfig::hop() const {
  return static_cast<std::size_t>(std::lround(static_cast<double>(window_size) * (1.0 - overlap)));
}

void StftConfig::validate() const {
  if (window_size < 2 || (window_size & (window_size - 1)) != 0) {
    throw ConfigError("window size must be a power of two >= 2");
  }
  if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("overlap must lie in [0, 1)");
  if (hop() == 0) throw ConfigError("overlap leaves a zero hop");
  if (!(segment_seconds > 0.0)) throw ConfigError("segment length must be positive");
  if (!(band_low_hz >= 0.0 && band_high_hz >= band_low_hz)) throw ConfigError("band must satisfy 0 <= low <= high");
}

Waveform resample(const Waveform& w, std::uint32_t target_hz) {
  if (target_hz == 0) throw ConfigError("resample target must be >= 1 Hz");
  if (w.sample_rate == 0) throw ConfigError("waveform has no sample rate");
  if (target_hz == w.sample_rate || w.samples.empty()) {
    Waveform out = w;
    out.sample_rate = target_hz;
    return out;
  }
  const double ratio = static_cast<double>(w.sample_rate) / target_hz;
  const auto count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(w.samples.size()) / ratio)));
  Waveform out;
  out.sample_rate = target_hz;
  out.samples.resize(count);
  const std::size_t last = w.samples.size() - 1;
  for (std::size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) * ratio;
    const auto j = static_cast<std::size_t>(t);
    if (j >= last) {
      out.samples[i] = w.samples[last];
    } else {
      const double frac = t - static_cast<double>(j);
      out.samples[i] = w.samples[j] + frac * (w.samples[j + 1] - w.samples[j]);
    }
  }
  return out;
}

Waveform trim_silence(const Waveform& w, const StftConfig& cfg) {
  cfg.validate();
  if (w.samples.empty()) throw EmptyResultError("empty after trim: no samples");
  double peak = 0.0;
  for (double s : w.samples) peak = std::max(peak, std::abs(s));
  if (peak == 0.0) throw EmptyResultError("empty after trim: signal is silent");
  const double threshold = peak / 4.0;
  const std::size_t hop = cfg.hop();
  Waveform out;
  out.sample_rate = w.sample_rate;
  for (std::size_t begin = 0; begin < w.samples.size(); begin += hop) {
    const std::size_t end = std::min(w.samples.size(), begin + hop);
    double frame_peak = 0.0;
    for (std::size_t i = begin; i < end; ++i) frame_peak = std::max(frame_peak, std::abs(w.samples[i]));
    if (frame_peak < threshold) continue;
    out.samples.insert(out.samples.end(), w.samples.begin() + begin, w.samples.begin() + end);
  }
  if (out.samples.empty()) throw EmptyResultError("empty after trim");
  return out;
}

std::vector<Waveform> segment(const Waveform& w, const StftConfig& cfg) {
  cfg.validate();
  const auto length = static_cast<std::size_t>(std::llround(cfg.segment_seconds * w.sample_rate));
  if (length == 0) throw ConfigError("segment shorter than one sample");
  std::vector<Waveform> out;
  std::size_t begin = 0;
  for (; begin + length <= w.samples.size(); begin += length) {
    out.push_back({std::vector<double>(w.samples.begin() + begin, w.samples.begin() + begin + length), w.sample_rate});
  }
  const std::size_t remainder = w.samples.size() - begin;
  if (remainder > 0 && 2 * remainder >= length) {
    Waveform tail{std::vector<double>(w.samples.begin() + begin, w.samples.end()), w.sample_rate};
    tail.samples.resize(length, 0.0);
    out.push_back(std::move(tail));
  }
  return out;
}

std::vector<double> hann_window(std::size_t n) {
  if (n < 2) throw ConfigError("hann window needs n >= 2");
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n)));
  }
  return w;
}

namespace {

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

}  // namespace

SpectrogramMatrix stft(const Waveform& w, const StftConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.window_size;
  if (w.samples.size() < n) {
    throw DimensionError("stft: signal of " + std::to_string(w.samples.size()) + " samples is shorter than one window",
                         "time");
  }
  const std::size_t hop = cfg.hop();
  const std::size_t frames = (w.samples.size() - n) / hop + 1;
  const std::size_t bins = n / 2 + 1;
  const auto window = hann_window(n);

  std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
  std::unique_ptr<fftw_complex, FftwFree> out(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
  std::unique_ptr<fftw_plan_s, FftwPlanDeleter> plan(
      fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));

  SpectrogramMatrix s;
  s.freq_bins = bins;
  s.frames = frames;
  s.hop = hop;
  s.bin_hz = static_cast<double>(w.sample_rate) / static_cast<double>(n);
  s.magnitudes.assign(bins * frames, 0.0);
  for (std::size_t f = 0; f < frames; ++f) {
    const double* src = w.samples.data() + f * hop;
    for (std::size_t i = 0; i < n; ++i) in.get()[i] = src[i] * window[i];
    fftw_execute(plan.get());
    for (std::size_t k = 0; k < bins; ++k) {
      s.magnitudes[k * frames + f] = std::hypot(out.get()[k][0], out.get()[k][1]);
    }
  }
  return s;
}

SpectrogramMatrix crop_band(const SpectrogramMatrix& s, const StftConfig& cfg, std::uint32_t sample_rate) {
  const double nyquist = sample_rate / 2.0;
  if (cfg.band_high_hz > nyquist) {
    throw ConfigError("band top " + std::to_string(cfg.band_high_hz) + " Hz exceeds Nyquist " + std::to_string(nyquist));
  }
  // k * bin_hz <= high, evaluated in exact rational form to avoid rounding at the edge.
  const double window = static_cast<double>(sample_rate) / s.bin_hz;
  const auto k_max = static_cast<std::size_t>(std::floor(cfg.band_high_hz * std::round(window) / sample_rate));
  const auto k_min = static_cast<std::size_t>(std::ceil(cfg.band_low_hz * std::round(window) / sample_rate));
  const std::size_t hi = std::min(k_max, s.freq_bins - 1);
  SpectrogramMatrix out = s;
  if (k_min > hi) {
    out.freq_bins = 0;
    out.magnitudes.clear();
    return out;
  }
  out.freq_bins = hi - k_min + 1;
  out.magnitudes.assign(s.magnitudes.begin() + k_min * s.frames, s.magnitudes.begin() + (hi + 1) * s.frames);
  return out;
}

RenderedSpectrogram render(const SpectrogramMatrix& s) {
  if (s.freq_bins == 0 || s.frames == 0) throw DimensionError("render: empty spectrogram");
  std::vector<double> v(s.magnitudes.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::log10(1.0 + s.magnitudes[i]);
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it, hi = *hi_it;

  const auto& palette = spectrogram_colormap();
  RenderedSpectrogram img;
  img.pixels.resize(kRenderSize * kRenderSize * 3);
  auto put = [&](std::size_t y, std::size_t x, std::size_t index) {
    const Rgb c = palette[index];
    std::uint8_t* p = img.pixels.data() + (y * kRenderSize + x) * 3;
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  };
  if (hi == lo) {
    const std::size_t index = hi == 0.0 ? 0 : 128;
    for (std::size_t y = 0; y < kRenderSize; ++y)
      for (std::size_t x = 0; x < kRenderSize; ++x) put(y, x, index);
    return img;
  }

  const double span = hi - lo;
  const double row_scale = s.freq_bins > 1 ? static_cast<double>(s.freq_bins - 1) / (kRenderSize - 1) : 0.0;
  const double col_scale = s.frames > 1 ? static_cast<double>(s.frames - 1) / (kRenderSize - 1) : 0.0;
  for (std::size_t y = 0; y < kRenderSize; ++y) {
    // Row 0 is the top of the image, i.e. the highest retained frequency.
    const double fy = static_cast<double>(kRenderSize - 1 - y) * row_scale;
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, s.freq_bins - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < kRenderSize; ++x) {
      const double fx = static_cast<double>(x) * col_scale;
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, s.frames - 1);
      const double tx = fx - static_cast<double>(x0);
      auto at = [&](std::size_t r, std::size_t c) { return (v[r * s.frames + c] - lo) / span; };
      const double top = at(y0, x0) * (1.0 - tx) + at(y0, x1) * tx;
      const double bottom = at(y1, x0) * (1.0 - tx) + at(y1, x1) * tx;
      const double value = std::clamp(top * (1.0 - ty) + bottom * ty, 0.0, 1.0);
      put(y, x, static_cast<std::size_t>(std::lround(value * 255.0)));
    }
  }
  return img;
}

std::vector<RenderedSpectrogram> spectrogram_pipeline(const Waveform& w, std::uint32_t sample_rate,
                                                      const StftConfig& cfg) {
  cfg.validate();
  const Waveform trimmed = trim_silence(resample(w, sample_rate), cfg);
  const auto segments = segment(trimmed, cfg);
  if (segments.empty()) throw EmptyResultError("shorter than half a segment after trim");
  std::vector<RenderedSpectrogram> out;
  out.reserve(segments.size());
  for (const auto& seg : segments) out.push_back(render(crop_band(stft(seg, cfg), cfg, sample_rate)));
  return out;
}

}  // namespace fusenet::audio
