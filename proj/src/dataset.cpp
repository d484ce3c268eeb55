#include "fusenet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "fusenet/colormap.hpp"
#include "fusenet/image_io.hpp"
#include "fusenet/kv_config.hpp"

namespace fusenet {

namespace fs = std::filesystem;

std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  throw ConfigError("split must be 'train' or 'test', got '" + s + "'");
}

template <typename T>
PairedDataset<T> PairedDataset<T>::subset(Split split) const {
  PairedDataset out;
  out.classes = classes;
  for (const auto& s : samples)
    if (s.split == split) out.samples.push_back(s);
  return out;
}

template <typename T>
void PairedDataset<T>::validate() const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.label >= classes.size())
      throw ConfigError("sample " + std::to_string(i) + " has label " + std::to_string(s.label) + " but only " +
                        std::to_string(classes.size()) + " classes");
    if (s.image.rank() != 3 || s.spectrogram.rank() != 3)
      throw DimensionError("sample " + std::to_string(i) + " tensors must be [C,H,W]", "rank");
    if (s.image.shape() != samples[0].image.shape())
      throw DimensionError("sample " + std::to_string(i) + " image shape " + shape_string(s.image.shape()) +
                               " differs from " + shape_string(samples[0].image.shape()),
                           "image");
    if (s.spectrogram.shape() != samples[0].spectrogram.shape())
      throw DimensionError("sample " + std::to_string(i) + " spectrogram shape " +
                               shape_string(s.spectrogram.shape()) + " differs from " +
                               shape_string(samples[0].spectrogram.shape()),
                           "spectrogram");
  }
}

template <typename T>
Batch<T> PairedDataset<T>::batch(std::span<const std::size_t> indices) const {
  std::vector<const Tensor<T>*> images, spectrograms;
  Batch<T> out;
  for (std::size_t i : indices) {
    const auto& s = samples.at(i);
    images.push_back(&s.image);
    spectrograms.push_back(&s.spectrogram);
    out.labels.push_back(s.label);
  }
  out.image = stack<T>(images);
  out.spectrogram = stack<T>(spectrograms);
  return out;
}

template struct PairedDataset<float>;
template struct PairedDataset<double>;

ModalityIndex index_directory(const std::string& root, const std::vector<std::string>& extensions) {
  if (!fs::is_directory(root)) throw ConfigError("not a directory: " + root);
  ModalityIndex index;
  for (const auto& class_dir : fs::directory_iterator(root)) {
    if (!class_dir.is_directory()) continue;
    std::vector<std::string> files;
    for (const auto& f : fs::directory_iterator(class_dir.path())) {
      if (!f.is_regular_file()) continue;
      const auto ext = f.path().extension().string();
      if (std::find(extensions.begin(), extensions.end(), ext) != extensions.end())
        files.push_back(f.path().string());
    }
    std::sort(files.begin(), files.end());
    if (!files.empty()) index[class_dir.path().filename().string()] = std::move(files);
  }
  return index;
}

// ---------------------------------------------------------------------------------------------
// Manifest

namespace {

const char* const kManifestHeader = "image_path,spectrogram_path,class,split";

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) throw FormatError("manifest line " + std::to_string(line_no) + ": unterminated quote");
  return fields;
}

std::mt19937_64 class_rng(std::uint64_t seed, const std::string& class_name) {
  return std::mt19937_64(seed ^ fnv1a(class_name));
}

}  // namespace

std::size_t DatasetManifest::class_index(const std::string& name) const {
  const auto it = std::find(classes.begin(), classes.end(), name);
  if (it == classes.end()) throw ConfigError("class '" + name + "' is not in the class table");
  return static_cast<std::size_t>(it - classes.begin());
}

void DatasetManifest::validate() const {
  for (const auto& r : rows) class_index(r.class_name);
}

void DatasetManifest::refresh_classes() {
  std::set<std::string> names;
  for (const auto& r : rows) names.insert(r.class_name);
  classes.assign(names.begin(), names.end());
}

std::string DatasetManifest::to_csv() const {
  std::string out = std::string(kManifestHeader) + "\n";
  for (const auto& r : rows) {
    out += csv_field(r.image_path) + "," + csv_field(r.spectrogram_path) + "," + csv_field(r.class_name) + "," +
           to_string(r.split) + "\n";
  }
  return out;
}

DatasetManifest DatasetManifest::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  DatasetManifest m;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != kManifestHeader)
        throw FormatError("manifest header must be '" + std::string(kManifestHeader) + "'");
      header = true;
      continue;
    }
    const auto f = csv_split(line, line_no);
    if (f.size() != 4)
      throw FormatError("manifest line " + std::to_string(line_no) + ": expected 4 fields, got " +
                        std::to_string(f.size()));
    Split split;
    try {
      split = parse_split(f[3]);
    } catch (const ConfigError& e) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    m.rows.push_back({f[0], f[1], f[2], split});
  }
  if (!header) throw FormatError("manifest is missing its header line");
  m.refresh_classes();
  return m;
}

DatasetManifest DatasetManifest::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open manifest " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_csv(ss.str());
}

void DatasetManifest::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write manifest " + path);
  out << to_csv();
}

PairingResult pair_modalities(const ModalityIndex& images, const ModalityIndex& audio, std::uint64_t seed) {
  PairingResult result;
  for (const auto& [name, files] : images) {
    const auto it = audio.find(name);
    if (it == audio.end() || it->second.empty()) {
      result.image_only.push_back(name);
      continue;
    }
    if (files.empty()) continue;
    std::vector<std::size_t> order(it->second.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto rng = class_rng(seed, name);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < files.size(); ++i) {
      result.manifest.rows.push_back({files[i], it->second[order[i % order.size()]], name, Split::Train});
    }
  }
  for (const auto& [name, files] : audio) {
    const auto it = images.find(name);
    if (!files.empty() && (it == images.end() || it->second.empty())) result.audio_only.push_back(name);
  }
  if (result.manifest.rows.empty()) throw EmptyResultError("no class has both images and spectrograms");
  result.manifest.refresh_classes();
  return result;
}

DatasetManifest split_halves(const DatasetManifest& manifest, std::uint64_t seed, std::vector<std::string>* warnings) {
  DatasetManifest out = manifest;
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < out.rows.size(); ++i) by_class[out.rows[i].class_name].push_back(i);
  for (auto& [name, rows] : by_class) {
    if (rows.size() == 1) {
      out.rows[rows[0]].split = Split::Train;
      if (warnings) warnings->push_back("class '" + name + "' has a single sample; assigned to train");
      continue;
    }
    auto rng = class_rng(seed, name);
    std::shuffle(rows.begin(), rows.end(), rng);
    const std::size_t train = (rows.size() + 1) / 2;
    for (std::size_t i = 0; i < rows.size(); ++i) out.rows[rows[i]].split = i < train ? Split::Train : Split::Test;
  }
  return out;
}

template <typename T>
PairedDataset<T> load_manifest_samples(const DatasetManifest& manifest, const std::string& base_dir, std::size_t hw) {
  manifest.validate();
  auto resolve = [&](const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path.string() : (fs::path(base_dir) / path).string();
  };
  PairedDataset<T> out;
  out.classes = manifest.classes;
  for (const auto& r : manifest.rows) {
    PairedSample<T> s;
    s.image = image_to_tensor<T>(read_image(resolve(r.image_path)), hw);
    s.spectrogram = image_to_tensor<T>(read_image(resolve(r.spectrogram_path)), hw);
    s.label = manifest.class_index(r.class_name);
    s.image_id = r.image_path;
    s.audio_id = r.spectrogram_path;
    s.split = r.split;
    out.samples.push_back(std::move(s));
  }
  return out;
}

template PairedDataset<float> load_manifest_samples<float>(const DatasetManifest&, const std::string&, std::size_t);
template PairedDataset<double> load_manifest_samples<double>(const DatasetManifest&, const std::string&, std::size_t);

// ---------------------------------------------------------------------------------------------
// Synthetic factorial set

void SyntheticSpec::validate() const {
  if (image_factors < 2 || audio_factors < 2) throw ConfigError("synthetic factors must both be >= 2");
  if (samples_per_class < 1) throw ConfigError("samples_per_class must be >= 1");
  if (!(noise_sigma >= 0) || !std::isfinite(noise_sigma)) throw ConfigError("noise_sigma must be finite and >= 0");
  if (hw < 8) throw ConfigError("synthetic hw must be >= 8");
}

template <typename T>
Tensor<T> synthetic_image_pattern(std::size_t factor, std::size_t factors, std::size_t hw) {
  // Grating with 3 cycles across the frame; orientation encodes the factor.
  const double theta = std::numbers::pi * static_cast<double>(factor) / static_cast<double>(factors);
  const double freq = 2 * std::numbers::pi * 3.0 / static_cast<double>(hw);
  Tensor<T> out({3, hw, hw});
  for (std::size_t y = 0; y < hw; ++y) {
    for (std::size_t x = 0; x < hw; ++x) {
      const double p = 0.5 + 0.5 * std::sin(freq * (x * std::cos(theta) + y * std::sin(theta)));
      out[(0 * hw + y) * hw + x] = static_cast<T>(p);
      out[(1 * hw + y) * hw + x] = static_cast<T>(0.25 + 0.5 * p);
      out[(2 * hw + y) * hw + x] = static_cast<T>(1.0 - p);
    }
  }
  return out;
}

template <typename T>
Tensor<T> synthetic_spectrogram_pattern(std::size_t factor, std::size_t factors, std::size_t hw) {
  // A pulsed frequency band, rendered through the spectrogram colormap. Higher factors sit
  // higher in frequency, i.e. nearer row 0.
  const auto& cmap = spectrogram_colormap();
  const double n = static_cast<double>(hw);
  const double center = n * (static_cast<double>(factors - factor) - 0.5) / static_cast<double>(factors);
  const double width = n / (3.0 * static_cast<double>(factors));
  Tensor<T> out({3, hw, hw});
  for (std::size_t y = 0; y < hw; ++y) {
    for (std::size_t x = 0; x < hw; ++x) {
      const double d = (static_cast<double>(y) - center) / width;
      const double v = std::exp(-d * d) * (0.75 + 0.25 * std::cos(2 * std::numbers::pi * 2.0 * x / n));
      const Rgb c = cmap[static_cast<std::size_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255))];
      out[(0 * hw + y) * hw + x] = static_cast<T>(c.r / 255.0);
      out[(1 * hw + y) * hw + x] = static_cast<T>(c.g / 255.0);
      out[(2 * hw + y) * hw + x] = static_cast<T>(c.b / 255.0);
    }
  }
  return out;
}

template <typename T>
PairedDataset<T> gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto noisy = [&](Tensor<T> t) {
    if (spec.noise_sigma > 0)
      for (auto& v : t.data()) v = static_cast<T>(v + spec.noise_sigma * noise(rng));
    return t;
  };

  PairedDataset<T> out;
  for (std::size_t a = 0; a < spec.image_factors; ++a) {
    const auto image = synthetic_image_pattern<T>(a, spec.image_factors, spec.hw);
    for (std::size_t b = 0; b < spec.audio_factors; ++b) {
      const auto spectrogram = synthetic_spectrogram_pattern<T>(b, spec.audio_factors, spec.hw);
      const std::size_t label = a * spec.audio_factors + b;
      const std::string name = "a" + std::to_string(a) + "b" + std::to_string(b);
      out.classes.push_back(name);
      const std::size_t train = (spec.samples_per_class + 1) / 2;
      for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
        PairedSample<T> s;
        s.image = noisy(image);
        s.spectrogram = noisy(spectrogram);
        s.label = label;
        s.image_id = name + "/img" + std::to_string(i);
        s.audio_id = name + "/aud" + std::to_string(i);
        s.split = i < train ? Split::Train : Split::Test;
        out.samples.push_back(std::move(s));
      }
    }
  }
  return out;
}

template Tensor<float> synthetic_image_pattern<float>(std::size_t, std::size_t, std::size_t);
template Tensor<double> synthetic_image_pattern<double>(std::size_t, std::size_t, std::size_t);
template Tensor<float> synthetic_spectrogram_pattern<float>(std::size_t, std::size_t, std::size_t);
template Tensor<double> synthetic_spectrogram_pattern<double>(std::size_t, std::size_t, std::size_t);
template PairedDataset<float> gen_synthetic<float>(const SyntheticSpec&);
template PairedDataset<double> gen_synthetic<double>(const SyntheticSpec&);

}  // namespace fusenet
