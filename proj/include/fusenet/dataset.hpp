#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fusenet/tensor.hpp"

namespace fusenet {

enum class Split : std::uint8_t { Train = 0, Test = 1 };

std::string to_string(Split s);
Split parse_split(const std::string& s);

/// One image paired with one spectrogram of the same class. Both tensors are [3, H, W].
template <typename T>
struct PairedSample {
  Tensor<T> image;
  Tensor<T> spectrogram;
  std::size_t label = 0;
  std::string image_id;
  std::string audio_id;
  Split split = Split::Train;

  friend bool operator==(const PairedSample&, const PairedSample&) = default;
};

template <typename T>
struct Batch {
  Tensor<T> image;        // [N, 3, H, W]
  Tensor<T> spectrogram;  // [N, 3, H, W]
  std::vector<std::size_t> labels;
};

template <typename T>
struct PairedDataset {
  std::vector<std::string> classes;
  std::vector<PairedSample<T>> samples;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  std::size_t class_count() const noexcept { return classes.size(); }
  /// Samples tagged with `split`, keeping the class table.
  PairedDataset subset(Split split) const;
  /// Labels in range and every tensor of one modality sharing a shape.
  void validate() const;
  Batch<T> batch(std::span<const std::size_t> indices) const;

  friend bool operator==(const PairedDataset&, const PairedDataset&) = default;
};

/// Class name -> file paths of one modality, in a fixed order.
using ModalityIndex = std::map<std::string, std::vector<std::string>>;

/// Indexes `root/<class>/<file>` for files with one of `extensions`, sorted by name.
ModalityIndex index_directory(const std::string& root, const std::vector<std::string>& extensions);

struct ManifestRow {
  std::string image_path;
  std::string spectrogram_path;
  std::string class_name;
  Split split = Split::Train;

  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

/// CSV with header `image_path,spectrogram_path,class,split`. The class table is the sorted
/// set of class names appearing in the rows.
struct DatasetManifest {
  std::vector<std::string> classes;
  std::vector<ManifestRow> rows;

  std::size_t class_index(const std::string& name) const;
  void validate() const;
  std::string to_csv() const;
  static DatasetManifest from_csv(const std::string& text);
  static DatasetManifest load(const std::string& path);
  void save(const std::string& path) const;
  /// Rebuilds `classes` from the rows.
  void refresh_classes();

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct PairingResult {
  DatasetManifest manifest;
  std::vector<std::string> image_only;  // classes dropped for lack of audio
  std::vector<std::string> audio_only;  // classes dropped for lack of images
};

/// Pairs every image with a same-class spectrogram. Spectrograms are dealt out in a seeded
/// permutation, cycling when a class has more images than spectrograms. All rows are tagged
/// Train; use split_halves afterwards.
PairingResult pair_modalities(const ModalityIndex& images, const ModalityIndex& audio, std::uint64_t seed);

/// Per-class seeded 50/50 split; odd counts give the extra sample to train. A class with a
/// single sample goes to train and adds a message to `warnings`.
DatasetManifest split_halves(const DatasetManifest& manifest, std::uint64_t seed,
                             std::vector<std::string>* warnings = nullptr);

/// Decodes the manifest's images (paths relative to `base_dir` unless absolute) resized to
/// hw x hw.
template <typename T>
PairedDataset<T> load_manifest_samples(const DatasetManifest& manifest, const std::string& base_dir,
                                       std::size_t hw);

/// Factorial benchmark: class (a, b) = a * audio_factors + b. The image carries only factor
/// a (an oriented grating), the spectrogram surrogate only factor b (a frequency band).
struct SyntheticSpec {
  std::size_t image_factors = 2;
  std::size_t audio_factors = 2;
  std::size_t samples_per_class = 200;  // split in halves, extra to train
  double noise_sigma = 0.3;
  std::size_t hw = 32;
  std::uint64_t seed = 0;

  std::size_t class_count() const noexcept { return image_factors * audio_factors; }
  void validate() const;
};

template <typename T>
PairedDataset<T> gen_synthetic(const SyntheticSpec& spec);

/// Noise-free modality patterns used by gen_synthetic, [3, hw, hw] in [0, 1].
template <typename T>
Tensor<T> synthetic_image_pattern(std::size_t factor, std::size_t factors, std::size_t hw);
template <typename T>
Tensor<T> synthetic_spectrogram_pattern(std::size_t factor, std::size_t factors, std::size_t hw);

/// Single-file dataset container.
///
/// Layout (all integers little-endian):
///
///     "FZDS"              4 bytes magic
///     version             u16 (currently 1)
///     dtype               u8, 4 or 8
///     class_count         u32, then class_count x (u32 length, UTF-8 name)
///     record_count        u64
///     image shape         u32 x 3 (C, H, W), zeros when empty
///     spectrogram shape   u32 x 3
///     header_crc          u32, CRC-32 of every preceding byte
///     then record_count records:
///       body: label u32, split u8, image_id (u32 length + bytes), audio_id (same),
///             image payload, spectrogram payload (IEEE-754, width dtype)
///       crc   u32, CRC-32 of body
inline constexpr std::uint16_t kContainerVersion = 1;

template <typename T>
std::vector<std::uint8_t> encode_container(const PairedDataset<T>& data);

/// Decodes either payload width into T. Damaged records raise ChecksumError with their index.
template <typename T>
PairedDataset<T> decode_container(std::span<const std::uint8_t> bytes);

template <typename T>
void save_container(const PairedDataset<T>& data, const std::string& path);

template <typename T>
PairedDataset<T> load_container(const std::string& path);

Precision container_precision(const std::string& path);

}  // namespace fusenet
