#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fusenet/autograd.hpp"
#include "fusenet/kv_config.hpp"
#include "fusenet/ops.hpp"

namespace fusenet {

enum class ScaleProfile { Paper227, Desk32 };

struct ConvLayerSpec {
  std::size_t channels;
  std::size_t kernel;
  std::size_t stride;
  std::size_t pad;
  friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

struct PoolSpec {
  std::size_t kernel = 3;
  std::size_t stride = 2;
  friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

/// One CaffeNet-style stream: conv1..conv5 (pools after 1, 2, 5; LRN after 1, 2), fc6, fc7,
/// and fc8 producing `class_count` scores. ReLU follows every layer except fc8.
struct StreamConfig {
  ScaleProfile profile = ScaleProfile::Desk32;
  std::size_t input_hw = 32;
  std::size_t in_channels = 3;
  std::array<ConvLayerSpec, 5> conv{};
  std::array<std::size_t, 2> fc{};
  std::size_t class_count = 2;
  PoolSpec pool;
  LrnParams lrn;

  /// 16-32-48-48-32 conv channels, 128-128 hidden fc, 32x32 input.
  static StreamConfig desk32(std::size_t classes);
  /// CaffeNet shapes on 227x227 input (ungrouped convolutions).
  static StreamConfig paper227(std::size_t classes);

  void validate() const;
  KeyValueConfig to_kv() const;
  static StreamConfig from_kv(const KeyValueConfig& kv);
  /// Hash of the canonical text form.
  std::uint64_t hash() const;

  friend bool operator==(const StreamConfig& a, const StreamConfig& b) { return a.to_kv().to_text() == b.to_kv().to_text(); }
};

std::string to_string(ScaleProfile p);
ScaleProfile parse_scale_profile(const std::string& s);

enum class FusionStrategy { EarlyConcat, MidConcat, LateSum, LateMul, LateFc7Concat, LateScoreAvg };

inline constexpr std::array<FusionStrategy, 6> kAllFusionStrategies{
    FusionStrategy::EarlyConcat, FusionStrategy::MidConcat,     FusionStrategy::LateSum,
    FusionStrategy::LateMul,     FusionStrategy::LateFc7Concat, FusionStrategy::LateScoreAvg};

/// Kebab-case form: early-concat, mid-concat, late-sum, late-mul, late-fc7-concat, late-score-avg.
std::string to_string(FusionStrategy s);
/// Short experiment label: net1, net2, net3-sum, net3-mul, fc7-concat, score-avg.
std::string strategy_label(FusionStrategy s);
/// Accepts either form.
FusionStrategy parse_fusion_strategy(const std::string& s);

enum class Modality { Image, Audio };
std::string to_string(Modality m);

/// Output shape of one layer of a stream, excluding the batch axis.
struct LayerShape {
  std::string layer;
  Shape shape;
};

/// Shape inference over a stream for an input of in_h x in_w. Throws TopologyError naming the
/// first layer whose window no longer fits.
std::vector<LayerShape> infer_stream_shapes(const StreamConfig& cfg, std::size_t in_h, std::size_t in_w);

/// Layer names in execution order, e.g. conv1, relu1, lrn1, pool1, ..., fc8.
std::vector<std::string> layer_sequence(const StreamConfig& cfg);

/// Closed-form learnable-parameter counts without allocating any weights.
std::size_t stream_parameter_count(const StreamConfig& cfg, std::size_t in_h, std::size_t in_w);
std::size_t network_parameter_count(FusionStrategy strategy, const StreamConfig& cfg);

enum class StreamStage { Pool5, Fc7, Scores };

/// Fully connected layers applied in sequence; ReLU after each layer except optionally the last.
template <typename T>
class FcStack {
 public:
  FcStack(std::string prefix, std::size_t in_width, std::vector<std::pair<std::string, std::size_t>> layers,
          bool relu_last);

  void init_parameters(ParameterStore<T>& params, std::mt19937_64& rng) const;
  std::set<std::string> parameter_names() const;
  /// Runs up to and including layer `last` (all layers when `last` is empty).
  Var forward(Graph<T>& g, Var input, const std::string& last = {}) const;
  std::size_t in_width() const noexcept { return in_width_; }
  std::size_t out_width() const { return layers_.back().second; }
  std::size_t width_of(const std::string& layer) const;
  std::size_t parameter_count() const;

 private:
  std::string prefix_;
  std::size_t in_width_;
  std::vector<std::pair<std::string, std::size_t>> layers_;
  bool relu_last_;
};

/// One modality's CNN. Parameters are named "<prefix>.<layer>.weight|bias".
template <typename T>
class Stream {
 public:
  /// `last` limits which layers exist: Pool5 (conv trunk only), Fc7, or Scores (complete).
  Stream(std::string prefix, StreamConfig cfg, std::size_t in_h, std::size_t in_w,
         StreamStage last = StreamStage::Scores);

  void init_parameters(ParameterStore<T>& params, std::mt19937_64& rng) const;
  std::set<std::string> parameter_names() const;
  /// Names of one layer's weight and bias.
  std::set<std::string> layer_parameter_names(const std::string& layer) const;

  /// Flattened [N, F] output of the requested stage.
  Var forward(Graph<T>& g, Var input, StreamStage upto) const;

  const std::string& prefix() const noexcept { return prefix_; }
  std::size_t pool5_width() const noexcept { return pool5_width_; }
  std::size_t fc7_width() const noexcept { return cfg_.fc[1]; }
  StreamStage last_stage() const noexcept { return last_; }
  std::size_t input_height() const noexcept { return in_h_; }
  std::size_t input_width() const noexcept { return in_w_; }

 private:
  std::string prefix_;
  StreamConfig cfg_;
  std::size_t in_h_, in_w_;
  StreamStage last_;
  std::size_t pool5_width_;
  std::optional<FcStack<T>> fc_;
};

/// Anything the training engine can fit: a parameter registry plus a forward pass over a
/// batch of (image, spectrogram) pairs.
template <typename T>
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string label() const = 0;
  /// [N, class_count] class scores (or class probabilities when outputs_probabilities()).
  virtual Var forward(Graph<T>& g, const Tensor<T>& image, const Tensor<T>& spectrogram) const = 0;
  virtual bool outputs_probabilities() const { return false; }

  /// Cross-entropy on scores; negative log-likelihood on probability outputs.
  Var loss(Graph<T>& g, Var output, std::span<const std::size_t> labels) const;
  /// Row-wise class distribution of the forward output.
  Tensor<T> predict_proba(const Tensor<T>& image, const Tensor<T>& spectrogram);

  ParameterStore<T>& parameters() noexcept { return params_; }
  const ParameterStore<T>& parameters() const noexcept { return params_; }
  const StreamConfig& config() const noexcept { return cfg_; }
  std::size_t class_count() const noexcept { return cfg_.class_count; }

 protected:
  explicit Model(StreamConfig cfg) : cfg_(std::move(cfg)) {}
  void check_input(const Tensor<T>& t, Modality m) const;

  StreamConfig cfg_;
  ParameterStore<T> params_;
};

template <typename T>
class UnimodalNet final : public Model<T> {
 public:
  UnimodalNet(Modality modality, StreamConfig cfg, std::uint64_t seed);

  std::string label() const override { return to_string(modality_); }
  Var forward(Graph<T>& g, const Tensor<T>& image, const Tensor<T>& spectrogram) const override;
  Modality modality() const noexcept { return modality_; }
  const Stream<T>& stream() const noexcept { return stream_; }

 private:
  Modality modality_;
  Stream<T> stream_;
};

/// Intermediate values of a multimodal forward pass, for inspection and tests.
struct FusionTrace {
  std::optional<Var> image_features;
  std::optional<Var> audio_features;
  /// The fused tensor: merged input (EarlyConcat), concatenated features (MidConcat,
  /// LateFc7Concat), or combined scores (late strategies).
  Var merged;
  Var output;
};

template <typename T>
class MultimodalNet final : public Model<T> {
 public:
  MultimodalNet(FusionStrategy strategy, StreamConfig cfg, std::uint64_t seed);

  std::string label() const override { return strategy_label(strategy_); }
  Var forward(Graph<T>& g, const Tensor<T>& image, const Tensor<T>& spectrogram) const override;
  FusionTrace forward_trace(Graph<T>& g, const Tensor<T>& image, const Tensor<T>& spectrogram) const;
  bool outputs_probabilities() const override { return strategy_ == FusionStrategy::LateScoreAvg; }

  FusionStrategy strategy() const noexcept { return strategy_; }
  /// Disjoint parameter-name sets that together cover every parameter.
  const std::set<std::string>& image_stream_parameters() const noexcept { return image_names_; }
  const std::set<std::string>& audio_stream_parameters() const noexcept { return audio_names_; }
  const std::set<std::string>& fusion_head_parameters() const noexcept { return head_names_; }

  /// Streams are absent for EarlyConcat's audio side; the head exists only for MidConcat and
  /// LateFc7Concat.
  const Stream<T>* image_stream() const noexcept { return image_ ? &*image_ : nullptr; }
  const Stream<T>* audio_stream() const noexcept { return audio_ ? &*audio_ : nullptr; }
  const FcStack<T>* fusion_head() const noexcept { return head_ ? &*head_ : nullptr; }

 private:
  FusionStrategy strategy_;
  std::optional<Stream<T>> image_;
  std::optional<Stream<T>> audio_;
  std::optional<FcStack<T>> head_;
  std::set<std::string> image_names_, audio_names_, head_names_;
};

template <typename T>
std::unique_ptr<UnimodalNet<T>> build_stream(Modality modality, const StreamConfig& cfg, std::uint64_t seed);
template <typename T>
std::unique_ptr<MultimodalNet<T>> build_net1(const StreamConfig& cfg, std::uint64_t seed);
template <typename T>
std::unique_ptr<MultimodalNet<T>> build_net2(const StreamConfig& cfg, std::uint64_t seed);
template <typename T>
std::unique_ptr<MultimodalNet<T>> build_net3(const StreamConfig& cfg, FusionStrategy mode, std::uint64_t seed);
template <typename T>
std::unique_ptr<MultimodalNet<T>> build_fc7_concat(const StreamConfig& cfg, std::uint64_t seed);
template <typename T>
std::unique_ptr<MultimodalNet<T>> build_score_avg(const StreamConfig& cfg, std::uint64_t seed);

/// Builds by experiment label: image, audio, or any form accepted by parse_fusion_strategy.
template <typename T>
std::unique_ptr<Model<T>> build_model(const std::string& label, const StreamConfig& cfg, std::uint64_t seed);

/// The eight experiment labels in report order.
const std::vector<std::string>& experiment_labels();

}  // namespace fusenet
