#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fusenet/checkpoint.hpp"
#include "fusenet/dataset.hpp"
#include "fusenet/kv_config.hpp"
#include "fusenet/model.hpp"

namespace fusenet {

struct TrainConfig {
  double lr = 0.001;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  Precision precision = Precision::F32;
  bool shuffle = true;
  double momentum = 0.0;
  double weight_decay = 0.0;

  /// lr 0.001, batch 32.
  static TrainConfig unimodal();
  /// lr 0.0001, batch 1.
  static TrainConfig multimodal();

  void validate() const;
  /// Keys: lr, batch, epochs, seed, precision (32|64), shuffle, momentum, weight_decay.
  KeyValueConfig to_kv() const;
  /// Overrides the fields of `base` present in `kv`.
  static TrainConfig from_kv(const KeyValueConfig& kv, TrainConfig base);

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0;           // mean training loss over the epoch
  double test_accuracy = 0;  // NaN when the dataset has no test split
};

/// CSV with header epoch,loss,test_accuracy.
std::string metrics_csv(const std::vector<EpochMetrics>& rows);

template <typename T>
struct TrainResult {
  Checkpoint<T> checkpoint;
  std::vector<EpochMetrics> metrics;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Minibatch SGD over the dataset's train split, evaluating on its test split after every
/// epoch. The shuffle order comes from cfg.seed. A non-finite loss aborts with NumericError.
template <typename T>
TrainResult<T> train(Model<T>& model, const PairedDataset<T>& data, const TrainConfig& cfg,
                     const EpochCallback& on_epoch = {});

struct Prediction {
  std::string sample_id;  // "<image id>|<audio id>"
  std::size_t label = 0;
  std::size_t predicted = 0;
  std::vector<double> scores;
};

struct Evaluation {
  double accuracy = 0;
  std::vector<Prediction> predictions;
};

/// Accuracy of first-index argmax over every sample of `data`. Empty data throws EmptyResultError.
template <typename T>
Evaluation evaluate(Model<T>& model, const PairedDataset<T>& data, std::size_t batch_size = 64);

/// CSV with header sample,label,predicted,score_0,...
std::string predictions_csv(const Evaluation& eval);

struct StageSchedule {
  TrainConfig image_stage = TrainConfig::unimodal();
  TrainConfig audio_stage = TrainConfig::unimodal();
  TrainConfig fusion_stage = TrainConfig::multimodal();
  bool run_stage2 = true;
};

template <typename T>
struct TwoStageResult {
  TrainResult<T> image_stage;
  TrainResult<T> audio_stage;
  std::optional<TrainResult<T>> fusion_stage;
  /// The multimodal net right after the stream weights were transplanted.
  Checkpoint<T> after_stage1;
  Checkpoint<T> final_state;
  /// Parameters trained in stage 2.
  std::set<std::string> trainable;
  double image_accuracy = 0;
  double audio_accuracy = 0;
  double fused_accuracy = 0;
};

/// Parameters stage 2 may update: the fusion head, or each stream's fc8 when the head has
/// no parameters (sum, product, score average).
template <typename T>
std::set<std::string> stage2_trainable(const MultimodalNet<T>& net);

/// Trains each stream standalone, copies the weights into `net`, then trains only
/// stage2_trainable(net) with everything else frozen. Accuracies are on the test split.
template <typename T>
TwoStageResult<T> two_stage_finetune(MultimodalNet<T>& net, UnimodalNet<T>& image_net, UnimodalNet<T>& audio_net,
                                     const PairedDataset<T>& data, const StageSchedule& schedule,
                                     const std::function<void(const std::string& stage, const EpochMetrics&)>& on_epoch = {});

/// Names of the layers whose per-tensor hashes differ between two snapshots.
template <typename T>
std::vector<std::string> changed_tensors(const Checkpoint<T>& before, const Checkpoint<T>& after);

struct CompareConfig {
  StreamConfig stream = StreamConfig::desk32(4);
  TrainConfig unimodal = TrainConfig::unimodal();
  TrainConfig multimodal = TrainConfig::multimodal();
  /// Seed for model initialization; the training seeds come from the TrainConfigs.
  std::uint64_t seed = 0;
};

struct StrategyRow {
  std::string strategy;
  double accuracy = 0;
  std::size_t epochs = 0;
  double wall_seconds = 0;
  std::vector<EpochMetrics> curve;
  std::string error;  // empty on success
};

struct CompareReport {
  std::vector<StrategyRow> rows;

  bool all_succeeded() const;
  const StrategyRow& row(const std::string& strategy) const;
  /// strategy,accuracy,epochs. Wall time is left out so reruns are byte-identical.
  std::string to_csv() const;
  /// Aligned table including wall time.
  std::string to_text() const;
};

/// Trains image-only, audio-only and the six fusion variants with identical seeds.
template <typename T>
CompareReport compare_strategies(const PairedDataset<T>& data, const CompareConfig& cfg,
                                 const std::function<void(const StrategyRow&)>& on_row = {});

}  // namespace fusenet
