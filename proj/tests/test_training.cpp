#include <gtest/gtest.h>

#include <cmath>

#include "fusenet/training.hpp"
#include "gradcheck.hpp"

using namespace fusenet;
using fusenet::testing::tiny_config;

namespace {

// Returns a fixed score row per sample; the row index is stored in image[0].
class TableModel final : public Model<double> {
 public:
  explicit TableModel(std::vector<std::vector<double>> rows)
      : Model<double>(StreamConfig::desk32(rows.at(0).size())), rows_(std::move(rows)) {}
  std::string label() const override { return "table"; }
  Var forward(Graph<double>& g, const Tensor<double>& image, const Tensor<double>&) const override {
    const std::size_t n = image.dim(0), stride = image.size() / n, c = rows_[0].size();
    Tensor<double> out({n, c});
    for (std::size_t i = 0; i < n; ++i) {
      const auto& row = rows_.at(static_cast<std::size_t>(image[i * stride]));
      std::copy(row.begin(), row.end(), out.raw() + i * c);
    }
    return g.constant(out);
  }

 private:
  std::vector<std::vector<double>> rows_;
};

PairedDataset<double> table_dataset(const std::vector<std::size_t>& labels, std::size_t classes) {
  PairedDataset<double> ds;
  for (std::size_t c = 0; c < classes; ++c) ds.classes.push_back("c" + std::to_string(c));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    PairedSample<double> s;
    s.image = Tensor<double>({1, 1, 1}, static_cast<double>(i));
    s.spectrogram = Tensor<double>({1, 1, 1});
    s.label = labels[i];
    s.image_id = "i" + std::to_string(i);
    s.audio_id = "a" + std::to_string(i);
    ds.samples.push_back(s);
  }
  return ds;
}

// Two linearly separable classes: bright vs dark images; the spectrogram is uninformative.
template <typename T = float>
PairedDataset<T> separable_set(std::size_t per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  PairedDataset<T> ds;
  ds.classes = {"dark", "bright"};
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    PairedSample<T> s;
    s.label = i % 2;
    s.image = Tensor<T>({3, 32, 32});
    for (auto& v : s.image.data()) v = static_cast<T>((s.label ? 0.8 : 0.2) + jitter(rng));
    s.spectrogram = Tensor<T>({3, 32, 32}, T(0.5));
    s.split = i < per_class ? Split::Train : Split::Test;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

TrainConfig quick(std::size_t epochs, double lr = 0.01) {
  TrainConfig cfg;
  cfg.lr = lr;
  cfg.batch_size = 4;
  cfg.epochs = epochs;
  cfg.momentum = 0.9;
  cfg.seed = 3;
  return cfg;
}

std::set<std::string> names_with_layer(const std::set<std::string>& names, const std::string& layer) {
  std::set<std::string> out;
  for (const auto& n : names)
    if (n.find("." + layer + ".") != std::string::npos) out.insert(n);
  return out;
}

}  // namespace

TEST(TrainConfig, PaperDefaults) {
  EXPECT_DOUBLE_EQ(TrainConfig::unimodal().lr, 0.001);
  EXPECT_EQ(TrainConfig::unimodal().batch_size, 32u);
  EXPECT_DOUBLE_EQ(TrainConfig::multimodal().lr, 0.0001);
  EXPECT_EQ(TrainConfig::multimodal().batch_size, 1u);
  EXPECT_EQ(TrainConfig::unimodal().epochs, 30u);
  EXPECT_EQ(TrainConfig::unimodal().momentum, 0.0);
}

TEST(TrainConfig, TextRoundTripAndValidation) {
  TrainConfig cfg = quick(7, 0.0123);
  cfg.precision = Precision::F64;
  cfg.shuffle = false;
  cfg.weight_decay = 1e-3;
  EXPECT_EQ(TrainConfig::from_kv(KeyValueConfig::parse(cfg.to_kv().to_text()), TrainConfig{}), cfg);
  EXPECT_THROW(TrainConfig::from_kv(KeyValueConfig::parse("batch = 0"), TrainConfig{}), ConfigError);
  EXPECT_THROW(TrainConfig::from_kv(KeyValueConfig::parse("lr = -1"), TrainConfig{}), ConfigError);
  EXPECT_THROW(TrainConfig::from_kv(KeyValueConfig::parse("precision = 16"), TrainConfig{}), ConfigError);
}

TEST(Train, ZeroLearningRateLeavesParametersUntouched) {
  auto data = gen_synthetic<float>({2, 2, 4, 0.2, 32, 1});
  auto net = build_net2<float>(tiny_config(4), 5);
  const auto before = Checkpoint<float>::capture(net->parameters());
  auto cfg = quick(2, 0.0);
  auto result = train<float>(*net, data, cfg);
  EXPECT_EQ(Checkpoint<float>::capture(net->parameters()), before);
  EXPECT_EQ(result.metrics.size(), 2u);
}

TEST(Train, SameSeedSameRows) {
  auto data = gen_synthetic<float>({2, 2, 6, 0.2, 32, 1});
  auto run = [&](std::uint64_t seed) {
    auto net = build_net3<float>(tiny_config(4), FusionStrategy::LateSum, 5);
    auto cfg = quick(3);
    cfg.seed = seed;
    auto r = train<float>(*net, data, cfg);
    return std::make_pair(metrics_csv(r.metrics), encode_checkpoint(r.checkpoint));
  };
  const auto a = run(9);
  EXPECT_EQ(a, run(9));
  EXPECT_NE(a.first, run(10).first);
  EXPECT_EQ(a.first.substr(0, a.first.find('\n')), "epoch,loss,test_accuracy");
}

TEST(Train, SeparableToySetIsLearned) {
  const auto data = separable_set(10, 4);
  auto net = build_stream<float>(Modality::Image, tiny_config(2), 2);
  auto r = train<float>(*net, data, quick(50));
  EXPECT_DOUBLE_EQ(evaluate<float>(*net, data.subset(Split::Train)).accuracy, 1.0);
  EXPECT_LT(r.metrics.back().loss, r.metrics.front().loss);
}

TEST(Train, CheckpointRoundTripsAfterTraining) {
  const auto data = separable_set<double>(4, 4);
  auto net = build_stream<double>(Modality::Image, tiny_config(2), 2);
  const auto ckpt = train<double>(*net, data, quick(1)).checkpoint;
  const auto bytes = encode_checkpoint(ckpt);
  EXPECT_EQ(encode_checkpoint(decode_checkpoint<double>(bytes)), bytes);
  EXPECT_EQ(ckpt.config_hash, tiny_config(2).hash());
}

TEST(Train, NonFiniteLossAborts) {
  const auto data = separable_set(4, 4);
  auto net = build_stream<float>(Modality::Image, tiny_config(2), 2);
  try {
    train<float>(*net, data, quick(20, 1e30));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos) << e.what();
  }
}

TEST(Train, ShapeAndClassMismatch) {
  auto data = gen_synthetic<float>({2, 2, 2, 0.2, 16, 1});
  auto net = build_net1<float>(tiny_config(4), 1);
  EXPECT_THROW(train<float>(*net, data, quick(1)), DimensionError);
  auto wrong_classes = build_net1<float>(tiny_config(3), 1);
  EXPECT_THROW(train<float>(*wrong_classes, gen_synthetic<float>({2, 2, 2, 0.2, 32, 1}), quick(1)), DimensionError);
}

TEST(Evaluate, AllCorrect) {
  TableModel m({{1, 0}, {0, 1}, {0, 1}});
  EXPECT_DOUBLE_EQ(evaluate<double>(m, table_dataset({0, 1, 1}, 2)).accuracy, 1.0);
}

TEST(Evaluate, UniformScoresPickClassZero) {
  TableModel m(std::vector<std::vector<double>>(7, {0.25, 0.25, 0.25, 0.25}));
  const auto eval = evaluate<double>(m, table_dataset({0, 1, 2, 0, 3, 0, 1}, 4));
  EXPECT_DOUBLE_EQ(eval.accuracy, 3.0 / 7.0);
  for (const auto& p : eval.predictions) EXPECT_EQ(p.predicted, 0u);
}

TEST(Evaluate, HandCountedFixture) {
  // label : argmax  ->  correct?
  //   2   :   2          y
  //   0   :   1          n
  //   1   :   1          y
  //   1   :   0 (tie 0/1, first index)  n
  //   0   :   0          y
  //   2   :   2          y
  //   0   :   2          n
  //   1   :   1          y
  //   2   :   0 (all equal)  n
  //   0   :   0          y
  TableModel m({{0, 0, 3},
                {1, 2, 0},
                {-1, 4, 2},
                {5, 5, 1},
                {9, 1, 1},
                {0.1, 0.2, 0.3},
                {0, 0, 1e-9},
                {-3, -2, -4},
                {7, 7, 7},
                {2, 1, 0}});
  const auto ds = table_dataset({2, 0, 1, 1, 0, 2, 0, 1, 2, 0}, 3);
  const auto eval = evaluate<double>(m, ds, 3);
  EXPECT_DOUBLE_EQ(eval.accuracy, 0.6);
  ASSERT_EQ(eval.predictions.size(), 10u);
  EXPECT_EQ(eval.predictions[3].predicted, 0u);
  EXPECT_EQ(eval.predictions[4].sample_id, "i4|a4");
  const auto csv = predictions_csv(eval);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "sample,label,predicted,score_0,score_1,score_2");
}

TEST(Evaluate, EmptyIsAnError) {
  TableModel m({{1, 0}});
  EXPECT_THROW(evaluate<double>(m, table_dataset({}, 2)), EmptyResultError);
}

class TwoStage : public ::testing::Test {
 protected:
  PairedDataset<float> data = gen_synthetic<float>({2, 2, 6, 0.2, 32, 8});
  StreamConfig cfg = tiny_config(4);
  StageSchedule schedule = [] {
    StageSchedule s;
    s.image_stage = quick(2);
    s.audio_stage = quick(2);
    s.fusion_stage = quick(2);
    return s;
  }();
};

TEST_F(TwoStage, Fc7ConcatChangesOnlyTheHead) {
  auto net = build_fc7_concat<float>(cfg, 1);
  auto image = build_stream<float>(Modality::Image, cfg, 2);
  auto audio = build_stream<float>(Modality::Audio, cfg, 3);
  std::vector<Checkpoint<float>> fusion_epochs;
  auto r = two_stage_finetune<float>(*net, *image, *audio, data, schedule, [&](const std::string& stage, const EpochMetrics&) {
    if (stage == "fusion") fusion_epochs.push_back(Checkpoint<float>::capture(net->parameters()));
  });
  // Freeze contract holds at every epoch, not only at the end.
  ASSERT_EQ(fusion_epochs.size(), 2u);
  for (const auto& snapshot : fusion_epochs)
    for (const auto& name : changed_tensors(r.after_stage1, snapshot))
      EXPECT_TRUE(net->fusion_head_parameters().count(name)) << name;
  EXPECT_EQ(r.trainable, net->fusion_head_parameters());
  const auto changed = changed_tensors(r.after_stage1, r.final_state);
  EXPECT_EQ(std::set<std::string>(changed.begin(), changed.end()), net->fusion_head_parameters());
  // Stage-1 weights arrived intact.
  for (const auto& [name, tensor] : r.after_stage1.tensors)
    if (image->parameters().contains(name)) EXPECT_EQ(tensor, image->parameters().get(name).value) << name;
  EXPECT_TRUE(r.fusion_stage.has_value());
  for (const auto& p : net->parameters()) EXPECT_FALSE(p.frozen()) << p.name;
}

TEST_F(TwoStage, ParameterlessHeadTrainsOnlyFc8) {
  auto net = build_net3<float>(cfg, FusionStrategy::LateSum, 1);
  auto image = build_stream<float>(Modality::Image, cfg, 2);
  auto audio = build_stream<float>(Modality::Audio, cfg, 3);
  auto r = two_stage_finetune<float>(*net, *image, *audio, data, schedule);
  std::set<std::string> expected = names_with_layer(net->image_stream_parameters(), "fc8");
  expected.merge(names_with_layer(net->audio_stream_parameters(), "fc8"));
  EXPECT_EQ(r.trainable, expected);
  const auto changed = changed_tensors(r.after_stage1, r.final_state);
  EXPECT_EQ(std::set<std::string>(changed.begin(), changed.end()), expected);
}

TEST_F(TwoStage, SkippingStageTwoStillEvaluates) {
  auto net = build_score_avg<float>(cfg, 1);
  auto image = build_stream<float>(Modality::Image, cfg, 2);
  auto audio = build_stream<float>(Modality::Audio, cfg, 3);
  schedule.run_stage2 = false;
  auto r = two_stage_finetune<float>(*net, *image, *audio, data, schedule);
  EXPECT_FALSE(r.fusion_stage.has_value());
  EXPECT_EQ(r.final_state, r.after_stage1);
  EXPECT_GE(r.fused_accuracy, 0.0);
  EXPECT_LE(r.fused_accuracy, 1.0);
}

TEST_F(TwoStage, IncompatibleStreamsAreRejected) {
  auto net = build_net2<float>(cfg, 1);
  auto other = cfg;
  other.conv[4].channels = 7;
  auto image = build_stream<float>(Modality::Image, other, 2);
  auto audio = build_stream<float>(Modality::Audio, cfg, 3);
  EXPECT_THROW(two_stage_finetune<float>(*net, *image, *audio, data, schedule), Error);
  auto net1 = build_net1<float>(cfg, 1);
  EXPECT_THROW(two_stage_finetune<float>(*net1, *audio, *audio, data, schedule), ConfigError);
}

TEST(Compare, EightRowsAndDeterministic) {
  const auto data = gen_synthetic<float>({2, 2, 4, 0.2, 32, 2});
  CompareConfig cfg;
  cfg.stream = tiny_config(4);
  cfg.unimodal = quick(1);
  cfg.multimodal = quick(1, 0.001);
  const auto a = compare_strategies(data, cfg);
  ASSERT_EQ(a.rows.size(), 8u);
  std::vector<std::string> names;
  for (const auto& r : a.rows) names.push_back(r.strategy);
  EXPECT_EQ(names, experiment_labels());
  EXPECT_TRUE(a.all_succeeded());
  EXPECT_EQ(a.to_csv(), compare_strategies(data, cfg).to_csv());
  EXPECT_EQ(a.to_csv().substr(0, a.to_csv().find('\n')), "strategy,accuracy,epochs");
  EXPECT_NE(a.to_text().find("fc7-concat"), std::string::npos);
}

TEST(Compare, FailuresAreReportedPerRow) {
  auto data = gen_synthetic<float>({2, 2, 4, 0.2, 32, 2});
  CompareConfig cfg;
  cfg.stream = tiny_config(4);
  cfg.unimodal = quick(1);
  cfg.multimodal = quick(1, 1e30);
  const auto report = compare_strategies(data, cfg);
  EXPECT_FALSE(report.all_succeeded());
  EXPECT_TRUE(report.row("image").error.empty());
  EXPECT_FALSE(report.row("net2").error.empty());
  EXPECT_TRUE(std::isnan(report.row("net2").accuracy));
}
