#include <gtest/gtest.h>

#include <random>

#include "fusenet/model.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace fusenet;
using fusenet::testing::random_tensor;
using fusenet::testing::tiny_config;

namespace {

// Standalone copies of a fusion net's streams, built in their own parameter stores.
std::unique_ptr<UnimodalNet<double>> detached_stream(const MultimodalNet<double>& net, Modality m) {
  auto standalone = build_stream<double>(m, net.config(), 999);
  transplant(net.parameters(), standalone->parameters(), {});
  return standalone;
}

Tensor<double> run_stream(UnimodalNet<double>& net, const Tensor<double>& x, StreamStage stage) {
  Graph<double> g(&net.parameters());
  return g.value(net.stream().forward(g, g.constant(x), stage));
}

template <typename Net>
Tensor<double> run(Net& net, const Tensor<double>& img, const Tensor<double>& aud) {
  Graph<double> g(&net.parameters());
  return g.value(net.forward(g, img, aud));
}

class Fusion : public ::testing::Test {
 protected:
  std::mt19937_64 rng{77};
  StreamConfig cfg = StreamConfig::desk32(5);
  Tensor<double> img = random_tensor<double>({3, 3, 32, 32}, rng, 0, 1);
  Tensor<double> aud = random_tensor<double>({3, 3, 32, 32}, rng, 0, 1);
};

}  // namespace

TEST(StreamBuilder, DeskForwardShape) {
  auto net = build_stream<float>(Modality::Image, StreamConfig::desk32(7), 1);
  Tensor<float> x({1, 3, 32, 32}, 0.5f);
  Graph<float> g(&net->parameters());
  EXPECT_EQ(g.value(net->forward(g, x, x)).shape(), (Shape{1, 7}));
}

TEST(StreamBuilder, PaperProfileAccepts227) {
  const auto cfg = StreamConfig::paper227(194);
  std::vector<LayerShape> shapes;
  ASSERT_NO_THROW(shapes = infer_stream_shapes(cfg, 227, 227));
  EXPECT_EQ(shapes[0].shape, (Shape{96, 55, 55}));
  EXPECT_EQ(shapes[14].layer, "pool5");
  EXPECT_EQ(shapes[14].shape, (Shape{256, 6, 6}));
  EXPECT_EQ(shapes.back().shape, (Shape{194}));
}

TEST(StreamBuilder, ParameterCountClosedForm) {
  // conv: 16*3*25+16, 32*16*9+32, 48*32*9+48, 48*48*9+48, 32*48*9+32
  // fc:   32*128+128, 128*128+128, 128*4+4   (pool5 is 32x1x1)
  const std::size_t expected = 1216 + 4640 + 13872 + 20784 + 13856 + 4224 + 16512 + 516;
  const auto cfg = StreamConfig::desk32(4);
  EXPECT_EQ(stream_parameter_count(cfg, 32, 32), expected);
  EXPECT_EQ(build_stream<float>(Modality::Audio, cfg, 3)->parameters().scalar_count(), expected);
}

TEST(StreamBuilder, CollapseNamesLayer) {
  auto cfg = StreamConfig::desk32(2);
  cfg.input_hw = 16;
  try {
    infer_stream_shapes(cfg, 16, 16);
    FAIL() << "expected TopologyError";
  } catch (const TopologyError& e) {
    EXPECT_EQ(e.layer(), "pool5");
  }
  EXPECT_THROW(build_stream<float>(Modality::Image, cfg, 1), TopologyError);
}

TEST(StreamBuilder, ProfilesShareTopology) {
  std::vector<std::string> a, b;
  for (const auto& s : infer_stream_shapes(StreamConfig::desk32(4), 32, 32)) a.push_back(s.layer);
  for (const auto& s : infer_stream_shapes(StreamConfig::paper227(4), 227, 227)) b.push_back(s.layer);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, layer_sequence(StreamConfig::desk32(4)));
}

TEST(StreamBuilder, ConfigTextRoundTrip) {
  auto cfg = StreamConfig::desk32(6);
  cfg.lrn.alpha = 3e-4;
  const auto text = cfg.to_kv().to_text();
  const auto back = StreamConfig::from_kv(KeyValueConfig::parse(text));
  EXPECT_EQ(back, cfg);
  EXPECT_EQ(back.hash(), cfg.hash());
  EXPECT_THROW(StreamConfig::from_kv(KeyValueConfig::parse("conv1 = 1,2,3\n")), ConfigError);
}

TEST(StrategyNames, RoundTrip) {
  for (auto s : kAllFusionStrategies) {
    EXPECT_EQ(parse_fusion_strategy(to_string(s)), s);
    EXPECT_EQ(parse_fusion_strategy(strategy_label(s)), s);
  }
  EXPECT_EQ(to_string(FusionStrategy::LateFc7Concat), "late-fc7-concat");
  EXPECT_THROW(parse_fusion_strategy("late-max"), ConfigError);
}

TEST(Net1, MergedWidthDoubles) {
  auto net = build_net1<double>(StreamConfig::desk32(3), 1);
  Tensor<double> x({2, 3, 32, 32}, 0.1);
  Graph<double> g(&net->parameters());
  auto trace = net->forward_trace(g, x, x);
  EXPECT_EQ(g.value(trace.merged).shape(), (Shape{2, 3, 32, 64}));
  EXPECT_NO_THROW(infer_stream_shapes(StreamConfig::paper227(194), 227, 454));
}

TEST(Net1, FewerParametersThanNet3) {
  for (const auto& cfg : {StreamConfig::desk32(4), StreamConfig::paper227(194)}) {
    const auto net1 = network_parameter_count(FusionStrategy::EarlyConcat, cfg);
    const auto net3 = network_parameter_count(FusionStrategy::LateSum, cfg);
    EXPECT_LT(net1, net3);
  }
  const auto cfg = StreamConfig::desk32(4);
  auto net1 = build_net1<float>(cfg, 1);
  auto net3 = build_net3<float>(cfg, FusionStrategy::LateSum, 1);
  EXPECT_EQ(net1->parameters().scalar_count(), network_parameter_count(FusionStrategy::EarlyConcat, cfg));
  EXPECT_EQ(net3->parameters().scalar_count(), network_parameter_count(FusionStrategy::LateSum, cfg));
  // Shared single stream: close to half of the two-stream count.
  const double ratio = static_cast<double>(net1->parameters().scalar_count()) / net3->parameters().scalar_count();
  EXPECT_GT(ratio, 0.5);
  EXPECT_LT(ratio, 0.6);
  EXPECT_TRUE(net1->audio_stream_parameters().empty());
}

TEST(Net1, MismatchedModalityShapeNamesModality) {
  auto net = build_net1<float>(StreamConfig::desk32(3), 1);
  Graph<float> g(&net->parameters());
  try {
    net->forward(g, Tensor<float>({1, 3, 32, 32}), Tensor<float>({1, 3, 30, 32}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_EQ(e.axis(), "spectrogram");
  }
}

TEST_F(Fusion, PartitionCoversEveryParameter) {
  for (auto s : kAllFusionStrategies) {
    MultimodalNet<float> net(s, cfg, 5);
    std::set<std::string> all;
    std::size_t total = 0;
    for (const auto* part :
         {&net.image_stream_parameters(), &net.audio_stream_parameters(), &net.fusion_head_parameters()}) {
      total += part->size();
      all.insert(part->begin(), part->end());
    }
    EXPECT_EQ(total, all.size()) << to_string(s);
    EXPECT_EQ(all.size(), net.parameters().size()) << to_string(s);
    const bool parameterless = s == FusionStrategy::LateSum || s == FusionStrategy::LateMul ||
                               s == FusionStrategy::LateScoreAvg;
    EXPECT_EQ(net.fusion_head_parameters().empty(), parameterless || s == FusionStrategy::EarlyConcat)
        << to_string(s);
    EXPECT_EQ(net.parameters().scalar_count(), network_parameter_count(s, cfg));
  }
}

TEST_F(Fusion, Net2ConcatenatesPool5) {
  auto net = build_net2<double>(cfg, 3);
  const std::size_t f = net->image_stream()->pool5_width();
  EXPECT_EQ(net->fusion_head()->in_width(), 2 * f);

  Graph<double> g1(&net->parameters());
  const auto merged = g1.value(net->forward_trace(g1, img, aud).merged);
  Graph<double> g2(&net->parameters());
  const auto zeroed = g2.value(net->forward_trace(g2, img, Tensor<double>(aud.shape())).merged);
  EXPECT_EQ(slice(merged, 1, 0, f), slice(zeroed, 1, 0, f));
  EXPECT_NE(slice(merged, 1, f, 2 * f), slice(zeroed, 1, f, 2 * f));
}

TEST_F(Fusion, Net2MatchesManualComposition) {
  auto net = build_net2<double>(cfg, 3);
  auto image_stream = detached_stream(*net, Modality::Image);
  auto audio_stream = detached_stream(*net, Modality::Audio);
  const auto a = run_stream(*image_stream, img, StreamStage::Pool5);
  const auto b = run_stream(*audio_stream, aud, StreamStage::Pool5);

  const std::size_t f = a.dim(1);
  FcStack<double> head("fusion", 2 * f, {{"fc6", cfg.fc[0]}, {"fc7", cfg.fc[1]}, {"fc8", cfg.class_count}}, false);
  ParameterStore<double> head_params;
  std::mt19937_64 unused(0);
  head.init_parameters(head_params, unused);
  transplant(net->parameters(), head_params, head.parameter_names());
  Graph<double> g(&head_params);
  const auto expected = g.value(head.forward(g, concat(g, g.constant(a), g.constant(b), 1)));
  EXPECT_LE(fusenet::testing::max_abs_diff(run(*net, img, aud), expected), 1e-6);
}

TEST_F(Fusion, Net3SumMatchesStandaloneStreams) {
  auto net = build_net3<double>(cfg, FusionStrategy::LateSum, 9);
  auto a = run_stream(*detached_stream(*net, Modality::Image), img, StreamStage::Scores);
  const auto b = run_stream(*detached_stream(*net, Modality::Audio), aud, StreamStage::Scores);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  EXPECT_LE(fusenet::testing::max_abs_diff(run(*net, img, aud), a), 1e-6);
}

TEST_F(Fusion, Net3MulMatchesStandaloneStreams) {
  auto net = build_net3<double>(cfg, FusionStrategy::LateMul, 9);
  auto a = run_stream(*detached_stream(*net, Modality::Image), img, StreamStage::Scores);
  const auto b = run_stream(*detached_stream(*net, Modality::Audio), aud, StreamStage::Scores);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] *= b[i];
  EXPECT_LE(fusenet::testing::max_abs_diff(run(*net, img, aud), a), 1e-6);
}

TEST_F(Fusion, Net3SumIgnoresZeroAudioScores) {
  auto net = build_net3<double>(cfg, FusionStrategy::LateSum, 4);
  net->parameters().get("audio.fc8.weight").value.fill(0.0);
  net->parameters().get("audio.fc8.bias").value.fill(0.0);
  const auto image_only = run_stream(*detached_stream(*net, Modality::Image), img, StreamStage::Scores);
  EXPECT_EQ(argmax_rows(run(*net, img, aud)), argmax_rows(image_only));
}

TEST_F(Fusion, Net3SumArgmaxWithConstantAudioScores) {
  auto net = build_net3<double>(cfg, FusionStrategy::LateSum, 4);
  net->parameters().get("audio.fc8.weight").value.fill(0.0);
  net->parameters().get("audio.fc8.bias").value.fill(2.75);
  const auto image_only = run_stream(*detached_stream(*net, Modality::Image), img, StreamStage::Scores);
  EXPECT_EQ(argmax_rows(run(*net, img, aud)), argmax_rows(image_only));
}

TEST_F(Fusion, Net3MulOnesIsExactIdentity) {
  auto net = build_net3<double>(cfg, FusionStrategy::LateMul, 4);
  net->parameters().get("audio.fc8.weight").value.fill(0.0);
  net->parameters().get("audio.fc8.bias").value.fill(1.0);
  const auto image_only = run_stream(*detached_stream(*net, Modality::Image), img, StreamStage::Scores);
  EXPECT_EQ(run(*net, img, aud), image_only);
}

TEST_F(Fusion, Fc7ConcatHead) {
  auto net = build_fc7_concat<double>(cfg, 2);
  EXPECT_EQ(net->fusion_head()->in_width(), 2 * cfg.fc[1]);
  EXPECT_THROW(net->parameters().get("image.fc8.weight"), ConfigError);

  auto image_stream = detached_stream(*net, Modality::Image);
  auto audio_stream = detached_stream(*net, Modality::Audio);
  const auto a = run_stream(*image_stream, img, StreamStage::Fc7);
  const auto b = run_stream(*audio_stream, aud, StreamStage::Fc7);
  const auto& w = net->parameters().get("fusion.fc.weight").value;
  const auto& bias = net->parameters().get("fusion.fc.bias").value;
  Tensor<double> expected({img.dim(0), cfg.class_count});
  const std::size_t h = cfg.fc[1];
  for (std::size_t n = 0; n < img.dim(0); ++n)
    for (std::size_t c = 0; c < cfg.class_count; ++c) {
      double acc = bias[c];
      for (std::size_t j = 0; j < h; ++j) acc += w[c * 2 * h + j] * a[n * h + j] + w[c * 2 * h + h + j] * b[n * h + j];
      expected[n * cfg.class_count + c] = acc;
    }
  EXPECT_LE(fusenet::testing::max_abs_diff(run(*net, img, aud), expected), 1e-6);

  net->parameters().get("fusion.fc.weight").value.fill(0.0);
  Tensor<double> b_vec({cfg.class_count}, {0.5, -1, 2, 0, 3});
  net->parameters().get("fusion.fc.bias").value = b_vec;
  const auto constant = run(*net, img, aud);
  for (std::size_t n = 0; n < img.dim(0); ++n) EXPECT_EQ(slice(constant, 0, n, n + 1).reshaped({5}), b_vec);
}

TEST_F(Fusion, ScoreAverage) {
  auto net = build_score_avg<double>(cfg, 8);
  EXPECT_TRUE(net->outputs_probabilities());
  const auto fused = run(*net, img, aud);
  for (std::size_t n = 0; n < fused.dim(0); ++n) {
    double total = 0;
    for (std::size_t c = 0; c < fused.dim(1); ++c) total += fused[n * fused.dim(1) + c];
    EXPECT_NEAR(total, 1.0, 1e-6);
  }

  // Identical streams: the average equals either stream's distribution.
  for (const auto& name : net->image_stream_parameters()) {
    net->parameters().get("audio" + name.substr(5)).value = net->parameters().get(name).value;
  }
  auto image_stream = detached_stream(*net, Modality::Image);
  const auto same = run(*net, img, img);
  EXPECT_LE(fusenet::testing::max_abs_diff(same, image_stream->predict_proba(img, img)), 1e-12);

  // Uniform audio stream: argmax follows the image stream.
  net->parameters().get("audio.fc8.weight").value.fill(0.0);
  net->parameters().get("audio.fc8.bias").value.fill(0.0);
  EXPECT_EQ(argmax_rows(run(*net, img, aud)), argmax_rows(image_stream->predict_proba(img, aud)));
}

TEST_F(Fusion, ForwardIsDeterministicAndBatched) {
  for (const auto& label : experiment_labels()) {
    auto net = build_model<float>(label, cfg, 12);
    Tensor<float> x = img.cast<float>().reshaped(img.shape());
    Tensor<float> y = aud.cast<float>();
    Tensor<float> pair_x = slice(x, 0, 0, 2), pair_y = slice(y, 0, 0, 2);
    Graph<float> g1(&net->parameters()), g2(&net->parameters());
    const auto a = g1.value(net->forward(g1, pair_x, pair_y));
    const auto b = g2.value(net->forward(g2, pair_x, pair_y));
    EXPECT_EQ(a.shape(), (Shape{2, 5})) << label;
    EXPECT_EQ(a, b) << label;
  }
}

TEST(NetworkGradient, FiniteDifferencesOnEveryStrategy) {
  std::mt19937_64 rng(314);
  const auto cfg = tiny_config(3);
  auto img = random_tensor<double>({2, 3, 32, 32}, rng, 0, 1);
  auto aud = random_tensor<double>({2, 3, 32, 32}, rng, 0, 1);
  const std::vector<std::size_t> labels{0, 2};
  for (const auto& label : experiment_labels()) {
    auto net = build_model<double>(label, cfg, 21);
    const auto r = fusenet::testing::check_model_gradient(*net, img, aud, labels, rng, 25);
    EXPECT_LE(r.max_relative_error, 1e-3) << label;
  }
}
