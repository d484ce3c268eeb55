#include "fusenet/model.hpp"

#include <algorithm>
#include <sstream>

namespace fusenet {

// ---------------------------------------------------------------------------
// StreamConfig

StreamConfig StreamConfig::desk32(std::size_t classes) {
  StreamConfig c;
  c.profile = ScaleProfile::Desk32;
  c.input_hw = 32;
  c.conv = {{{16, 5, 2, 2}, {32, 3, 1, 1}, {48, 3, 1, 1}, {48, 3, 1, 1}, {32, 3, 1, 1}}};
  c.fc = {128, 128};
  c.class_count = classes;
  return c;
}

StreamConfig StreamConfig::paper227(std::size_t classes) {
  StreamConfig c;
  c.profile = ScaleProfile::Paper227;
  c.input_hw = 227;
  c.conv = {{{96, 11, 4, 0}, {256, 5, 1, 2}, {384, 3, 1, 1}, {384, 3, 1, 1}, {256, 3, 1, 1}}};
  c.fc = {4096, 4096};
  c.class_count = classes;
  return c;
}

void StreamConfig::validate() const {
  if (input_hw == 0 || in_channels == 0) throw ConfigError("stream input size and channels must be positive");
  for (std::size_t i = 0; i < conv.size(); ++i) {
    const auto& c = conv[i];
    if (c.channels == 0 || c.kernel == 0 || c.stride == 0) {
      throw ConfigError("conv" + std::to_string(i + 1) + ": channels, kernel and stride must be positive");
    }
  }
  if (fc[0] == 0 || fc[1] == 0) throw ConfigError("fc widths must be positive");
  if (class_count == 0) throw ConfigError("class_count must be positive");
  if (pool.kernel == 0 || pool.stride == 0) throw ConfigError("pool kernel and stride must be positive");
  lrn.validate();
}

std::string to_string(ScaleProfile p) { return p == ScaleProfile::Desk32 ? "desk-32" : "paper-227"; }

ScaleProfile parse_scale_profile(const std::string& s) {
  if (s == "desk-32") return ScaleProfile::Desk32;
  if (s == "paper-227") return ScaleProfile::Paper227;
  throw ConfigError("unknown scale profile '" + s + "' (expected desk-32 or paper-227)");
}

namespace {

std::string join_numbers(std::initializer_list<std::size_t> values) {
  std::string out;
  for (auto v : values) out += (out.empty() ? "" : ",") + std::to_string(v);
  return out;
}

}  // namespace

KeyValueConfig StreamConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("profile", to_string(profile));
  kv.set("input_hw", std::to_string(input_hw));
  kv.set("in_channels", std::to_string(in_channels));
  for (std::size_t i = 0; i < conv.size(); ++i) {
    const auto& c = conv[i];
    kv.set("conv" + std::to_string(i + 1), join_numbers({c.channels, c.kernel, c.stride, c.pad}));
  }
  kv.set("fc6", std::to_string(fc[0]));
  kv.set("fc7", std::to_string(fc[1]));
  kv.set("classes", std::to_string(class_count));
  kv.set("pool", join_numbers({pool.kernel, pool.stride}));
  kv.set("lrn_size", std::to_string(lrn.local_size));
  kv.set("lrn_k", format_double(lrn.k));
  kv.set("lrn_alpha", format_double(lrn.alpha));
  kv.set("lrn_beta", format_double(lrn.beta));
  return kv;
}

StreamConfig StreamConfig::from_kv(const KeyValueConfig& kv) {
  const auto profile = parse_scale_profile(kv.get_or("profile", "desk-32"));
  const auto classes = kv.get_uint("classes", 2);
  StreamConfig c = profile == ScaleProfile::Desk32 ? desk32(classes) : paper227(classes);
  c.input_hw = kv.get_uint("input_hw", c.input_hw);
  c.in_channels = kv.get_uint("in_channels", c.in_channels);
  for (std::size_t i = 0; i < c.conv.size(); ++i) {
    const std::string key = "conv" + std::to_string(i + 1);
    if (!kv.has(key)) continue;
    const auto v = kv.get_uint_list(key);
    if (v.size() != 4) throw ConfigError(key + " expects channels,kernel,stride,pad");
    c.conv[i] = {v[0], v[1], v[2], v[3]};
  }
  c.fc[0] = kv.get_uint("fc6", c.fc[0]);
  c.fc[1] = kv.get_uint("fc7", c.fc[1]);
  if (kv.has("pool")) {
    const auto v = kv.get_uint_list("pool");
    if (v.size() != 2) throw ConfigError("pool expects kernel,stride");
    c.pool = {v[0], v[1]};
  }
  c.lrn.local_size = kv.get_uint("lrn_size", c.lrn.local_size);
  c.lrn.k = kv.get_double("lrn_k", c.lrn.k);
  c.lrn.alpha = kv.get_double("lrn_alpha", c.lrn.alpha);
  c.lrn.beta = kv.get_double("lrn_beta", c.lrn.beta);
  c.validate();
  return c;
}

std::uint64_t StreamConfig::hash() const { return fnv1a(to_kv().to_text()); }

// ---------------------------------------------------------------------------
// Strategy names

std::string to_string(FusionStrategy s) {
  switch (s) {
    case FusionStrategy::EarlyConcat: return "early-concat";
    case FusionStrategy::MidConcat: return "mid-concat";
    case FusionStrategy::LateSum: return "late-sum";
    case FusionStrategy::LateMul: return "late-mul";
    case FusionStrategy::LateFc7Concat: return "late-fc7-concat";
    case FusionStrategy::LateScoreAvg: return "late-score-avg";
  }
  return {};
}

std::string strategy_label(FusionStrategy s) {
  switch (s) {
    case FusionStrategy::EarlyConcat: return "net1";
    case FusionStrategy::MidConcat: return "net2";
    case FusionStrategy::LateSum: return "net3-sum";
    case FusionStrategy::LateMul: return "net3-mul";
    case FusionStrategy::LateFc7Concat: return "fc7-concat";
    case FusionStrategy::LateScoreAvg: return "score-avg";
  }
  return {};
}

FusionStrategy parse_fusion_strategy(const std::string& s) {
  for (FusionStrategy f : kAllFusionStrategies) {
    if (s == to_string(f) || s == strategy_label(f)) return f;
  }
  throw ConfigError("unknown fusion strategy '" + s + "'");
}

std::string to_string(Modality m) { return m == Modality::Image ? "image" : "audio"; }

const std::vector<std::string>& experiment_labels() {
  static const std::vector<std::string> labels{"image",    "audio",    "net1",       "net2",
                                               "net3-sum", "net3-mul", "fc7-concat", "score-avg"};
  return labels;
}

// ---------------------------------------------------------------------------
// Shape inference

std::vector<std::string> layer_sequence(const StreamConfig&) {
  return {"conv1", "relu1", "lrn1",  "pool1", "conv2", "relu2", "lrn2",  "pool2", "conv3", "relu3",
          "conv4", "relu4", "conv5", "relu5", "pool5", "fc6",   "relu6", "fc7",   "relu7", "fc8"};
}

std::vector<LayerShape> infer_stream_shapes(const StreamConfig& cfg, std::size_t in_h, std::size_t in_w) {
  cfg.validate();
  std::vector<LayerShape> out;
  std::size_t c = cfg.in_channels, h = in_h, w = in_w;
  for (const auto& name : layer_sequence(cfg)) {
    if (name.starts_with("conv")) {
      const auto& spec = cfg.conv[static_cast<std::size_t>(name[4] - '1')];
      const auto oh = window_extent(h, spec.kernel, spec.stride, spec.pad);
      const auto ow = window_extent(w, spec.kernel, spec.stride, spec.pad);
      if (oh == 0 || ow == 0) {
        throw TopologyError(name + ": kernel " + std::to_string(spec.kernel) + " does not fit " + std::to_string(h) +
                                "x" + std::to_string(w) + " input (pad " + std::to_string(spec.pad) + ")",
                            name);
      }
      c = spec.channels;
      h = oh;
      w = ow;
      out.push_back({name, {c, h, w}});
    } else if (name.starts_with("pool")) {
      const auto oh = window_extent(h, cfg.pool.kernel, cfg.pool.stride, 0);
      const auto ow = window_extent(w, cfg.pool.kernel, cfg.pool.stride, 0);
      if (oh == 0 || ow == 0) {
        throw TopologyError(name + ": window " + std::to_string(cfg.pool.kernel) + " does not fit " +
                                std::to_string(h) + "x" + std::to_string(w) + " input",
                            name);
      }
      h = oh;
      w = ow;
      out.push_back({name, {c, h, w}});
    } else if (name == "fc6") {
      out.push_back({name, {cfg.fc[0]}});
    } else if (name == "fc7") {
      out.push_back({name, {cfg.fc[1]}});
    } else if (name == "fc8") {
      out.push_back({name, {cfg.class_count}});
    } else {
      out.push_back({name, out.back().shape});
    }
  }
  return out;
}

namespace {

std::size_t conv_trunk_parameters(const StreamConfig& cfg) {
  std::size_t total = 0, in = cfg.in_channels;
  for (const auto& c : cfg.conv) {
    total += c.channels * in * c.kernel * c.kernel + c.channels;
    in = c.channels;
  }
  return total;
}

std::size_t fc_parameters(std::size_t in, std::initializer_list<std::size_t> widths) {
  std::size_t total = 0;
  for (auto w : widths) {
    total += w * in + w;
    in = w;
  }
  return total;
}

std::size_t pool5_features(const StreamConfig& cfg, std::size_t in_h, std::size_t in_w) {
  const auto shapes = infer_stream_shapes(cfg, in_h, in_w);
  for (const auto& s : shapes) {
    if (s.layer == "pool5") return shape_size(s.shape);
  }
  return 0;
}

}  // namespace

std::size_t stream_parameter_count(const StreamConfig& cfg, std::size_t in_h, std::size_t in_w) {
  return conv_trunk_parameters(cfg) +
         fc_parameters(pool5_features(cfg, in_h, in_w), {cfg.fc[0], cfg.fc[1], cfg.class_count});
}

std::size_t network_parameter_count(FusionStrategy strategy, const StreamConfig& cfg) {
  const std::size_t hw = cfg.input_hw;
  const std::size_t trunk = conv_trunk_parameters(cfg);
  const std::size_t f = pool5_features(cfg, hw, hw);
  switch (strategy) {
    case FusionStrategy::EarlyConcat: return stream_parameter_count(cfg, hw, 2 * hw);
    case FusionStrategy::MidConcat: return 2 * trunk + fc_parameters(2 * f, {cfg.fc[0], cfg.fc[1], cfg.class_count});
    case FusionStrategy::LateSum:
    case FusionStrategy::LateMul:
    case FusionStrategy::LateScoreAvg: return 2 * stream_parameter_count(cfg, hw, hw);
    case FusionStrategy::LateFc7Concat:
      return 2 * (trunk + fc_parameters(f, {cfg.fc[0], cfg.fc[1]})) + fc_parameters(2 * cfg.fc[1], {cfg.class_count});
  }
  return 0;
}

// ---------------------------------------------------------------------------
// FcStack

template <typename T>
FcStack<T>::FcStack(std::string prefix, std::size_t in_width, std::vector<std::pair<std::string, std::size_t>> layers,
                    bool relu_last)
    : prefix_(std::move(prefix)), in_width_(in_width), layers_(std::move(layers)), relu_last_(relu_last) {
  if (layers_.empty()) throw TopologyError("fully connected stack needs at least one layer", prefix_);
}

template <typename T>
void FcStack<T>::init_parameters(ParameterStore<T>& params, std::mt19937_64& rng) const {
  std::size_t in = in_width_;
  for (const auto& [name, width] : layers_) {
    Tensor<T> w({width, in});
    init_he_uniform(w, in, rng);
    params.add(prefix_ + "." + name + ".weight", std::move(w));
    params.add(prefix_ + "." + name + ".bias", Tensor<T>({width}));
    in = width;
  }
}

template <typename T>
std::set<std::string> FcStack<T>::parameter_names() const {
  std::set<std::string> out;
  for (const auto& [name, width] : layers_) {
    out.insert(prefix_ + "." + name + ".weight");
    out.insert(prefix_ + "." + name + ".bias");
  }
  return out;
}

template <typename T>
Var FcStack<T>::forward(Graph<T>& g, Var input, const std::string& last) const {
  Var x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& name = layers_[i].first;
    x = fully_connected(g, x, g.parameter(prefix_ + "." + name + ".weight"), g.parameter(prefix_ + "." + name + ".bias"));
    const bool final_layer = i + 1 == layers_.size();
    if (!final_layer || relu_last_) x = relu(g, x);
    if (name == last) break;
  }
  return x;
}

template <typename T>
std::size_t FcStack<T>::width_of(const std::string& layer) const {
  for (const auto& [name, width] : layers_) {
    if (name == layer) return width;
  }
  throw ConfigError("no layer " + layer + " in " + prefix_);
}

template <typename T>
std::size_t FcStack<T>::parameter_count() const {
  std::size_t total = 0, in = in_width_;
  for (const auto& [name, width] : layers_) {
    total += width * in + width;
    in = width;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Stream

template <typename T>
Stream<T>::Stream(std::string prefix, StreamConfig cfg, std::size_t in_h, std::size_t in_w, StreamStage last)
    : prefix_(std::move(prefix)), cfg_(std::move(cfg)), in_h_(in_h), in_w_(in_w), last_(last) {
  pool5_width_ = pool5_features(cfg_, in_h_, in_w_);
  if (last_ == StreamStage::Fc7) {
    fc_.emplace(prefix_, pool5_width_, std::vector<std::pair<std::string, std::size_t>>{{"fc6", cfg_.fc[0]}, {"fc7", cfg_.fc[1]}},
                true);
  } else if (last_ == StreamStage::Scores) {
    fc_.emplace(prefix_, pool5_width_,
                std::vector<std::pair<std::string, std::size_t>>{
                    {"fc6", cfg_.fc[0]}, {"fc7", cfg_.fc[1]}, {"fc8", cfg_.class_count}},
                false);
  }
}

template <typename T>
void Stream<T>::init_parameters(ParameterStore<T>& params, std::mt19937_64& rng) const {
  std::size_t in = cfg_.in_channels;
  for (std::size_t i = 0; i < cfg_.conv.size(); ++i) {
    const auto& c = cfg_.conv[i];
    const std::string base = prefix_ + ".conv" + std::to_string(i + 1);
    Tensor<T> w({c.channels, in, c.kernel, c.kernel});
    init_he_uniform(w, in * c.kernel * c.kernel, rng);
    params.add(base + ".weight", std::move(w));
    params.add(base + ".bias", Tensor<T>({c.channels}));
    in = c.channels;
  }
  if (fc_) fc_->init_parameters(params, rng);
}

template <typename T>
std::set<std::string> Stream<T>::parameter_names() const {
  std::set<std::string> out;
  for (std::size_t i = 0; i < cfg_.conv.size(); ++i) {
    const std::string base = prefix_ + ".conv" + std::to_string(i + 1);
    out.insert(base + ".weight");
    out.insert(base + ".bias");
  }
  if (fc_) out.merge(fc_->parameter_names());
  return out;
}

template <typename T>
std::set<std::string> Stream<T>::layer_parameter_names(const std::string& layer) const {
  return {prefix_ + "." + layer + ".weight", prefix_ + "." + layer + ".bias"};
}

template <typename T>
Var Stream<T>::forward(Graph<T>& g, Var input, StreamStage upto) const {
  if (static_cast<int>(upto) > static_cast<int>(last_)) {
    throw TopologyError("stream " + prefix_ + " was built without the requested stage", prefix_);
  }
  Var x = input;
  for (std::size_t i = 0; i < cfg_.conv.size(); ++i) {
    const auto& c = cfg_.conv[i];
    const std::string base = prefix_ + ".conv" + std::to_string(i + 1);
    x = conv2d(g, x, g.parameter(base + ".weight"), g.parameter(base + ".bias"), {c.stride, c.pad});
    x = relu(g, x);
    if (i < 2) x = lrn(g, x, cfg_.lrn);
    if (i < 2 || i == 4) x = maxpool2d(g, x, cfg_.pool.kernel, cfg_.pool.stride);
  }
  x = flatten(g, x);
  if (upto == StreamStage::Pool5) return x;
  return fc_->forward(g, x, upto == StreamStage::Fc7 ? "fc7" : "");
}

// ---------------------------------------------------------------------------
// Model

template <typename T>
Var Model<T>::loss(Graph<T>& g, Var output, std::span<const std::size_t> labels) const {
  return outputs_probabilities() ? nll_loss(g, output, labels) : cross_entropy_loss(g, output, labels);
}

template <typename T>
Tensor<T> Model<T>::predict_proba(const Tensor<T>& image, const Tensor<T>& spectrogram) {
  Graph<T> g(&params_);
  Var out = forward(g, image, spectrogram);
  if (outputs_probabilities()) return g.value(out);
  return g.value(softmax(g, out));
}

template <typename T>
void Model<T>::check_input(const Tensor<T>& t, Modality m) const {
  const std::string name = m == Modality::Image ? "image" : "spectrogram";
  if (t.rank() != 4) throw DimensionError(name + " input must be [N,C,H,W], got " + shape_string(t.shape()), name);
  if (t.dim(1) != cfg_.in_channels || t.dim(2) != cfg_.input_hw || t.dim(3) != cfg_.input_hw) {
    throw DimensionError(name + " input " + shape_string(t.shape()) + " does not match configured [N," +
                             std::to_string(cfg_.in_channels) + "," + std::to_string(cfg_.input_hw) + "," +
                             std::to_string(cfg_.input_hw) + "]",
                         name);
  }
}

template <typename T>
UnimodalNet<T>::UnimodalNet(Modality modality, StreamConfig cfg, std::uint64_t seed)
    : Model<T>(std::move(cfg)),
      modality_(modality),
      stream_(to_string(modality), this->cfg_, this->cfg_.input_hw, this->cfg_.input_hw) {
  std::mt19937_64 rng(seed);
  stream_.init_parameters(this->params_, rng);
}

template <typename T>
Var UnimodalNet<T>::forward(Graph<T>& g, const Tensor<T>& image, const Tensor<T>& spectrogram) const {
  const Tensor<T>& input = modality_ == Modality::Image ? image : spectrogram;
  this->check_input(input, modality_);
  return stream_.forward(g, g.constant(input), StreamStage::Scores);
}

template <typename T>
MultimodalNet<T>::MultimodalNet(FusionStrategy strategy, StreamConfig cfg, std::uint64_t seed)
    : Model<T>(std::move(cfg)), strategy_(strategy) {
  const auto& c = this->cfg_;
  const std::size_t hw = c.input_hw;
  std::mt19937_64 rng(seed);
  switch (strategy_) {
    case FusionStrategy::EarlyConcat:
      image_.emplace("joint", c, hw, 2 * hw, StreamStage::Scores);
      break;
    case FusionStrategy::MidConcat:
      image_.emplace("image", c, hw, hw, StreamStage::Pool5);
      audio_.emplace("audio", c, hw, hw, StreamStage::Pool5);
      head_.emplace("fusion", image_->pool5_width() + audio_->pool5_width(),
                    std::vector<std::pair<std::string, std::size_t>>{{"fc6", c.fc[0]}, {"fc7", c.fc[1]}, {"fc8", c.class_count}},
                    false);
      break;
    case FusionStrategy::LateSum:
    case FusionStrategy::LateMul:
    case FusionStrategy::LateScoreAvg:
      image_.emplace("image", c, hw, hw, StreamStage::Scores);
      audio_.emplace("audio", c, hw, hw, StreamStage::Scores);
      break;
    case FusionStrategy::LateFc7Concat:
      image_.emplace("image", c, hw, hw, StreamStage::Fc7);
      audio_.emplace("audio", c, hw, hw, StreamStage::Fc7);
      head_.emplace("fusion", image_->fc7_width() + audio_->fc7_width(),
                    std::vector<std::pair<std::string, std::size_t>>{{"fc", c.class_count}}, false);
      break;
  }
  if (image_) {
    image_->init_parameters(this->params_, rng);
    image_names_ = image_->parameter_names();
  }
  if (audio_) {
    audio_->init_parameters(this->params_, rng);
    audio_names_ = audio_->parameter_names();
  }
  if (head_) {
    head_->init_parameters(this->params_, rng);
    head_names_ = head_->parameter_names();
  }
}

template <typename T>
Var MultimodalNet<T>::forward(Graph<T>& g, const Tensor<T>& image, const Tensor<T>& spectrogram) const {
  return forward_trace(g, image, spectrogram).output;
}

template <typename T>
FusionTrace MultimodalNet<T>::forward_trace(Graph<T>& g, const Tensor<T>& image, const Tensor<T>& spectrogram) const {
  this->check_input(image, Modality::Image);
  this->check_input(spectrogram, Modality::Audio);
  if (image.dim(0) != spectrogram.dim(0)) {
    throw DimensionError("image batch " + std::to_string(image.dim(0)) + " differs from spectrogram batch " +
                             std::to_string(spectrogram.dim(0)),
                         "N");
  }
  Var img = g.constant(image);
  Var aud = g.constant(spectrogram);
  FusionTrace trace;
  switch (strategy_) {
    case FusionStrategy::EarlyConcat:
      trace.merged = concat(g, img, aud, 3);
      trace.output = image_->forward(g, trace.merged, StreamStage::Scores);
      break;
    case FusionStrategy::MidConcat:
      trace.image_features = image_->forward(g, img, StreamStage::Pool5);
      trace.audio_features = audio_->forward(g, aud, StreamStage::Pool5);
      trace.merged = concat(g, *trace.image_features, *trace.audio_features, 1);
      trace.output = head_->forward(g, trace.merged);
      break;
    case FusionStrategy::LateSum:
    case FusionStrategy::LateMul:
      trace.image_features = image_->forward(g, img, StreamStage::Scores);
      trace.audio_features = audio_->forward(g, aud, StreamStage::Scores);
      trace.merged = strategy_ == FusionStrategy::LateSum ? add(g, *trace.image_features, *trace.audio_features)
                                                          : mul(g, *trace.image_features, *trace.audio_features);
      trace.output = trace.merged;
      break;
    case FusionStrategy::LateFc7Concat:
      trace.image_features = image_->forward(g, img, StreamStage::Fc7);
      trace.audio_features = audio_->forward(g, aud, StreamStage::Fc7);
      trace.merged = concat(g, *trace.image_features, *trace.audio_features, 1);
      trace.output = head_->forward(g, trace.merged);
      break;
    case FusionStrategy::LateScoreAvg:
      trace.image_features = image_->forward(g, img, StreamStage::Scores);
      trace.audio_features = audio_->forward(g, aud, StreamStage::Scores);
      trace.merged = add(g, softmax(g, *trace.image_features), softmax(g, *trace.audio_features));
      trace.output = scale(g, trace.merged, T{0.5});
      break;
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Builders

template <typename T>
std::unique_ptr<UnimodalNet<T>> build_stream(Modality modality, const StreamConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return std::make_unique<UnimodalNet<T>>(modality, cfg, seed);
}

template <typename T>
std::unique_ptr<MultimodalNet<T>> build_net1(const StreamConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return std::make_unique<MultimodalNet<T>>(FusionStrategy::EarlyConcat, cfg, seed);
}

template <typename T>
std::unique_ptr<MultimodalNet<T>> build_net2(const StreamConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return std::make_unique<MultimodalNet<T>>(FusionStrategy::MidConcat, cfg, seed);
}

template <typename T>
std::unique_ptr<MultimodalNet<T>> build_net3(const StreamConfig& cfg, FusionStrategy mode, std::uint64_t seed) {
  if (mode != FusionStrategy::LateSum && mode != FusionStrategy::LateMul) {
    throw ConfigError("build_net3 mode must be late-sum or late-mul");
  }
  cfg.validate();
  return std::make_unique<MultimodalNet<T>>(mode, cfg, seed);
}

template <typename T>
std::unique_ptr<MultimodalNet<T>> build_fc7_concat(const StreamConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return std::make_unique<MultimodalNet<T>>(FusionStrategy::LateFc7Concat, cfg, seed);
}

template <typename T>
std::unique_ptr<MultimodalNet<T>> build_score_avg(const StreamConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return std::make_unique<MultimodalNet<T>>(FusionStrategy::LateScoreAvg, cfg, seed);
}

template <typename T>
std::unique_ptr<Model<T>> build_model(const std::string& label, const StreamConfig& cfg, std::uint64_t seed) {
  if (label == "image") return build_stream<T>(Modality::Image, cfg, seed);
  if (label == "audio") return build_stream<T>(Modality::Audio, cfg, seed);
  cfg.validate();
  return std::make_unique<MultimodalNet<T>>(parse_fusion_strategy(label), cfg, seed);
}

#define FUSENET_INSTANTIATE_MODEL(T)                                                                        \
  template class FcStack<T>;                                                                               \
  template class Stream<T>;                                                                                \
  template class Model<T>;                                                                                 \
  template class UnimodalNet<T>;                                                                           \
  template class MultimodalNet<T>;                                                                         \
  template std::unique_ptr<UnimodalNet<T>> build_stream<T>(Modality, const StreamConfig&, std::uint64_t);  \
  template std::unique_ptr<MultimodalNet<T>> build_net1<T>(const StreamConfig&, std::uint64_t);            \
  template std::unique_ptr<MultimodalNet<T>> build_net2<T>(const StreamConfig&, std::uint64_t);            \
  template std::unique_ptr<MultimodalNet<T>> build_net3<T>(const StreamConfig&, FusionStrategy, std::uint64_t); \
  template std::unique_ptr<MultimodalNet<T>> build_fc7_concat<T>(const StreamConfig&, std::uint64_t);      \
  template std::unique_ptr<MultimodalNet<T>> build_score_avg<T>(const StreamConfig&, std::uint64_t);       \
  template std::unique_ptr<Model<T>> build_model<T>(const std::string&, const StreamConfig&, std::uint64_t);

FUSENET_INSTANTIATE_MODEL(float)
FUSENET_INSTANTIATE_MODEL(double)

#undef FUSENET_INSTANTIATE_MODEL

}  // namespace fusenet
