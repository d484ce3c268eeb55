#include "fusenet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

namespace fusenet {

namespace {

std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

template <typename T>
std::vector<std::size_t> indices_of(const PairedDataset<T>& data, Split split) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < data.samples.size(); ++i)
    if (data.samples[i].split == split) out.push_back(i);
  return out;
}

bool is_unimodal(const std::string& label) { return label == "image" || label == "audio"; }

}  // namespace

// ---------------------------------------------------------------------------------------------
// TrainConfig

TrainConfig TrainConfig::unimodal() { return TrainConfig{}; }

TrainConfig TrainConfig::multimodal() {
  TrainConfig cfg;
  cfg.lr = 0.0001;
  cfg.batch_size = 1;
  return cfg;
}

void TrainConfig::validate() const {
  if (!(lr >= 0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and >= 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0) || !std::isfinite(weight_decay)) throw ConfigError("weight_decay must be finite and >= 0");
}

KeyValueConfig TrainConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("lr", format_double(lr));
  kv.set("batch", std::to_string(batch_size));
  kv.set("epochs", std::to_string(epochs));
  kv.set("seed", std::to_string(seed));
  kv.set("precision", precision == Precision::F64 ? "64" : "32");
  kv.set("shuffle", shuffle ? "true" : "false");
  kv.set("momentum", format_double(momentum));
  kv.set("weight_decay", format_double(weight_decay));
  return kv;
}

TrainConfig TrainConfig::from_kv(const KeyValueConfig& kv, TrainConfig base) {
  base.lr = kv.get_double("lr", base.lr);
  base.batch_size = kv.get_uint("batch", base.batch_size);
  base.epochs = kv.get_uint("epochs", base.epochs);
  base.seed = kv.get_uint("seed", base.seed);
  if (auto p = kv.get("precision")) {
    if (*p == "32") base.precision = Precision::F32;
    else if (*p == "64") base.precision = Precision::F64;
    else throw ConfigError("precision must be 32 or 64, got '" + *p + "'");
  }
  base.shuffle = kv.get_bool("shuffle", base.shuffle);
  base.momentum = kv.get_double("momentum", base.momentum);
  base.weight_decay = kv.get_double("weight_decay", base.weight_decay);
  base.validate();
  return base;
}

std::string metrics_csv(const std::vector<EpochMetrics>& rows) {
  std::string out = "epoch,loss,test_accuracy\n";
  for (const auto& r : rows) out += std::to_string(r.epoch) + "," + format_double(r.loss) + "," + fixed(r.test_accuracy, 6) + "\n";
  return out;
}

// ---------------------------------------------------------------------------------------------
// Training and evaluation

template <typename T>
Evaluation evaluate(Model<T>& model, const PairedDataset<T>& data, std::size_t batch_size) {
  if (data.empty()) throw EmptyResultError("cannot evaluate on an empty dataset");
  if (batch_size == 0) throw ConfigError("evaluation batch size must be >= 1");
  Evaluation eval;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
    idx.resize(std::min(batch_size, data.size() - begin));
    std::iota(idx.begin(), idx.end(), begin);
    const auto batch = data.batch(idx);
    Graph<T> g(&model.parameters());
    const Tensor<T> out = g.value(model.forward(g, batch.image, batch.spectrogram));
    const auto predicted = argmax_rows(out);
    const std::size_t classes = out.dim(1);
    for (std::size_t n = 0; n < idx.size(); ++n) {
      const auto& s = data.samples[idx[n]];
      Prediction p;
      p.sample_id = s.image_id + "|" + s.audio_id;
      p.label = s.label;
      p.predicted = predicted[n];
      for (std::size_t c = 0; c < classes; ++c) p.scores.push_back(static_cast<double>(out[n * classes + c]));
      correct += p.predicted == p.label;
      eval.predictions.push_back(std::move(p));
    }
  }
  eval.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return eval;
}

std::string predictions_csv(const Evaluation& eval) {
  std::string out = "sample,label,predicted";
  const std::size_t classes = eval.predictions.empty() ? 0 : eval.predictions[0].scores.size();
  for (std::size_t c = 0; c < classes; ++c) out += ",score_" + std::to_string(c);
  out += "\n";
  for (const auto& p : eval.predictions) {
    out += p.sample_id + "," + std::to_string(p.label) + "," + std::to_string(p.predicted);
    for (double s : p.scores) out += "," + format_double(s);
    out += "\n";
  }
  return out;
}

template <typename T>
TrainResult<T> train(Model<T>& model, const PairedDataset<T>& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  data.validate();
  if (data.class_count() != model.class_count())
    throw DimensionError("dataset has " + std::to_string(data.class_count()) + " classes but the model predicts " +
                             std::to_string(model.class_count()),
                         "classes");
  std::vector<std::size_t> order = indices_of(data, Split::Train);
  if (order.empty()) throw EmptyResultError("dataset has no training samples");
  const PairedDataset<T> test = data.subset(Split::Test);

  std::mt19937_64 rng(cfg.seed);
  const SgdOptions sgd{cfg.lr, cfg.momentum, cfg.weight_decay};
  auto& params = model.parameters();
  params.zero_grad();

  TrainResult<T> result;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      const auto batch = data.batch(idx);
      Graph<T> g(&params);
      double loss_value;
      try {
        const Var loss = model.loss(g, model.forward(g, batch.image, batch.spectrogram), batch.labels);
        loss_value = static_cast<double>(g.value(loss)[0]);
        g.backward(loss);
      } catch (const NumericError& e) {
        throw NumericError(model.label() + ": non-finite value in epoch " + std::to_string(epoch) + ", batch starting at " +
                           std::to_string(begin) + " (lr " + format_double(cfg.lr) + "): " + e.what());
      }
      sgd_step(params, sgd);
      for (const auto& p : params)
        if (!p.value.all_finite())
          throw NumericError(model.label() + ": parameter " + p.name + " became non-finite in epoch " +
                             std::to_string(epoch) + " (lr " + format_double(cfg.lr) + ")");
      loss_sum += loss_value * static_cast<double>(idx.size());
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.loss = loss_sum / static_cast<double>(order.size());
    try {
      m.test_accuracy = test.empty() ? std::numeric_limits<double>::quiet_NaN() : evaluate(model, test).accuracy;
    } catch (const NumericError& e) {
      throw NumericError(model.label() + ": non-finite value evaluating epoch " + std::to_string(epoch) + " (lr " +
                         format_double(cfg.lr) + "): " + e.what());
    }
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  result.checkpoint = Checkpoint<T>::capture(params, model.config().hash(), static_cast<std::uint32_t>(cfg.epochs));
  return result;
}

// ---------------------------------------------------------------------------------------------
// Two-stage fine-tuning

template <typename T>
std::set<std::string> stage2_trainable(const MultimodalNet<T>& net) {
  if (!net.fusion_head_parameters().empty()) return net.fusion_head_parameters();
  if (!net.image_stream() || !net.audio_stream())
    throw ConfigError("strategy " + net.label() + " has no separate streams to fine-tune");
  std::set<std::string> out = net.image_stream()->layer_parameter_names("fc8");
  out.merge(net.audio_stream()->layer_parameter_names("fc8"));
  return out;
}

template <typename T>
std::vector<std::string> changed_tensors(const Checkpoint<T>& before, const Checkpoint<T>& after) {
  std::map<std::string, std::uint64_t> a;
  for (const auto& [name, h] : before.hashes()) a[name] = h;
  std::vector<std::string> out;
  for (const auto& [name, h] : after.hashes()) {
    const auto it = a.find(name);
    if (it == a.end() || it->second != h) out.push_back(name);
  }
  return out;
}

template <typename T>
TwoStageResult<T> two_stage_finetune(MultimodalNet<T>& net, UnimodalNet<T>& image_net, UnimodalNet<T>& audio_net,
                                     const PairedDataset<T>& data, const StageSchedule& schedule,
                                     const std::function<void(const std::string&, const EpochMetrics&)>& on_epoch) {
  if (net.strategy() == FusionStrategy::EarlyConcat)
    throw ConfigError("two-stage fine-tuning needs separate streams; " + net.label() + " has one joint stream");
  if (image_net.modality() != Modality::Image || audio_net.modality() != Modality::Audio)
    throw ConfigError("two-stage fine-tuning expects an image stream and an audio stream");
  const PairedDataset<T> test = data.subset(Split::Test);
  auto report = [&](const std::string& stage) {
    return [&, stage](const EpochMetrics& m) {
      if (on_epoch) on_epoch(stage, m);
    };
  };

  TwoStageResult<T> result;
  result.image_stage = train<T>(image_net, data, schedule.image_stage, report("image"));
  result.audio_stage = train<T>(audio_net, data, schedule.audio_stage, report("audio"));
  if (!test.empty()) {
    result.image_accuracy = evaluate(image_net, test).accuracy;
    result.audio_accuracy = evaluate(audio_net, test).accuracy;
  }

  transplant(image_net.parameters(), net.parameters(), net.image_stream_parameters());
  transplant(audio_net.parameters(), net.parameters(), net.audio_stream_parameters());
  result.after_stage1 = Checkpoint<T>::capture(net.parameters(), net.config().hash(), 0);

  if (schedule.run_stage2) {
    result.trainable = stage2_trainable(net);
    auto& params = net.parameters();
    params.set_all_lr_mult(T{0});
    params.set_lr_mult(result.trainable, T{1});
    try {
      result.fusion_stage = train<T>(net, data, schedule.fusion_stage, report("fusion"));
    } catch (...) {
      params.set_all_lr_mult(T{1});
      throw;
    }
    params.set_all_lr_mult(T{1});
  }
  result.final_state = Checkpoint<T>::capture(net.parameters(), net.config().hash(),
                                              schedule.run_stage2 ? static_cast<std::uint32_t>(schedule.fusion_stage.epochs) : 0);
  if (!test.empty()) result.fused_accuracy = evaluate(net, test).accuracy;
  return result;
}

// ---------------------------------------------------------------------------------------------
// Strategy comparison

bool CompareReport::all_succeeded() const {
  return std::all_of(rows.begin(), rows.end(), [](const StrategyRow& r) { return r.error.empty(); });
}

const StrategyRow& CompareReport::row(const std::string& strategy) const {
  for (const auto& r : rows)
    if (r.strategy == strategy) return r;
  throw ConfigError("report has no row for " + strategy);
}

std::string CompareReport::to_csv() const {
  std::string out = "strategy,accuracy,epochs\n";
  for (const auto& r : rows) out += r.strategy + "," + fixed(r.accuracy, 6) + "," + std::to_string(r.epochs) + "\n";
  return out;
}

std::string CompareReport::to_text() const {
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %10s %8s %10s\n", "strategy", "accuracy", "epochs", "wall_s");
  std::string out = line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-12s %10s %8zu %10.2f%s\n", r.strategy.c_str(), fixed(r.accuracy, 4).c_str(),
                  r.epochs, r.wall_seconds, r.error.empty() ? "" : ("  FAILED: " + r.error).c_str());
    out += line;
  }
  return out;
}

template <typename T>
CompareReport compare_strategies(const PairedDataset<T>& data, const CompareConfig& cfg,
                                 const std::function<void(const StrategyRow&)>& on_row) {
  if (data.subset(Split::Test).empty()) throw EmptyResultError("comparison needs a test split");
  const PairedDataset<T> test = data.subset(Split::Test);
  CompareReport report;
  for (const auto& label : experiment_labels()) {
    StrategyRow row;
    row.strategy = label;
    const TrainConfig& tc = is_unimodal(label) ? cfg.unimodal : cfg.multimodal;
    const auto start = std::chrono::steady_clock::now();
    try {
      auto model = build_model<T>(label, cfg.stream, cfg.seed);
      auto result = train<T>(*model, data, tc);
      row.curve = std::move(result.metrics);
      row.epochs = row.curve.size();
      row.accuracy = evaluate(*model, test).accuracy;
    } catch (const Error& e) {
      row.accuracy = std::numeric_limits<double>::quiet_NaN();
      row.error = e.what();
    }
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (on_row) on_row(row);
    report.rows.push_back(std::move(row));
  }
  return report;
}

#define FUSENET_INSTANTIATE(T)                                                                                 \
  template TrainResult<T> train(Model<T>&, const PairedDataset<T>&, const TrainConfig&, const EpochCallback&);  \
  template Evaluation evaluate(Model<T>&, const PairedDataset<T>&, std::size_t);                                \
  template std::set<std::string> stage2_trainable(const MultimodalNet<T>&);                                    \
  template std::vector<std::string> changed_tensors(const Checkpoint<T>&, const Checkpoint<T>&);               \
  template TwoStageResult<T> two_stage_finetune(MultimodalNet<T>&, UnimodalNet<T>&, UnimodalNet<T>&,            \
                                                const PairedDataset<T>&, const StageSchedule&,                  \
                                                const std::function<void(const std::string&, const EpochMetrics&)>&); \
  template CompareReport compare_strategies(const PairedDataset<T>&, const CompareConfig&,                     \
                                            const std::function<void(const StrategyRow&)>&);

FUSENET_INSTANTIATE(float)
FUSENET_INSTANTIATE(double)

}  // namespace fusenet
