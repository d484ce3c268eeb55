// fusenet command line: audio preprocessing, dataset assembly, training, evaluation,
// strategy comparison and visualization export.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#include "fusenet/audio.hpp"
#include "fusenet/checkpoint.hpp"
#include "fusenet/dataset.hpp"
#include "fusenet/image_io.hpp"
#include "fusenet/kv_config.hpp"
#include "fusenet/model.hpp"
#include "fusenet/training.hpp"
#include "fusenet/visualize.hpp"

namespace fs = std::filesystem;
using namespace fusenet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

/// Raised by a command that finished but must report failure (exit code 2).
struct CommandFailed : Error {
  using Error::Error;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Prints the effective settings; together with the seed they regenerate the run.
void print_resolved(const std::string& command, const KeyValueConfig& kv, std::uint64_t seed) {
  std::cout << "# fusenet " << command << " resolved configuration\n" << kv.to_text() << "# seed = " << seed << "\n";
}

Precision parse_precision(int bits) {
  if (bits == 32) return Precision::F32;
  if (bits == 64) return Precision::F64;
  throw ConfigError("precision must be 32 or 64");
}

// ---------------------------------------------------------------------------------------------
// Shared option groups

struct TrainFlags {
  double lr = 0;
  std::size_t batch = 0;
  std::size_t epochs = 30;
  double momentum = 0;
  double weight_decay = 0;
  bool shuffle = true;
  CLI::Option* lr_opt = nullptr;
  CLI::Option* batch_opt = nullptr;

  void add(CLI::App* app, const std::string& prefix, double default_lr, std::size_t default_batch, const std::string& what) {
    lr = default_lr;
    batch = default_batch;
    lr_opt = app->add_option("--" + prefix + "lr", lr, "Learning rate" + what)->capture_default_str();
    batch_opt = app->add_option("--" + prefix + "batch", batch, "Minibatch size" + what)->capture_default_str();
    app->add_option("--" + prefix + "epochs", epochs, "Epochs" + what)->capture_default_str();
    app->add_option("--" + prefix + "momentum", momentum, "SGD momentum" + what)->capture_default_str();
    app->add_option("--" + prefix + "weight-decay", weight_decay, "L2 weight decay" + what)->capture_default_str();
    app->add_option("--" + prefix + "shuffle", shuffle, "Shuffle every epoch (true|false)" + what)->capture_default_str();
  }

  TrainConfig to_config(std::uint64_t seed, Precision precision) const {
    TrainConfig cfg;
    cfg.lr = lr;
    cfg.batch_size = batch;
    cfg.epochs = epochs;
    cfg.momentum = momentum;
    cfg.weight_decay = weight_decay;
    cfg.shuffle = shuffle;
    cfg.seed = seed;
    cfg.precision = precision;
    cfg.validate();
    return cfg;
  }

  void describe(KeyValueConfig& kv, const std::string& prefix) const {
    kv.set(prefix + "lr", format_double(lr));
    kv.set(prefix + "batch", std::to_string(batch));
    kv.set(prefix + "epochs", std::to_string(epochs));
    kv.set(prefix + "momentum", format_double(momentum));
    kv.set(prefix + "weight-decay", format_double(weight_decay));
    kv.set(prefix + "shuffle", shuffle ? "true" : "false");
  }
};

struct ModelFlags {
  std::string profile = "desk-32";
  std::string stream_config;
  int precision = 32;

  void add(CLI::App* app) {
    app->add_option("--profile", profile, "Stream profile: desk-32 or paper-227")
        ->check(CLI::IsMember({"desk-32", "paper-227"}))
        ->capture_default_str();
    app->add_option("--stream-config", stream_config, "key=value stream configuration file (overrides --profile)")
        ->check(CLI::ExistingFile);
    app->add_option("--precision", precision, "Floating point width: 32 or 64")
        ->check(CLI::IsMember({32, 64}))
        ->capture_default_str();
  }

  /// Stream configuration for a dataset with `classes` classes and hw x hw inputs.
  StreamConfig resolve(std::size_t classes, std::size_t hw) const {
    StreamConfig cfg;
    if (!stream_config.empty()) {
      cfg = StreamConfig::from_kv(KeyValueConfig::load(stream_config));
    } else {
      if (parse_scale_profile(profile) == ScaleProfile::Paper227) {
        cfg = StreamConfig::paper227(classes);
      } else {
        cfg = StreamConfig::desk32(classes);
        cfg.input_hw = hw;
      }
    }
    if (cfg.class_count != classes)
      throw ConfigError("stream config has " + std::to_string(cfg.class_count) + " classes, dataset has " +
                        std::to_string(classes));
    if (cfg.input_hw != hw)
      throw ConfigError("stream config expects " + std::to_string(cfg.input_hw) + "x" + std::to_string(cfg.input_hw) +
                        " inputs, dataset has " + std::to_string(hw));
    cfg.validate();
    return cfg;
  }

  void describe(KeyValueConfig& kv) const {
    kv.set("profile", profile);
    if (!stream_config.empty()) kv.set("stream-config", stream_config);
    kv.set("precision", std::to_string(precision));
  }
};

std::size_t dataset_hw(const std::string& path) {
  const auto data = load_container<float>(path);
  if (data.empty()) throw EmptyResultError(path + " holds no samples");
  return data.samples[0].image.dim(1);
}

void print_stream(const StreamConfig& cfg) {
  std::cout << "# stream configuration (usable with --stream-config)\n" << cfg.to_kv().to_text();
}

// ---------------------------------------------------------------------------------------------
// spectrogram

struct SpectrogramCommand {
  std::string in_dir, out_dir, format = "png";
  std::uint32_t sample_rate = 22050;
  audio::StftConfig stft;

  void add(CLI::App* app) {
    app->add_option("--in", in_dir, "Directory of WAV files (class subdirectories are kept)")->required()->check(CLI::ExistingDirectory);
    app->add_option("--out", out_dir, "Output directory")->required();
    app->add_option("--sample-rate", sample_rate, "Resampling target in Hz")->capture_default_str();
    app->add_option("--window", stft.window_size, "Hann window length in samples")->capture_default_str();
    app->add_option("--overlap", stft.overlap, "Window overlap fraction")->capture_default_str();
    app->add_option("--band-low", stft.band_low_hz, "Lowest kept frequency in Hz")->capture_default_str();
    app->add_option("--band-high", stft.band_high_hz, "Highest kept frequency in Hz")->capture_default_str();
    app->add_option("--segment-sec", stft.segment_seconds, "Segment length in seconds")->capture_default_str();
    app->add_option("--format", format, "Image format: png or ppm")->check(CLI::IsMember({"png", "ppm"}))->capture_default_str();
  }

  int run(std::uint64_t seed) {
    stft.validate();
    KeyValueConfig kv;
    kv.set("in", in_dir);
    kv.set("out", out_dir);
    kv.set("sample-rate", std::to_string(sample_rate));
    kv.set("window", std::to_string(stft.window_size));
    kv.set("overlap", format_double(stft.overlap));
    kv.set("band-low", format_double(stft.band_low_hz));
    kv.set("band-high", format_double(stft.band_high_hz));
    kv.set("segment-sec", format_double(stft.segment_seconds));
    kv.set("format", format);
    print_resolved("spectrogram", kv, seed);

    std::vector<fs::path> inputs;
    for (const auto& e : fs::recursive_directory_iterator(in_dir)) {
      if (!e.is_regular_file()) continue;
      auto ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (ext == ".wav") inputs.push_back(e.path());
    }
    std::sort(inputs.begin(), inputs.end());
    if (inputs.empty()) throw EmptyResultError("no .wav files under " + in_dir);

    std::string index = "spectrogram_path,class,source,segment\n";
    std::size_t ok = 0, images = 0;
    for (const auto& path : inputs) {
      const fs::path rel = fs::relative(path, in_dir);
      const std::string class_name = rel.has_parent_path() ? rel.begin()->string() : "";
      try {
        const auto rendered = audio::spectrogram_pipeline(audio::read_wav(path.string()), sample_rate, stft);
        for (std::size_t i = 0; i < rendered.size(); ++i) {
          char suffix[32];
          std::snprintf(suffix, sizeof suffix, "_%03zu.%s", i, format.c_str());
          const fs::path out_rel = rel.parent_path() / (rel.stem().string() + suffix);
          const fs::path out_path = fs::path(out_dir) / out_rel;
          fs::create_directories(out_path.parent_path());
          write_image(out_path.string(), Image{rendered[i].width, rendered[i].height, rendered[i].pixels});
          index += out_rel.generic_string() + "," + class_name + "," + rel.generic_string() + "," + std::to_string(i) + "\n";
        }
        ++ok;
        images += rendered.size();
        std::cout << rel.generic_string() << ": " << rendered.size() << " segment(s)\n";
      } catch (const EmptyResultError& e) {
        std::cout << rel.generic_string() << ": skipped (" << e.what() << ")\n";
      } catch (const Error& e) {
        std::cerr << rel.generic_string() << ": failed (" << e.what() << ")\n";
      }
    }
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "spectrograms.csv", index);
    std::cout << ok << " of " << inputs.size() << " file(s) rendered, " << images << " image(s)\n";
    if (ok == 0) throw CommandFailed("no input file produced a spectrogram");
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------------------------
// dataset-build / dataset-synth

struct DatasetBuildCommand {
  std::string images, spectrograms, out, manifest;
  std::size_t hw = 32;
  int precision = 32;

  void add(CLI::App* app) {
    app->add_option("--images", images, "Image root with one subdirectory per class")->required()->check(CLI::ExistingDirectory);
    app->add_option("--spectrograms", spectrograms, "Spectrogram root with one subdirectory per class")
        ->required()
        ->check(CLI::ExistingDirectory);
    app->add_option("--out", out, "Output FZDS container")->required();
    app->add_option("--manifest", manifest, "Output manifest CSV (default: container path with .csv)");
    app->add_option("--hw", hw, "Side length images are resized to")->capture_default_str();
    app->add_option("--precision", precision, "Payload width: 32 or 64")->check(CLI::IsMember({32, 64}))->capture_default_str();
  }

  int run(std::uint64_t seed) {
    if (manifest.empty()) manifest = fs::path(out).replace_extension(".csv").string();
    KeyValueConfig kv;
    kv.set("images", images);
    kv.set("spectrograms", spectrograms);
    kv.set("out", out);
    kv.set("manifest", manifest);
    kv.set("hw", std::to_string(hw));
    kv.set("precision", std::to_string(precision));
    print_resolved("dataset-build", kv, seed);

    const std::vector<std::string> exts{".png", ".ppm"};
    auto paired = pair_modalities(index_directory(images, exts), index_directory(spectrograms, exts), seed);
    for (const auto& c : paired.image_only) std::cout << "dropped class '" << c << "': no spectrograms\n";
    for (const auto& c : paired.audio_only) std::cout << "dropped class '" << c << "': no images\n";
    std::vector<std::string> warnings;
    const auto split = split_halves(paired.manifest, seed, &warnings);
    for (const auto& w : warnings) std::cout << "warning: " << w << "\n";
    split.save(manifest);

    if (parse_precision(precision) == Precision::F64) {
      save_container(load_manifest_samples<double>(split, "", hw), out);
    } else {
      save_container(load_manifest_samples<float>(split, "", hw), out);
    }
    std::cout << split.rows.size() << " pair(s) in " << split.classes.size() << " class(es) -> " << out << "\n";
    return kExitOk;
  }
};

struct DatasetSynthCommand {
  std::string out;
  SyntheticSpec spec;
  int precision = 32;

  void add(CLI::App* app) {
    spec.noise_sigma = 0.2;
    app->add_option("--out", out, "Output FZDS container")->required();
    app->add_option("--image-factors", spec.image_factors, "Number of image factor levels (A)")->capture_default_str();
    app->add_option("--audio-factors", spec.audio_factors, "Number of audio factor levels (B)")->capture_default_str();
    app->add_option("--samples-per-class", spec.samples_per_class, "Samples per class, split in halves")->capture_default_str();
    app->add_option("--noise", spec.noise_sigma, "Gaussian noise sigma")->capture_default_str();
    app->add_option("--hw", spec.hw, "Side length")->capture_default_str();
    app->add_option("--precision", precision, "Payload width: 32 or 64")->check(CLI::IsMember({32, 64}))->capture_default_str();
  }

  int run(std::uint64_t seed) {
    spec.seed = seed;
    KeyValueConfig kv;
    kv.set("out", out);
    kv.set("image-factors", std::to_string(spec.image_factors));
    kv.set("audio-factors", std::to_string(spec.audio_factors));
    kv.set("samples-per-class", std::to_string(spec.samples_per_class));
    kv.set("noise", format_double(spec.noise_sigma));
    kv.set("hw", std::to_string(spec.hw));
    kv.set("precision", std::to_string(precision));
    print_resolved("dataset-synth", kv, seed);
    if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
    if (parse_precision(precision) == Precision::F64) {
      save_container(gen_synthetic<double>(spec), out);
    } else {
      save_container(gen_synthetic<float>(spec), out);
    }
    std::cout << spec.class_count() * spec.samples_per_class << " sample(s) in " << spec.class_count() << " class(es) -> "
              << out << "\n";
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------------------------
// train / eval

bool is_unimodal(const std::string& label) { return label == "image" || label == "audio"; }

struct TrainCommand {
  std::string data, strategy, out;
  ModelFlags model;
  TrainFlags flags;

  void add(CLI::App* app) {
    app->add_option("--data", data, "FZDS container")->required()->check(CLI::ExistingFile);
    app->add_option("--strategy", strategy, "image, audio, net1, net2, net3-sum, net3-mul, fc7-concat or score-avg")->required();
    app->add_option("--out", out, "Output directory")->required();
    model.add(app);
    flags.add(app, "", 0, 0, " (default: 0.001/32 unimodal, 0.0001/1 multimodal)");
  }

  template <typename T>
  int run_as(std::uint64_t seed) {
    const auto dataset = load_container<T>(data);
    if (dataset.empty()) throw EmptyResultError(data + " holds no samples");
    const auto cfg = model.resolve(dataset.class_count(), dataset.samples[0].image.dim(1));
    auto net = build_model<T>(strategy, cfg, seed);
    const auto tc = flags.to_config(seed, parse_precision(model.precision));

    std::cout << "# " << net->label() << ": " << net->parameters().scalar_count() << " parameters\n";
    auto result = train<T>(*net, dataset, tc, [](const EpochMetrics& m) {
      std::printf("epoch %3zu  loss %.6f  test_accuracy %.4f\n", m.epoch, m.loss, m.test_accuracy);
      std::fflush(stdout);
    });
    fs::create_directories(out);
    save_checkpoint(result.checkpoint, (fs::path(out) / "checkpoint.fznt").string());
    write_text(fs::path(out) / "metrics.csv", metrics_csv(result.metrics));
    write_text(fs::path(out) / "stream.conf", cfg.to_kv().to_text());
    return kExitOk;
  }

  int run(std::uint64_t seed) {
    parse_fusion_or_modality();
    if (flags.lr_opt->count() == 0) flags.lr = is_unimodal(strategy) ? TrainConfig::unimodal().lr : TrainConfig::multimodal().lr;
    if (flags.batch_opt->count() == 0)
      flags.batch = is_unimodal(strategy) ? TrainConfig::unimodal().batch_size : TrainConfig::multimodal().batch_size;
    KeyValueConfig kv;
    kv.set("data", data);
    kv.set("strategy", strategy);
    kv.set("out", out);
    model.describe(kv);
    flags.describe(kv, "");
    print_resolved("train", kv, seed);
    print_stream(model.resolve(load_container<float>(data).class_count(), dataset_hw(data)));
    return model.precision == 64 ? run_as<double>(seed) : run_as<float>(seed);
  }

  void parse_fusion_or_modality() const {
    const auto& labels = experiment_labels();
    if (std::find(labels.begin(), labels.end(), strategy) == labels.end())
      throw CLI::ValidationError("--strategy", "unknown strategy '" + strategy + "'");
  }
};

struct EvalCommand {
  std::string data, checkpoint, strategy, split = "test", predictions;
  ModelFlags model;

  void add(CLI::App* app) {
    app->add_option("--data", data, "FZDS container")->required()->check(CLI::ExistingFile);
    app->add_option("--checkpoint", checkpoint, "FZNT checkpoint")->required()->check(CLI::ExistingFile);
    app->add_option("--strategy", strategy, "Strategy the checkpoint was trained with")->required();
    app->add_option("--split", split, "Samples to evaluate: test, train or all")
        ->check(CLI::IsMember({"test", "train", "all"}))
        ->capture_default_str();
    app->add_option("--predictions", predictions, "Write the per-sample prediction dump to this CSV");
    model.add(app);
  }

  template <typename T>
  int run_as(std::uint64_t seed) {
    auto dataset = load_container<T>(data);
    if (split != "all") dataset = dataset.subset(parse_split(split));
    if (dataset.empty()) throw EmptyResultError("no samples in split '" + split + "'");
    const auto cfg = model.resolve(dataset.class_count(), dataset.samples[0].image.dim(1));
    auto net = build_model<T>(strategy, cfg, seed);
    const auto ckpt = load_checkpoint<T>(checkpoint);
    if (ckpt.config_hash != cfg.hash())
      throw ConfigError("checkpoint was trained with a different stream configuration (hash mismatch)");
    ckpt.restore(net->parameters());
    const auto eval = evaluate<T>(*net, dataset);
    std::printf("accuracy %.6f (%zu samples)\n", eval.accuracy, eval.predictions.size());
    if (!predictions.empty()) write_text(predictions, predictions_csv(eval));
    return kExitOk;
  }

  int run(std::uint64_t seed) {
    KeyValueConfig kv;
    kv.set("data", data);
    kv.set("checkpoint", checkpoint);
    kv.set("strategy", strategy);
    kv.set("split", split);
    if (!predictions.empty()) kv.set("predictions", predictions);
    model.describe(kv);
    print_resolved("eval", kv, seed);
    return model.precision == 64 ? run_as<double>(seed) : run_as<float>(seed);
  }
};

// ---------------------------------------------------------------------------------------------
// finetune2

struct FinetuneCommand {
  std::string data, strategy, out;
  ModelFlags model;
  TrainFlags stream_flags, fusion_flags;
  bool stage2 = true;
  std::size_t pretrain_epochs = 0;

  void add(CLI::App* app) {
    app->add_option("--data", data, "FZDS container")->required()->check(CLI::ExistingFile);
    app->add_option("--strategy", strategy, "net2, net3-sum, net3-mul, fc7-concat or score-avg")
        ->required()
        ->check(CLI::IsMember({"net2", "net3-sum", "net3-mul", "fc7-concat", "score-avg"}));
    app->add_option("--out", out, "Output directory")->required();
    model.add(app);
    stream_flags.add(app, "stream-", TrainConfig::unimodal().lr, TrainConfig::unimodal().batch_size, " for stage 1");
    fusion_flags.add(app, "fusion-", TrainConfig::multimodal().lr, TrainConfig::multimodal().batch_size, " for stage 2");
    app->add_option("--stage2", stage2, "Run stage 2 (true|false)")->capture_default_str();
    app->add_option("--pretrain-epochs", pretrain_epochs,
                    "Pretrain each stream trunk on a disjoint synthetic task first (0 = off)")
        ->capture_default_str();
  }

  /// Trains a fresh stream on a 3x3 synthetic task and copies its trunk (everything but fc8).
  template <typename T>
  void pretrain(UnimodalNet<T>& stream, const StreamConfig& cfg, std::uint64_t seed) {
    SyntheticSpec spec{3, 3, 40, 0.2, cfg.input_hw, seed ^ 0x9e3779b97f4a7c15ULL};
    StreamConfig task_cfg = cfg;
    task_cfg.class_count = spec.class_count();
    auto donor = build_stream<T>(stream.modality(), task_cfg, seed + 1);
    auto tc = stream_flags.to_config(seed, parse_precision(model.precision));
    tc.epochs = pretrain_epochs;
    train<T>(*donor, gen_synthetic<T>(spec), tc);
    ParameterStore<T> trunk;
    for (const auto& p : donor->parameters())
      if (p.name.find(".fc8.") == std::string::npos) trunk.add(p.name, p.value);
    transplant(trunk, stream.parameters(), {});
  }

  template <typename T>
  int run_as(std::uint64_t seed) {
    const auto dataset = load_container<T>(data);
    if (dataset.empty()) throw EmptyResultError(data + " holds no samples");
    const auto cfg = model.resolve(dataset.class_count(), dataset.samples[0].image.dim(1));
    const Precision precision = parse_precision(model.precision);

    auto net = std::unique_ptr<MultimodalNet<T>>(
        dynamic_cast<MultimodalNet<T>*>(build_model<T>(strategy, cfg, seed).release()));
    auto image = build_stream<T>(Modality::Image, cfg, seed + 1);
    auto audio = build_stream<T>(Modality::Audio, cfg, seed + 2);
    if (pretrain_epochs > 0) {
      pretrain(*image, cfg, seed);
      pretrain(*audio, cfg, seed + 3);
    }

    StageSchedule schedule;
    schedule.image_stage = stream_flags.to_config(seed, precision);
    schedule.audio_stage = stream_flags.to_config(seed, precision);
    schedule.fusion_stage = fusion_flags.to_config(seed, precision);
    schedule.run_stage2 = stage2;
    auto r = two_stage_finetune<T>(*net, *image, *audio, dataset, schedule, [](const std::string& stage, const EpochMetrics& m) {
      std::printf("%-6s epoch %3zu  loss %.6f  test_accuracy %.4f\n", stage.c_str(), m.epoch, m.loss, m.test_accuracy);
      std::fflush(stdout);
    });

    const fs::path dir(out);
    fs::create_directories(dir);
    write_text(dir / "image_stage.csv", metrics_csv(r.image_stage.metrics));
    write_text(dir / "audio_stage.csv", metrics_csv(r.audio_stage.metrics));
    if (r.fusion_stage) write_text(dir / "fusion_stage.csv", metrics_csv(r.fusion_stage->metrics));
    save_checkpoint(r.after_stage1, (dir / "stage1.fznt").string());
    save_checkpoint(r.final_state, (dir / "checkpoint.fznt").string());

    std::string hashes = "tensor,stage1_hash,final_hash,trainable,changed\n";
    const auto before = r.after_stage1.hashes(), after = r.final_state.hashes();
    std::size_t frozen_changed = 0;
    for (std::size_t i = 0; i < before.size(); ++i) {
      char line[256];
      const bool trainable = r.trainable.count(before[i].first) != 0;
      const bool changed = before[i].second != after[i].second;
      frozen_changed += changed && !trainable;
      std::snprintf(line, sizeof line, "%s,%016llx,%016llx,%d,%d\n", before[i].first.c_str(),
                    static_cast<unsigned long long>(before[i].second), static_cast<unsigned long long>(after[i].second),
                    trainable ? 1 : 0, changed ? 1 : 0);
      hashes += line;
    }
    write_text(dir / "layer_hashes.csv", hashes);

    char summary[256];
    std::snprintf(summary, sizeof summary,
                  "image_accuracy %.6f\naudio_accuracy %.6f\nfused_accuracy %.6f\nfrozen_tensors_changed %zu\n",
                  r.image_accuracy, r.audio_accuracy, r.fused_accuracy, frozen_changed);
    write_text(dir / "summary.txt", summary);
    std::cout << summary;
    if (frozen_changed != 0) throw CommandFailed("frozen parameters changed during stage 2");
    return kExitOk;
  }

  int run(std::uint64_t seed) {
    KeyValueConfig kv;
    kv.set("data", data);
    kv.set("strategy", strategy);
    kv.set("out", out);
    kv.set("stage2", stage2 ? "true" : "false");
    kv.set("pretrain-epochs", std::to_string(pretrain_epochs));
    model.describe(kv);
    stream_flags.describe(kv, "stream-");
    fusion_flags.describe(kv, "fusion-");
    print_resolved("finetune2", kv, seed);
    return model.precision == 64 ? run_as<double>(seed) : run_as<float>(seed);
  }
};

// ---------------------------------------------------------------------------------------------
// compare

struct CompareCommand {
  std::string data, out;
  ModelFlags model;
  TrainFlags uni, multi;

  void add(CLI::App* app) {
    app->add_option("--data", data, "FZDS container")->required()->check(CLI::ExistingFile);
    app->add_option("--out", out, "Output directory")->required();
    model.add(app);
    uni.add(app, "uni-", TrainConfig::unimodal().lr, TrainConfig::unimodal().batch_size, " for image/audio");
    multi.add(app, "multi-", TrainConfig::multimodal().lr, TrainConfig::multimodal().batch_size, " for fusion nets");
  }

  template <typename T>
  int run_as(std::uint64_t seed) {
    const auto dataset = load_container<T>(data);
    if (dataset.empty()) throw EmptyResultError(data + " holds no samples");
    CompareConfig cfg;
    cfg.stream = model.resolve(dataset.class_count(), dataset.samples[0].image.dim(1));
    cfg.unimodal = uni.to_config(seed, parse_precision(model.precision));
    cfg.multimodal = multi.to_config(seed, parse_precision(model.precision));
    cfg.seed = seed;
    const auto report = compare_strategies<T>(dataset, cfg, [](const StrategyRow& row) {
      std::printf("%-12s accuracy %.4f  (%.1f s)%s\n", row.strategy.c_str(), row.accuracy, row.wall_seconds,
                  row.error.empty() ? "" : ("  FAILED: " + row.error).c_str());
      std::fflush(stdout);
    });
    const fs::path dir(out);
    fs::create_directories(dir / "curves");
    write_text(dir / "compare.csv", report.to_csv());
    write_text(dir / "compare.txt", report.to_text());
    for (const auto& row : report.rows)
      if (row.error.empty()) write_text(dir / "curves" / (row.strategy + ".csv"), metrics_csv(row.curve));
    std::cout << report.to_text();
    if (!report.all_succeeded()) throw CommandFailed("at least one strategy failed");
    return kExitOk;
  }

  int run(std::uint64_t seed) {
    KeyValueConfig kv;
    kv.set("data", data);
    kv.set("out", out);
    model.describe(kv);
    uni.describe(kv, "uni-");
    multi.describe(kv, "multi-");
    print_resolved("compare", kv, seed);
    print_stream(model.resolve(load_container<float>(data).class_count(), dataset_hw(data)));
    return model.precision == 64 ? run_as<double>(seed) : run_as<float>(seed);
  }
};

// ---------------------------------------------------------------------------------------------
// viz-filters / curves

struct VizFiltersCommand {
  std::string checkpoint, layer = "image.conv1", out;
  std::size_t scale = 1;

  void add(CLI::App* app) {
    app->add_option("--checkpoint", checkpoint, "FZNT checkpoint")->required()->check(CLI::ExistingFile);
    app->add_option("--layer", layer, "Convolution layer, e.g. image.conv1 or joint.conv1")->capture_default_str();
    app->add_option("--out", out, "Output image (.png or .ppm)")->required();
    app->add_option("--scale", scale, "Pixels per filter weight")->check(CLI::PositiveNumber)->capture_default_str();
  }

  int run(std::uint64_t seed) {
    KeyValueConfig kv;
    kv.set("checkpoint", checkpoint);
    kv.set("layer", layer);
    kv.set("out", out);
    kv.set("scale", std::to_string(scale));
    print_resolved("viz-filters", kv, seed);
    const auto ckpt = load_checkpoint<double>(checkpoint);
    const std::string wanted = layer.ends_with(".weight") ? layer : layer + ".weight";
    std::string available;
    for (const auto& [name, tensor] : ckpt.tensors) {
      if (name == wanted) {
        if (tensor.rank() != 4) throw ConfigError(layer + " is not a convolution layer");
        const auto img = filter_grid(tensor, scale);
        if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
        write_image(out, img);
        std::cout << tensor.dim(0) << " filter(s), " << filter_grid_shape(tensor.dim(0)).columns << "x"
                  << filter_grid_shape(tensor.dim(0)).rows << " grid, " << img.width << "x" << img.height << " px -> " << out
                  << "\n";
        return kExitOk;
      }
      if (tensor.rank() == 4) available += (available.empty() ? "" : ", ") + name.substr(0, name.size() - 7);
    }
    throw ConfigError("checkpoint has no layer '" + layer + "'; convolution layers: " + available);
  }
};

struct CurvesCommand {
  std::vector<std::string> inputs;
  std::string out;

  void add(CLI::App* app) {
    app->add_option("--in", inputs, "Metric CSVs (epoch,loss,test_accuracy) or directories of them")->required();
    app->add_option("--out", out, "Merged wide CSV")->required();
  }

  int run(std::uint64_t seed) {
    KeyValueConfig kv;
    std::string joined;
    for (const auto& i : inputs) joined += (joined.empty() ? "" : ",") + i;
    kv.set("in", joined);
    kv.set("out", out);
    print_resolved("curves", kv, seed);
    std::vector<fs::path> files;
    for (const auto& i : inputs) {
      if (fs::is_directory(i)) {
        std::vector<fs::path> found;
        for (const auto& e : fs::directory_iterator(i))
          if (e.is_regular_file() && e.path().extension() == ".csv") found.push_back(e.path());
        std::sort(found.begin(), found.end());
        files.insert(files.end(), found.begin(), found.end());
      } else {
        files.emplace_back(i);
      }
    }
    if (files.empty()) throw EmptyResultError("no metric CSVs found");
    std::vector<std::pair<std::string, std::string>> named;
    for (const auto& f : files) named.emplace_back(f.stem().string(), read_text(f));
    write_text(out, merge_curves(named));
    std::cout << files.size() << " curve(s) -> " << out << "\n";
    return kExitOk;
  }
};

// ---------------------------------------------------------------------------------------------
// --config handling

/// Expands `--config FILE` into long flags placed right after the subcommand name. Keys given
/// explicitly on the command line win over the file.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  if (args.size() < 2 || args[1].starts_with("-")) return args;
  std::string path;
  std::set<std::string> explicit_keys;
  for (std::size_t i = 2; i < args.size(); ++i) {
    const auto& a = args[i];
    if (!a.starts_with("--")) continue;
    const auto eq = a.find('=');
    const std::string key = a.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
    explicit_keys.insert(key);
    if (key == "config") path = eq == std::string::npos ? (i + 1 < args.size() ? args[i + 1] : "") : a.substr(eq + 1);
  }
  if (path.empty()) return args;
  const auto kv = KeyValueConfig::load(path);
  std::vector<std::string> injected;
  for (const auto& [raw_key, value] : kv.values()) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "config" || explicit_keys.count(key)) continue;
    injected.push_back("--" + key + "=" + value);
  }
  args.insert(args.begin() + 2, injected.begin(), injected.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fusenet: multimodal (image + audio spectrogram) CNN fusion toolkit"};
  app.require_subcommand(1);
  app.fallthrough(false);

  std::uint64_t seed = 0;
  std::string config_path;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Seed for every random choice (falls back to $FUSENET_SEED)")
        ->envname("FUSENET_SEED")
        ->capture_default_str();
    sub->add_option("--config", config_path, "key = value file supplying flag defaults")->check(CLI::ExistingFile);
  };

  SpectrogramCommand spectrogram;
  DatasetBuildCommand dataset_build;
  DatasetSynthCommand dataset_synth;
  TrainCommand train_cmd;
  EvalCommand eval_cmd;
  FinetuneCommand finetune;
  CompareCommand compare;
  VizFiltersCommand viz;
  CurvesCommand curves;

  std::function<int()> action;
  auto bind = [&](const char* name, const char* help, auto& cmd) {
    CLI::App* sub = app.add_subcommand(name, help);
    cmd.add(sub);
    common(sub);
    sub->callback([&] { action = [&] { return cmd.run(seed); }; });
  };
  bind("spectrogram", "Render WAV recordings into spectrogram images", spectrogram);
  bind("dataset-build", "Pair image and spectrogram folders into an FZDS container", dataset_build);
  bind("dataset-synth", "Generate the synthetic factorial dataset", dataset_synth);
  bind("train", "Train one strategy", train_cmd);
  bind("eval", "Evaluate a checkpoint", eval_cmd);
  bind("finetune2", "Two-stage training: streams first, then only the fusion part", finetune);
  bind("compare", "Train all eight strategies and report test accuracy", compare);
  bind("viz-filters", "Export convolution filters as an image grid", viz);
  bind("curves", "Merge learning-curve CSVs into one table", curves);

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = expand_config(std::move(args));
    std::vector<char*> expanded;
    for (auto& a : args) expanded.push_back(a.data());
    app.parse(static_cast<int>(expanded.size()), expanded.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    return action();
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
