#include "commands.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "driveid/data/recording.hpp"
#include "driveid/error.hpp"

namespace driveid::cli {

namespace fs = std::filesystem;

namespace {

std::vector<data::Recording> load_raw(const RunConfig& cfg, std::ostream& log) {
  if (cfg.manifest) {
    std::vector<std::string> warnings;
    auto recordings = data::load_recordings(*cfg.manifest, &warnings);
    for (const std::string& w : warnings) log << "warning: " << w << '\n';
    log << "loaded " << recordings.size() << " recordings from " << cfg.manifest->string() << '\n';
    return recordings;
  }
  const auto profiles = data::make_profiles(cfg.synthetic.drivers, cfg.synthetic.separation,
                                            cfg.synthetic.profile_seed);
  auto recordings = data::generate_synthetic(profiles, cfg.synthetic.generator);
  log << "generated " << recordings.size() << " synthetic recordings for "
      << cfg.synthetic.drivers << " drivers\n";
  return recordings;
}

data::Dataset load_dataset(const RunConfig& cfg, std::ostream& log) {
  data::Dataset ds = data::build_dataset(load_raw(cfg, log), cfg.pipeline.windowing);
  log << "windows: train " << ds.train.size() << ", eval " << ds.eval.size() << ", test "
      << ds.test.size() << " (" << ds.driver_count() << " drivers, " << ds.channel_count()
      << " channels)\n";
  return ds;
}

/// Normalized dataset plus the trained models read back from the model directory.
struct Loaded {
  data::Dataset dataset;
  encoder::EncoderParams encoder;
  gbdt::GbdtModel classifier;
};

Loaded load_trained(const RunConfig& cfg, std::ostream& log) {
  const data::Dataset raw = load_dataset(cfg, log);
  const fs::path& dir = cfg.model_dir;
  for (const char* name : {files::kEncoder, files::kNormalizer, files::kClassifier}) {
    if (!fs::exists(dir / name)) {
      throw FormatError("missing " + (dir / name).string() + " (run train first)");
    }
  }
  Loaded out;
  const data::Normalizer normalizer = data::load_normalizer(dir / files::kNormalizer, raw.channels);
  out.dataset = data::normalize(raw, normalizer);
  const encoder::EncoderConfig expected = eval::resolve_encoder(cfg.pipeline.encoder, out.dataset);
  out.encoder = encoder::load_checkpoint(dir / files::kEncoder, expected);
  out.classifier = gbdt::load_model(dir / files::kClassifier);
  if (out.classifier.num_classes != out.dataset.driver_count() ||
      out.classifier.num_features != expected.embedding_size()) {
    throw FormatError("classifier in " + dir.string() + " does not match the dataset/encoder");
  }
  return out;
}

std::span<const data::Window> split_of(const data::Dataset& ds, const std::string& split) {
  if (split == "train") return ds.train;
  if (split == "eval") return ds.eval;
  return ds.test;
}

void log_rows(std::ostream& log, std::span<const eval::AblationRow> rows) {
  for (const auto& r : rows) {
    log << "  " << std::left << std::setw(28) << r.label << " channels " << std::setw(3)
        << r.channels << " pairwise " << std::fixed << std::setprecision(4) << r.pairwise
        << std::defaultfloat << '\n';
  }
}

}  // namespace

void cmd_synth(const RunConfig& cfg, const RunSpec& spec, std::ostream& log) {
  const auto recordings = load_raw(cfg, log);
  const fs::path data_dir = spec.out / "data";
  fs::create_directories(data_dir);
  data::DatasetManifest manifest;
  manifest.sample_rate_hz = cfg.pipeline.windowing.sample_rate_hz;
  manifest.units = data::synthetic_units();
  for (const data::Recording& r : recordings) {
    const fs::path file =
        fs::path("data") / (r.driver + "_" + std::string(data::to_string(r.area)) + ".csv");
    data::write_recording_csv(spec.out / file, r);
    manifest.entries.push_back({r.driver, r.area, file});
  }
  data::write_manifest(spec.out / files::kManifest, manifest);
  log << "wrote " << manifest.entries.size() << " recordings and "
      << (spec.out / files::kManifest).string() << '\n';
}

void cmd_train(const RunConfig& cfg, const RunSpec& spec, std::ostream& log) {
  const data::Dataset raw = load_dataset(cfg, log);
  const eval::PipelineRun run =
      eval::run_pipeline(raw, cfg.pipeline, [&](const training::EpochStats& s) {
        log << "epoch " << s.epoch << "  loss " << std::setprecision(6) << s.mean_loss << "  lr "
            << s.learning_rate << "  " << std::fixed << std::setprecision(1) << s.seconds << " s"
            << std::defaultfloat << std::endl;
      });
  fs::create_directories(cfg.model_dir);
  encoder::save_checkpoint(cfg.model_dir / files::kEncoder, run.training.params);
  data::save_normalizer(cfg.model_dir / files::kNormalizer, run.normalizer, run.dataset.channels);
  gbdt::save_model(cfg.model_dir / files::kClassifier, run.classifier);
  training::write_run_manifest(spec.out / files::kRunManifest, run.encoder_config,
                               cfg.pipeline.training, run.training);
  training::write_loss_history(spec.out / files::kLossHistory, run.training);
  log << "trained in " << std::fixed << std::setprecision(1) << run.training.wall_seconds
      << " s; models in " << cfg.model_dir.string() << std::defaultfloat << '\n';
}

void cmd_eval(const RunConfig& cfg, const RunSpec& spec, std::ostream& log) {
  const Loaded m = load_trained(cfg, log);
  const std::size_t threads = cfg.pipeline.threads;
  const eval::ProbabilityTable test =
      eval::classify(m.encoder, m.classifier, m.dataset.test, threads);
  const eval::ProbabilityTable validation =
      eval::classify(m.encoder, m.classifier, m.dataset.eval, threads);
  const eval::EvalReport report =
      eval::evaluate(test, validation, m.dataset.drivers, cfg.pipeline.eval);
  eval::write_report(spec.out / files::kReport, report);
  eval::write_confusion_csv(spec.out / files::kConfusion, report);
  log << "top-1 " << std::fixed << std::setprecision(4) << report.confusion.accuracy << '\n';
  for (const auto& [n, t] : report.nway) log << n << "-way " << t.accuracy() << '\n';
  for (const auto& [n, t] : report.nota) {
    log << n << "-way nota " << t.accuracy() << " (threshold "
        << report.nota_thresholds.at(n).threshold << ")\n";
  }
  log << std::defaultfloat << "wrote " << (spec.out / files::kReport).string() << '\n';
}

void cmd_ablate(const RunConfig& cfg, const RunSpec& spec, std::ostream& log) {
  const data::Dataset raw = load_dataset(cfg, log);
  if (cfg.ablate.features) {
    const auto masks = eval::default_ablation_masks();
    const auto rows = eval::ablate_features(raw, cfg.pipeline, masks);
    eval::write_ablation_csv(spec.out / files::kAblationFeatures, rows);
    log << "feature ablation:\n";
    log_rows(log, rows);
  }
  if (!cfg.ablate.intervals_s.empty()) {
    const auto rows = eval::interval_sweep(raw, cfg.pipeline, cfg.ablate.intervals_s);
    eval::write_ablation_csv(spec.out / files::kAblationIntervals, rows);
    log << "interval length sweep:\n";
    log_rows(log, rows);
  }
  if (!cfg.ablate.tcn_sizes.empty()) {
    const auto rows = eval::embedding_size_sweep(raw, cfg.pipeline, cfg.ablate.tcn_sizes);
    eval::write_ablation_csv(spec.out / files::kAblationEmbedding, rows);
    log << "embedding size sweep:\n";
    log_rows(log, rows);
  }
}

void cmd_project(const RunConfig& cfg, const RunSpec& spec, std::ostream& log) {
  const Loaded m = load_trained(cfg, log);
  const auto windows = split_of(m.dataset, cfg.project.split);
  if (windows.empty()) throw DataError("the " + cfg.project.split + " split has no windows");
  const numerics::Tensor embeddings = encoder::embed_batch(m.encoder, windows, cfg.pipeline.threads);
  std::vector<int> labels;
  labels.reserve(windows.size());
  for (const data::Window& w : windows) labels.push_back(w.driver);
  const auto points =
      eval::project_2d(embeddings, labels, cfg.project.method, cfg.project.tsne);
  eval::write_points_csv(spec.out / files::kPoints, points, m.dataset.drivers);
  log << "projected " << points.size() << " windows with " << eval::to_string(cfg.project.method)
      << " into " << (spec.out / files::kPoints).string() << '\n';
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"synth", "train", "eval", "ablate", "project"};
  return names;
}

int run(const RunSpec& spec, std::ostream& log, std::ostream& err) {
  try {
    RunConfig cfg = spec.config_path.empty() ? RunConfig{} : load_run_config(spec.config_path);
    apply_overrides(cfg, spec);
    std::error_code ec;
    fs::create_directories(spec.out, ec);
    std::ofstream echo(spec.out / files::kResolvedConfig);
    if (ec || !echo) throw ConfigError("output directory " + spec.out.string() + " is not writable");
    echo << to_json_text(cfg);
    echo.close();

    if (spec.command == "synth") {
      cmd_synth(cfg, spec, log);
    } else if (spec.command == "train") {
      cmd_train(cfg, spec, log);
    } else if (spec.command == "eval") {
      cmd_eval(cfg, spec, log);
    } else if (spec.command == "ablate") {
      cmd_ablate(cfg, spec, log);
    } else if (spec.command == "project") {
      cmd_project(cfg, spec, log);
    } else {
      throw ConfigError("unknown command '" + spec.command + "'");
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace driveid::cli
