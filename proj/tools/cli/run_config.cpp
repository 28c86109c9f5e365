#include "run_config.hpp"

#include <fstream>
#include <sstream>

#include "config_json.hpp"
#include "driveid/error.hpp"

namespace driveid::cli {

using detail::json;
using detail::ObjectReader;

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  ObjectReader root(doc, "config");

  if (const json* data = root.child("data")) {
    ObjectReader r(*data, "data");
    std::string manifest;
    r.read("manifest", manifest);
    r.finish();
    if (!manifest.empty()) cfg.manifest = base_dir / manifest;
  }
  if (const json* synth = root.child("synthetic")) {
    ObjectReader r(*synth, "synthetic");
    r.read("drivers", cfg.synthetic.drivers);
    r.read("separation", cfg.synthetic.separation);
    r.read("profile_seed", cfg.synthetic.profile_seed);
    if (const json* gen = r.child("generator")) {
      detail::read_into(*gen, cfg.synthetic.generator, "synthetic.generator");
    }
    r.finish();
  }
  eval::PipelineConfig& p = cfg.pipeline;
  if (const json* j = root.child("windowing")) detail::read_into(*j, p.windowing, "windowing");
  if (const json* j = root.child("encoder")) detail::read_into(*j, p.encoder, "encoder");
  if (const json* j = root.child("training")) detail::read_into(*j, p.training, "training");
  if (const json* j = root.child("gbdt")) detail::read_into(*j, p.gbdt, "gbdt");
  if (const json* j = root.child("eval")) detail::read_into(*j, p.eval, "eval");
  root.read("threads", p.threads);

  std::string model_dir;
  root.read("model_dir", model_dir);
  if (!model_dir.empty()) cfg.model_dir = base_dir / model_dir;

  if (const json* ab = root.child("ablate")) {
    ObjectReader r(*ab, "ablate");
    r.read("features", cfg.ablate.features);
    r.read("intervals_s", cfg.ablate.intervals_s);
    r.read("tcn_sizes", cfg.ablate.tcn_sizes);
    r.finish();
  }
  if (const json* pr = root.child("project")) {
    ObjectReader r(*pr, "project");
    r.read("split", cfg.project.split);
    std::string method = eval::to_string(cfg.project.method);
    r.read("method", method);
    cfg.project.method = eval::parse_projection(method);
    r.read("perplexity", cfg.project.tsne.perplexity);
    r.read("iterations", cfg.project.tsne.iterations);
    r.read("seed", cfg.project.tsne.seed);
    r.finish();
  }
  root.finish();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), path.parent_path());
}

void apply_overrides(RunConfig& cfg, const RunSpec& spec) {
  eval::PipelineConfig& p = cfg.pipeline;
  if (spec.seed) {
    p.training.seed = *spec.seed;
    p.gbdt.seed = *spec.seed;
    p.eval.seed = *spec.seed;
    cfg.project.tsne.seed = *spec.seed;
  }
  if (spec.single_thread) {
    p.threads = 1;
    p.training.threads = 1;
  }
  if (cfg.model_dir.empty()) cfg.model_dir = spec.out;

  p.windowing.validate();
  p.training.validate();
  p.gbdt.validate();
  p.eval.validate();
  if (!cfg.manifest) {
    if (cfg.synthetic.drivers < 2) throw ConfigError("synthetic.drivers must be at least 2");
    if (!(cfg.synthetic.separation > 0.0 && cfg.synthetic.separation <= 1.0)) {
      throw ConfigError("synthetic.separation must lie in (0, 1]");
    }
    for (double d : cfg.synthetic.generator.area_duration_s) {
      if (!(d > 0.0)) throw ConfigError("synthetic area durations must be positive");
    }
  }
  if (cfg.project.split != "train" && cfg.project.split != "eval" &&
      cfg.project.split != "test") {
    throw ConfigError("project.split must be train, eval or test");
  }
  if (!(cfg.project.tsne.perplexity > 0.0)) throw ConfigError("project.perplexity must be positive");
  for (double s : cfg.ablate.intervals_s) {
    if (!(s > 0.0)) throw ConfigError("ablate.intervals_s entries must be positive");
  }
  for (std::size_t s : cfg.ablate.tcn_sizes) {
    if (s == 0) throw ConfigError("ablate.tcn_sizes entries must be positive");
  }
}

std::string to_json_text(const RunConfig& cfg) {
  json doc;
  doc["data"] = {{"manifest", cfg.manifest ? cfg.manifest->string() : std::string()}};
  doc["synthetic"] = {{"drivers", cfg.synthetic.drivers},
                      {"separation", cfg.synthetic.separation},
                      {"profile_seed", cfg.synthetic.profile_seed},
                      {"generator", detail::to_json(cfg.synthetic.generator)}};
  doc["windowing"] = detail::to_json(cfg.pipeline.windowing);
  doc["encoder"] = detail::to_json(cfg.pipeline.encoder);
  doc["training"] = detail::to_json(cfg.pipeline.training);
  doc["gbdt"] = detail::to_json(cfg.pipeline.gbdt);
  doc["eval"] = detail::to_json(cfg.pipeline.eval);
  doc["threads"] = cfg.pipeline.threads;
  doc["model_dir"] = cfg.model_dir.string();
  doc["ablate"] = {{"features", cfg.ablate.features},
                   {"intervals_s", cfg.ablate.intervals_s},
                   {"tcn_sizes", cfg.ablate.tcn_sizes}};
  doc["project"] = {{"split", cfg.project.split},
                    {"method", eval::to_string(cfg.project.method)},
                    {"perplexity", cfg.project.tsne.perplexity},
                    {"iterations", cfg.project.tsne.iterations},
                    {"seed", cfg.project.tsne.seed}};
  return doc.dump(2) + "\n";
}

}  // namespace driveid::cli
