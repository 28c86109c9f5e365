#include "driveid/eval/eval.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

#include "../config_json.hpp"
#include "driveid/error.hpp"
#include "driveid/numerics/random.hpp"

namespace driveid::eval {

using detail::json;
using numerics::derive_seed;
using numerics::Rng;

void EvalConfig::validate(std::size_t drivers) const {
  if (group_sizes.empty()) throw ConfigError("eval needs at least one group size");
  for (std::size_t n : group_sizes) {
    if (n < 2) throw ConfigError("eval group size " + std::to_string(n) + " is below 2");
    if (drivers > 0 && n > drivers) {
      throw ConfigError("eval group size " + std::to_string(n) + " exceeds the " +
                        std::to_string(drivers) + " drivers");
    }
  }
  if (sampling_cap == 0) throw ConfigError("eval sampling_cap must be positive");
  if (!(nota_threshold >= 0.0 && nota_threshold <= 1.0)) {
    throw ConfigError("nota threshold must lie in [0, 1]");
  }
  for (double t : nota_sweep) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("nota sweep thresholds must lie in [0, 1]");
  }
}

ProbabilityTable ProbabilityTable::subset(data::Area area) const {
  ProbabilityTable out;
  std::vector<double> values;
  for (std::size_t i = 0; i < rows(); ++i) {
    if (areas[i] != area) continue;
    const auto r = row(i);
    values.insert(values.end(), r.begin(), r.end());
    out.labels.push_back(labels[i]);
    out.areas.push_back(area);
  }
  if (!out.labels.empty()) {
    out.probabilities = Tensor({out.labels.size(), classes()}, std::move(values));
  }
  return out;
}

namespace {

int argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k) {
    if (row[k] > row[best]) best = k;
  }
  return static_cast<int>(best);
}

void check_table(const ProbabilityTable& table) {
  if (table.probabilities.empty() && table.rows() == 0) return;
  if (table.probabilities.rank() != 2 || table.probabilities.dim(0) != table.labels.size()) {
    throw DimensionError("probability table has shape " +
                         numerics::to_string(table.probabilities.shape()) + " for " +
                         std::to_string(table.labels.size()) + " labels");
  }
  for (int label : table.labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= table.classes()) {
      throw DataError("label " + std::to_string(label) + " outside [0, " +
                      std::to_string(table.classes()) + ")");
    }
  }
}

std::vector<int> others_of(int truth, std::size_t classes) {
  std::vector<int> out;
  out.reserve(classes);
  for (std::size_t k = 0; k < classes; ++k) {
    if (static_cast<int>(k) != truth) out.push_back(static_cast<int>(k));
  }
  return out;
}

/// `count` distinct entries of `pool` in random order (pool is shuffled in place).
void draw_distinct(std::vector<int>& pool, std::size_t count, Rng& rng, std::vector<int>& out) {
  out.clear();
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.uniform_index(pool.size() - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
}

void insert_sorted(std::vector<int>& set, int value) {
  set.insert(std::upper_bound(set.begin(), set.end(), value), value);
}

constexpr std::uint64_t kNwayTag = 0x6e776179;
constexpr std::uint64_t kNotaTag = 0x6e6f7461;

}  // namespace

ConfusionResult confusion_matrix(const ProbabilityTable& table) {
  check_table(table);
  const std::size_t k = table.classes();
  ConfusionResult out;
  out.counts.assign(k, std::vector<std::size_t>(k, 0));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < table.rows(); ++i) {
    const int predicted = argmax(table.row(i));
    ++out.counts[static_cast<std::size_t>(table.labels[i])][static_cast<std::size_t>(predicted)];
    hits += predicted == table.labels[i];
  }
  out.accuracy = table.rows() == 0 ? 0.0 : static_cast<double>(hits) / table.rows();
  return out;
}

std::size_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::size_t result = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    const std::size_t num = n - k + i;
    if (result > std::numeric_limits<std::size_t>::max() / num) {
      return std::numeric_limits<std::size_t>::max();
    }
    result = result * num / i;  // exact: result * num is divisible by i
  }
  return result;
}

void for_each_candidate_set(int truth, std::size_t classes, std::size_t n,
                            std::size_t window_index, const EvalConfig& cfg,
                            const std::function<void(std::span<const int>)>& visit) {
  if (n < 2 || n > classes) {
    throw ConfigError("group size " + std::to_string(n) + " is invalid for " +
                      std::to_string(classes) + " drivers");
  }
  std::vector<int> others = others_of(truth, classes);
  std::vector<int> set;
  set.reserve(n);
  if (n <= 3) {
    // Lexicographic enumeration of (n-1)-combinations of the other drivers.
    std::vector<std::size_t> idx(n - 1);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const std::size_t m = others.size();
    while (true) {
      set.clear();
      for (std::size_t i : idx) set.push_back(others[i]);
      insert_sorted(set, truth);
      visit(set);
      std::size_t pos = idx.size();
      while (pos > 0 && idx[pos - 1] == m - idx.size() + pos - 1) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t j = pos; j < idx.size(); ++j) idx[j] = idx[j - 1] + 1;
    }
    return;
  }
  Rng rng(derive_seed(derive_seed(cfg.seed ^ kNwayTag, n), window_index));
  std::vector<int> picked;
  for (std::size_t s = 0; s < cfg.sampling_cap; ++s) {
    draw_distinct(others, n - 1, rng, picked);
    set.assign(picked.begin(), picked.end());
    std::sort(set.begin(), set.end());
    insert_sorted(set, truth);
    visit(set);
  }
}

Tally nway_accuracy(const ProbabilityTable& table, std::size_t n, const EvalConfig& cfg) {
  check_table(table);
  if (n > table.classes()) {
    throw ConfigError("n-way group size " + std::to_string(n) + " exceeds " +
                      std::to_string(table.classes()) + " drivers");
  }
  Tally tally;
  for (std::size_t i = 0; i < table.rows(); ++i) {
    const int truth = table.labels[i];
    const auto probs = table.row(i);
    for_each_candidate_set(truth, table.classes(), n, i, cfg, [&](std::span<const int> set) {
      tally.correct += gbdt::predict_restricted(probs, set, 0.0) == truth;
      ++tally.total;
    });
  }
  return tally;
}

NotaTuples nota_tuples(int truth, std::size_t classes, std::size_t n, std::size_t window_index,
                       const EvalConfig& cfg) {
  if (n < 2 || n + 1 > classes) {
    throw ConfigError("none-of-the-above needs more than " + std::to_string(n) +
                      " drivers, got " + std::to_string(classes));
  }
  const std::size_t per_side =
      n <= 3 ? std::max<std::size_t>(1, binomial(classes - 1, n - 1) / 2)
             : std::max<std::size_t>(1, cfg.sampling_cap / 2);
  Rng rng(derive_seed(derive_seed(cfg.seed ^ kNotaTag, n), window_index));
  std::vector<int> others = others_of(truth, classes);
  std::vector<int> picked;
  NotaTuples out;
  out.with_truth.reserve(per_side);
  out.without_truth.reserve(per_side);
  for (std::size_t s = 0; s < per_side; ++s) {
    draw_distinct(others, n - 1, rng, picked);
    std::vector<int> set(picked.begin(), picked.end());
    std::sort(set.begin(), set.end());
    insert_sorted(set, truth);
    out.with_truth.push_back(std::move(set));
  }
  for (std::size_t s = 0; s < per_side; ++s) {
    draw_distinct(others, n, rng, picked);
    std::vector<int> set(picked.begin(), picked.end());
    std::sort(set.begin(), set.end());
    out.without_truth.push_back(std::move(set));
  }
  return out;
}

Tally nota_accuracy(const ProbabilityTable& table, std::size_t n, double threshold,
                    const EvalConfig& cfg) {
  check_table(table);
  Tally tally;
  for (std::size_t i = 0; i < table.rows(); ++i) {
    const int truth = table.labels[i];
    const auto probs = table.row(i);
    const NotaTuples tuples = nota_tuples(truth, table.classes(), n, i, cfg);
    for (const auto& set : tuples.with_truth) {
      tally.correct += gbdt::predict_restricted(probs, set, threshold) == truth;
    }
    for (const auto& set : tuples.without_truth) {
      tally.correct += gbdt::predict_restricted(probs, set, threshold) == gbdt::kUncertain;
    }
    tally.total += tuples.with_truth.size() + tuples.without_truth.size();
  }
  return tally;
}

ThresholdChoice sweep_nota_threshold(const ProbabilityTable& table, std::size_t n,
                                     const EvalConfig& cfg) {
  ThresholdChoice out;
  out.threshold = cfg.nota_threshold;
  double best = -1.0;
  for (double t : cfg.nota_sweep) {
    const double acc = nota_accuracy(table, n, t, cfg).accuracy();
    out.sweep.emplace_back(t, acc);
    if (acc > best) {
      best = acc;
      out.threshold = t;
    }
  }
  return out;
}

std::map<data::Area, Tally> area_accuracy(const ProbabilityTable& table, const EvalConfig& cfg) {
  std::map<data::Area, Tally> out;
  for (data::Area area : data::kAllAreas) {
    const ProbabilityTable part = table.subset(area);
    if (part.rows() == 0) continue;
    out[area] = nway_accuracy(part, 2, cfg);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

PreparedData prepare(const data::Dataset& raw) {
  if (raw.train.empty()) throw DataError("dataset has no training windows");
  PreparedData out;
  out.normalizer = data::Normalizer::fit(raw.train);
  out.dataset = data::normalize(raw, out.normalizer);
  return out;
}

encoder::EncoderConfig resolve_encoder(const encoder::EncoderConfig& base,
                                       const data::Dataset& dataset) {
  encoder::EncoderConfig cfg = base;
  cfg.in_channels = dataset.channel_count();
  cfg.window_length = dataset.window_length();
  cfg.validate();
  return cfg;
}

ProbabilityTable classify(const encoder::EncoderParams& encoder, const gbdt::GbdtModel& model,
                          std::span<const data::Window> windows, std::size_t threads) {
  ProbabilityTable out;
  if (windows.empty()) return out;
  out.probabilities = gbdt::predict_proba(model, encoder::embed_batch(encoder, windows, threads));
  for (const data::Window& w : windows) {
    out.labels.push_back(w.driver);
    out.areas.push_back(w.area);
  }
  return out;
}

PipelineRun run_pipeline(const data::Dataset& raw, const PipelineConfig& cfg,
                         const training::EpochCallback& on_epoch) {
  PreparedData prepared = prepare(raw);
  PipelineRun run;
  run.dataset = std::move(prepared.dataset);
  run.normalizer = std::move(prepared.normalizer);
  run.encoder_config = resolve_encoder(cfg.encoder, run.dataset);
  run.training = training::train(run.dataset, run.encoder_config, cfg.training, on_epoch);
  const Tensor embeddings =
      encoder::embed_batch(run.training.params, run.dataset.train, cfg.threads);
  std::vector<int> labels;
  labels.reserve(run.dataset.train.size());
  for (const data::Window& w : run.dataset.train) labels.push_back(w.driver);
  run.classifier = gbdt::fit(embeddings, labels, run.dataset.driver_count(), cfg.gbdt);
  return run;
}

double eval_pairwise(const PipelineRun& run, const PipelineConfig& cfg) {
  const ProbabilityTable table =
      classify(run.training.params, run.classifier, run.dataset.eval, cfg.threads);
  if (table.rows() == 0) throw DataError("evaluation split has no windows");
  return nway_accuracy(table, 2, cfg.eval).accuracy();
}

// ---------------------------------------------------------------------------
// Reports

EvalReport evaluate(const ProbabilityTable& test, const ProbabilityTable& validation,
                    std::span<const std::string> drivers, const EvalConfig& cfg,
                    const std::string& split) {
  if (test.rows() == 0) throw DataError("no windows to evaluate in the " + split + " split");
  const std::size_t k = test.classes();
  cfg.validate(k);
  EvalReport report;
  report.split = split;
  report.windows = test.rows();
  report.drivers.assign(drivers.begin(), drivers.end());
  report.seed = cfg.seed;
  report.confusion = confusion_matrix(test);
  for (std::size_t n : cfg.group_sizes) report.nway[n] = nway_accuracy(test, n, cfg);
  if (cfg.nota_enabled) {
    for (std::size_t n : cfg.group_sizes) {
      if (n + 1 > k) continue;
      ThresholdChoice choice;
      if (validation.rows() > 0 && !cfg.nota_sweep.empty()) {
        choice = sweep_nota_threshold(validation, n, cfg);
      } else {
        choice.threshold = cfg.nota_threshold;
      }
      report.nota[n] = nota_accuracy(test, n, choice.threshold, cfg);
      report.nota_thresholds[n] = std::move(choice);
    }
  }
  report.per_area = area_accuracy(test, cfg);
  return report;
}

namespace {

json tally_json(const Tally& t) {
  return {{"accuracy", t.accuracy()}, {"correct", t.correct}, {"trials", t.total}};
}

}  // namespace

void write_report(const std::filesystem::path& path, const EvalReport& report) {
  json doc;
  doc["split"] = report.split;
  doc["windows"] = report.windows;
  doc["seed"] = report.seed;
  doc["drivers"] = report.drivers;
  doc["top1_accuracy"] = report.confusion.accuracy;
  doc["confusion_matrix"] = report.confusion.counts;
  json nway = json::object();
  for (const auto& [n, t] : report.nway) nway[std::to_string(n)] = tally_json(t);
  doc["nway"] = std::move(nway);
  json nota = json::object();
  for (const auto& [n, t] : report.nota) {
    json entry = tally_json(t);
    const ThresholdChoice& choice = report.nota_thresholds.at(n);
    entry["threshold"] = choice.threshold;
    json sweep = json::array();
    for (const auto& [threshold, acc] : choice.sweep) {
      sweep.push_back({{"threshold", threshold}, {"accuracy", acc}});
    }
    entry["validation_sweep"] = std::move(sweep);
    nota[std::to_string(n)] = std::move(entry);
  }
  doc["nota"] = std::move(nota);
  json area = json::object();
  for (const auto& [a, t] : report.per_area) area[data::to_string(a)] = tally_json(t);
  doc["per_area_pairwise"] = std::move(area);
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write report " + path.string());
  out << doc.dump(2) << '\n';
}

void write_confusion_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  const auto& counts = report.confusion.counts;
  auto name = [&](std::size_t i) {
    return i < report.drivers.size() ? report.drivers[i] : std::to_string(i);
  };
  out << "true\\predicted";
  for (std::size_t j = 0; j < counts.size(); ++j) out << ',' << name(j);
  out << '\n';
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out << name(i);
    for (std::size_t c : counts[i]) out << ',' << c;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Sweeps

std::vector<data::GroupMask> default_ablation_masks() {
  std::vector<data::GroupMask> masks;
  masks.push_back({});
  for (data::ChannelGroup g : data::kAllGroups) {
    data::GroupMask m;
    m.removed.insert(g);
    masks.push_back(std::move(m));
  }
  data::GroupMask speed_acc;
  speed_acc.keep_only =
      std::set<data::ChannelGroup>{data::ChannelGroup::Speed, data::ChannelGroup::Acceleration};
  masks.push_back(std::move(speed_acc));
  return masks;
}

std::vector<AblationRow> ablate_features(const data::Dataset& raw, const PipelineConfig& cfg,
                                         std::span<const data::GroupMask> masks) {
  std::vector<AblationRow> rows;
  for (const data::GroupMask& mask : masks) {
    const data::Dataset masked = data::mask_groups(raw, mask);
    const PipelineRun run = run_pipeline(masked, cfg);
    rows.push_back({mask.label(), masked.channel_count(), 0.0, eval_pairwise(run, cfg)});
  }
  return rows;
}

std::vector<AblationRow> interval_sweep(const data::Dataset& raw, const PipelineConfig& cfg,
                                        std::span<const double> lengths_s) {
  std::vector<AblationRow> rows;
  for (double length : lengths_s) {
    data::WindowingConfig w = raw.windowing;
    w.interval_length_s = length;
    w.validate();
    const data::Dataset windowed = data::rewindow(raw, w);
    const PipelineRun run = run_pipeline(windowed, cfg);
    std::ostringstream label;
    label << length << " s";
    rows.push_back({label.str(), windowed.channel_count(), length, eval_pairwise(run, cfg)});
  }
  return rows;
}

std::vector<AblationRow> embedding_size_sweep(const data::Dataset& raw, const PipelineConfig& cfg,
                                              std::span<const std::size_t> tcn_sizes) {
  std::vector<AblationRow> rows;
  for (std::size_t size : tcn_sizes) {
    PipelineConfig c = cfg;
    c.encoder.tcn_embedding = size;
    const PipelineRun run = run_pipeline(raw, c);
    const std::size_t total = c.encoder.embedding_size();
    rows.push_back({std::to_string(size) + " (" + std::to_string(total) + ")",
                    raw.channel_count(), static_cast<double>(size), eval_pairwise(run, c)});
  }
  return rows;
}

void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationRow> rows) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "label,channels,value,pairwise_accuracy\n" << std::setprecision(17);
  for (const AblationRow& r : rows) {
    out << '"' << r.label << "\"," << r.channels << ',' << r.value << ',' << r.pairwise << '\n';
  }
}

// ---------------------------------------------------------------------------
// Projection

std::string to_string(Projection method) { return method == Projection::Pca ? "pca" : "tsne"; }

Projection parse_projection(const std::string& name) {
  if (name == "pca") return Projection::Pca;
  if (name == "tsne") return Projection::Tsne;
  throw ConfigError("unknown projection '" + name + "' (expected pca or tsne)");
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<Point2> pca_2d(const RowMatrix& x, std::span<const int> labels) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const RowMatrix centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  // Eigenvalues ascend; take the last two columns.
  Eigen::MatrixXd axes = Eigen::MatrixXd::Zero(d, 2);
  for (Eigen::Index c = 0; c < std::min<Eigen::Index>(2, d); ++c) {
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - c);
    Eigen::Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    if (v(big) < 0) v = -v;
    axes.col(c) = v;
  }
  const Eigen::MatrixXd scores = centered * axes;
  std::vector<Point2> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = {scores(i, 0), scores(i, 1),
                                        labels[static_cast<std::size_t>(i)]};
  }
  return out;
}

/// Row-conditional affinities with the requested perplexity (natural log).
Eigen::MatrixXd conditional_affinities(const Eigen::MatrixXd& sq_dist, double perplexity) {
  const Eigen::Index n = sq_dist.rows();
  const double target = std::log(perplexity);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd row(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 200; ++iter) {
      double total = 0.0;
      double weighted = 0.0;
      double nearest = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j != i) nearest = std::min(nearest, sq_dist(i, j));
      }
      for (Eigen::Index j = 0; j < n; ++j) {
        // Shift by the nearest distance so the largest weight is 1.
        row(j) = j == i ? 0.0 : std::exp(-beta * (sq_dist(i, j) - nearest));
        total += row(j);
        weighted += row(j) * (sq_dist(i, j) - nearest);
      }
      const double entropy = std::log(total) + beta * weighted / total;
      row /= total;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = (beta + lo) / 2.0;
      }
    }
    p.row(i) = row.transpose();
  }
  return p;
}

std::vector<Point2> tsne_2d(const RowMatrix& x, std::span<const int> labels,
                            const TsneConfig& cfg) {
  const Eigen::Index n = x.rows();
  if (n > 5000) throw ConfigError("exact t-SNE is limited to 5000 points, got " + std::to_string(n));
  if (!(cfg.perplexity > 0.0)) throw ConfigError("t-SNE perplexity must be positive");
  std::vector<Point2> out(static_cast<std::size_t>(n));
  if (n == 1) {
    out[0].label = labels[0];
    return out;
  }
  const double perplexity = std::min(cfg.perplexity, std::max(1.0, (static_cast<double>(n) - 1.0) / 3.0));

  const Eigen::VectorXd norms = x.rowwise().squaredNorm();
  Eigen::MatrixXd sq = (-2.0 * (x * x.transpose())).eval();
  sq.colwise() += norms;
  sq.rowwise() += norms.transpose();
  sq = sq.cwiseMax(0.0);
  Eigen::MatrixXd p = conditional_affinities(sq, perplexity);
  p = (p + p.transpose()).eval() / (2.0 * static_cast<double>(n));
  p = p.cwiseMax(1e-12);

  Rng rng(derive_seed(cfg.seed, 0x75e));
  Eigen::MatrixXd y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i, 0) = 1e-4 * rng.normal();
    y(i, 1) = 1e-4 * rng.normal();
  }
  Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
  Eigen::MatrixXd num(n, n);
  Eigen::MatrixXd grad(n, 2);
  constexpr double kLearningRate = 200.0;
  constexpr std::size_t kExaggerationIters = 100;
  constexpr std::size_t kMomentumSwitch = 250;

  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    const Eigen::VectorXd yn = y.rowwise().squaredNorm();
    num = (-2.0 * (y * y.transpose())).eval();
    num.colwise() += yn;
    num.rowwise() += yn.transpose();
    num = (1.0 + num.array()).inverse().matrix();
    num.diagonal().setZero();
    const double z = num.sum();
    const double exaggeration = iter < kExaggerationIters ? 12.0 : 1.0;
    // grad_i = 4 sum_j (P_ij - Q_ij) num_ij (y_i - y_j)
    const Eigen::MatrixXd w = ((exaggeration * p).array() - num.array() / z).matrix().cwiseProduct(num);
    grad = 4.0 * (w.rowwise().sum().asDiagonal() * y - w * y);
    const double momentum = iter < kMomentumSwitch ? 0.5 : 0.8;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index c = 0; c < 2; ++c) {
        const bool same_sign = (grad(i, c) > 0) == (velocity(i, c) > 0);
        gains(i, c) = std::max(0.01, same_sign ? gains(i, c) * 0.8 : gains(i, c) + 0.2);
        velocity(i, c) = momentum * velocity(i, c) - kLearningRate * gains(i, c) * grad(i, c);
        y(i, c) += velocity(i, c);
      }
    }
    y.rowwise() -= y.colwise().mean();
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = {y(i, 0), y(i, 1), labels[static_cast<std::size_t>(i)]};
  }
  return out;
}

}  // namespace

std::vector<Point2> project_2d(const Tensor& embeddings, std::span<const int> labels,
                               Projection method, const TsneConfig& tsne) {
  if (embeddings.rank() != 2) {
    throw DimensionError("project_2d expects an N x D matrix, got " +
                         numerics::to_string(embeddings.shape()));
  }
  if (labels.size() != embeddings.dim(0)) {
    throw DimensionError("project_2d: " + std::to_string(embeddings.dim(0)) + " points but " +
                         std::to_string(labels.size()) + " labels");
  }
  const RowMatrix x = Eigen::Map<const RowMatrix>(
      embeddings.data(), static_cast<Eigen::Index>(embeddings.dim(0)),
      static_cast<Eigen::Index>(embeddings.dim(1)));
  return method == Projection::Pca ? pca_2d(x, labels) : tsne_2d(x, labels, tsne);
}

void write_points_csv(const std::filesystem::path& path, std::span<const Point2> points,
                      std::span<const std::string> label_names) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "x,y,label" << (label_names.empty() ? "" : ",driver") << '\n' << std::setprecision(17);
  for (const Point2& p : points) {
    out << p.x << ',' << p.y << ',' << p.label;
    if (!label_names.empty() && p.label >= 0 &&
        static_cast<std::size_t>(p.label) < label_names.size()) {
      out << ',' << label_names[static_cast<std::size_t>(p.label)];
    }
    out << '\n';
  }
}

}  // namespace driveid::eval
