// Acceptance checks 1-9. Prints one PASS/FAIL line per criterion; exits
// nonzero if any criterion fails. Arguments select a subset, e.g. "2 4 5".

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "driveid/data/synthetic.hpp"
#include "driveid/encoder/encoder.hpp"
#include "driveid/eval/eval.hpp"
#include "driveid/gbdt/gbdt.hpp"
#include "driveid/numerics/gradcheck.hpp"
#include "driveid/numerics/ops.hpp"
#include "driveid/training/training.hpp"
#include "driveid/wavelet/haar.hpp"

namespace {

using namespace driveid;
using numerics::Rng;
using numerics::Shape;
using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.normal(0.0, 1.0);
  return t;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("driveid_acceptance_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------
// 1. Gradient fidelity

/// Dot product of a graph output with fixed random weights.
Var contract(Var y, std::uint64_t seed) {
  Tape& tape = y.tape();
  Rng rng(seed);
  Var w = tape.constant(random_tensor(y.shape(), rng));
  Var zero = tape.constant(Tensor(y.shape()));
  // y . w = ((y + w)^2 - (y - w)^2) / 4
  return numerics::scale(numerics::sub(numerics::squared_l2_distance(numerics::add(y, w), zero),
                                       numerics::squared_l2_distance(numerics::sub(y, w), zero)),
                         0.25);
}

Outcome criterion1() {
  constexpr double kStep = 1e-5;
  Rng rng(101);
  double worst = 0.0;
  std::string worst_name;
  auto check = [&](const std::string& name, std::vector<Tensor> params,
                   const std::function<Var(Tape&, std::span<const Var>)>& f) {
    const auto r = numerics::finite_difference_check(
        [&](Tape& tape, std::span<const Var> p) { return contract(f(tape, p), 7); }, params,
        kStep);
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      worst_name = name;
    }
  };

  check("linear", {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng), random_tensor({2}, rng)},
        [](Tape&, std::span<const Var> p) { return numerics::linear(p[0], p[1], p[2]); });
  for (std::size_t dilation : {1u, 2u, 4u}) {
    for (std::size_t stride : {1u, 3u}) {
      check("conv1d", {random_tensor({2, 3, 13}, rng), random_tensor({4, 3, 3}, rng),
                       random_tensor({4}, rng)},
            [=](Tape&, std::span<const Var> p) {
              return numerics::conv1d_causal(p[0], p[1], p[2], dilation, stride);
            });
    }
  }
  Tensor away = random_tensor({12}, rng);
  for (double& v : away.values()) v += v > 0 ? 0.1 : -0.1;
  check("relu", {away}, [](Tape&, std::span<const Var> p) { return numerics::relu(p[0]); });
  check("add/sub/scale/add_scalar", {random_tensor({6}, rng), random_tensor({6}, rng)},
        [](Tape&, std::span<const Var> p) {
          return numerics::add_scalar(
              numerics::sub(numerics::scale(p[0], -1.5), numerics::add(p[1], p[0])), 0.3);
        });
  check("dropout", {random_tensor({3, 7}, rng)}, [](Tape&, std::span<const Var> p) {
    numerics::DropoutStream stream(5);
    return numerics::dropout(p[0], 0.3, true, stream);
  });
  check("squared_l2_distance/sum", {random_tensor({6}, rng), random_tensor({6}, rng)},
        [](Tape&, std::span<const Var> p) {
          return numerics::add(numerics::squared_l2_distance(p[0], p[1]), numerics::sum(p[0]));
        });
  check("last_frame/decimate_tail/reshape/concat", {random_tensor({2, 3, 8}, rng)},
        [](Tape&, std::span<const Var> p) {
          const std::vector<Var> parts = {
              numerics::last_frame(p[0]),
              numerics::reshape(numerics::decimate_tail(p[0], 3), Shape{2, 9})};
          return numerics::concat_columns(parts);
        });
  const std::vector<int> labels = {2, 0, 1};
  check("softmax_cross_entropy", {random_tensor({3, 4}, rng)},
        [&](Tape&, std::span<const Var> p) { return numerics::softmax_cross_entropy(p[0], labels); });
  // Triplet hinge kept in its active region.
  check("triplet_loss",
        {random_tensor({1, 5}, rng), random_tensor({1, 5}, rng), random_tensor({1, 5}, rng)},
        [](Tape&, std::span<const Var> p) { return training::triplet_loss(p[0], p[1], p[2], 50.0); });

  encoder::EncoderConfig c;
  c.in_channels = 4;
  c.window_length = 32;
  c.kernel_size = 4;
  c.levels = 3;
  c.hidden_channels = 5;
  c.tcn_embedding = 6;
  c.wavelet_embedding_per_branch = 3;
  const encoder::EncoderParams structure = encoder::build_encoder(c, 31);
  std::vector<Tensor> params;
  for (const Tensor* t : structure.tensors()) params.push_back(*t);
  const Tensor x0 = random_tensor({4, 32}, rng);
  const Tensor x1 = random_tensor({4, 32}, rng);
  for (bool training : {false, true}) {
    for (auto readout : {encoder::Readout::FullSequence, encoder::Readout::StridedLastFrame}) {
      const auto r = numerics::finite_difference_check(
          [&](Tape& tape, std::span<const Var> vars) {
            encoder::EncoderGraph g(structure, vars);
            numerics::DropoutStream stream(4);
            Var total = tape.constant(Tensor::scalar(0.0));
            for (const Tensor* x : {&x0, &x1}) {
              total = numerics::add(total, contract(g.embed(*x, training, &stream, readout), 9));
            }
            return total;
          },
          params, kStep);
      if (r.max_relative_error >= worst) {
        worst = r.max_relative_error;
        worst_name = "encoder";
      }
    }
  }
  return {worst <= 1e-4, fmt("max relative error %.3g (%s), bound 1e-4", worst, worst_name.c_str())};
}

// ---------------------------------------------------------------------------
// 2. Haar invariants

Outcome criterion2() {
  Rng rng(202);
  double worst_energy = 0.0;
  double worst_recon = 0.0;
  std::vector<double> channel(1000);
  for (int w = 0; w < 1000; ++w) {
    const Tensor x = random_tensor({31, 1000}, rng);
    const auto f = wavelet::window_wavelet_features(x);
    double e_in = 0.0;
    double e_out = 0.0;
    for (double v : x.values()) e_in += v * v;
    for (double v : f.approx) e_out += v * v;
    for (double v : f.detail) e_out += v * v;
    worst_energy = std::max(worst_energy, std::abs(e_out - e_in) / e_in);
    double err = 0.0;
    double norm = 0.0;
    for (std::size_t c = 0; c < 31; ++c) {
      const auto back = wavelet::haar_inverse(std::span(f.approx).subspan(c * 500, 500),
                                              std::span(f.detail).subspan(c * 500, 500));
      for (std::size_t t = 0; t < 1000; ++t) {
        const double d = back[t] - x[c * 1000 + t];
        err += d * d;
        norm += x[c * 1000 + t] * x[c * 1000 + t];
      }
    }
    worst_recon = std::max(worst_recon, std::sqrt(err / norm));
  }
  return {worst_energy <= 1e-9 && worst_recon <= 1e-9,
          fmt("energy rel err %.3g, reconstruction rel err %.3g, bound 1e-9", worst_energy,
              worst_recon)};
}

// ---------------------------------------------------------------------------
// 3. Triplet loss oracle

Outcome criterion3() {
  Rng rng(303);
  constexpr double kMargin = 1.0;
  std::size_t mismatches = 0;
  std::size_t coincide_bad = 0;
  std::size_t satisfied = 0;
  std::size_t satisfied_bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t d = 1 + rng.uniform_index(62);
    std::vector<double> r(d), p(d), n(d);
    const double spread = 0.05 + rng.uniform() * 2.0;
    for (std::size_t k = 0; k < d; ++k) {
      r[k] = rng.normal(0.0, 1.0);
      p[k] = r[k] + rng.normal(0.0, spread);
      n[k] = r[k] + rng.normal(0.0, spread * (0.5 + rng.uniform()));
    }
    double rp = 0.0;
    double rn = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      rp += (r[k] - p[k]) * (r[k] - p[k]);
      rn += (r[k] - n[k]) * (r[k] - n[k]);
    }
    const double direct = std::max(0.0, rp - rn + kMargin);
    const double loss = training::triplet_loss(r, p, n, kMargin);
    mismatches += loss != direct;
    if (rn >= rp + kMargin) {
      ++satisfied;
      satisfied_bad += loss != 0.0;
    }
    coincide_bad += training::triplet_loss(r, r, r, kMargin) != kMargin;
  }
  return {mismatches == 0 && coincide_bad == 0 && satisfied_bad == 0 && satisfied > 0,
          fmt("%zu mismatches, %zu coincident != margin, %zu/%zu satisfied-margin nonzero",
              mismatches, coincide_bad, satisfied_bad, satisfied)};
}

// ---------------------------------------------------------------------------
// 4. Windowing formula

Outcome criterion4() {
  Rng rng(404);
  std::size_t bad = 0;
  auto rec = std::make_shared<data::Recording>();
  rec->channels = {"x"};
  rec->frames = 40000;
  rec->values.assign(rec->frames, 0.0);
  for (int i = 0; i < 100; ++i) {
    const std::size_t r = rng.uniform_index(40001);
    data::WindowingConfig wc;
    wc.interval_length_s = static_cast<double>(1 + rng.uniform_index(2000)) / 100.0;
    wc.interval_gap_s = static_cast<double>(1 + rng.uniform_index(500)) / 100.0;
    const std::size_t lf = wc.length_frames();
    const std::size_t gf = wc.gap_frames();
    const auto windows = data::make_windows(rec, 0, data::FrameRange{0, r}, wc, 0);
    const std::size_t expected = r >= lf ? (r - lf) / gf + 1 : 0;
    bad += windows.size() != expected;
  }
  data::WindowingConfig table_scale;
  auto long_rec = std::make_shared<data::Recording>();
  long_rec->channels = {"x"};
  long_rec->frames = 24000;
  long_rec->values.assign(24000, 0.0);
  const std::size_t count =
      data::make_windows(long_rec, 0, data::FrameRange{0, 24000}, table_scale, 0).size();
  return {bad == 0 && count == 116,
          fmt("%zu/100 random cases disagree; (240 s, 10 s, 2 s) gives %zu windows", bad, count)};
}

// ---------------------------------------------------------------------------
// 5. Evaluation combinatorics

eval::ProbabilityTable random_table(std::size_t classes, std::size_t rows, std::uint64_t seed) {
  Rng rng(seed);
  eval::ProbabilityTable t;
  t.probabilities = Tensor({rows, classes});
  for (std::size_t i = 0; i < rows; ++i) {
    double z = 0.0;
    for (std::size_t k = 0; k < classes; ++k) z += (t.probabilities[i * classes + k] = rng.uniform());
    for (std::size_t k = 0; k < classes; ++k) t.probabilities[i * classes + k] /= z;
    t.labels.push_back(static_cast<int>(i % classes));
    t.areas.push_back(data::Area::Urban);
  }
  return t;
}

Outcome criterion5() {
  std::vector<std::string> failures;
  const eval::ProbabilityTable table = random_table(6, 20, 505);
  eval::EvalConfig cfg;
  for (std::size_t n : {2u, 3u, 4u, 5u}) {
    // Brute force: every subset of the six labels that contains the truth.
    std::size_t correct = 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < table.rows(); ++i) {
      const int truth = table.labels[i];
      const auto p = table.row(i);
      for (unsigned mask = 0; mask < 64u; ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) != n || !((mask >> truth) & 1u)) continue;
        bool wins = true;
        for (int k = 0; k < 6; ++k) {
          if (k != truth && ((mask >> k) & 1u) && (p[k] > p[truth] || (p[k] == p[truth] && k < truth))) {
            wins = false;
          }
        }
        ++total;
        correct += wins;
      }
    }
    if (n <= 3) {
      const eval::Tally t = eval::nway_accuracy(table, n, cfg);
      if (t.correct != correct || t.total != total) failures.push_back(fmt("nway n=%zu", n));
    } else {
      // Sampled protocol: every draw is scored exactly like the brute force rule.
      std::size_t sampled_correct = 0;
      std::size_t sampled_total = 0;
      for (std::size_t i = 0; i < table.rows(); ++i) {
        const int truth = table.labels[i];
        const auto p = table.row(i);
        eval::for_each_candidate_set(truth, 6, n, i, cfg, [&](std::span<const int> set) {
          bool wins = true;
          for (int k : set) {
            if (k != truth && (p[k] > p[truth] || (p[k] == p[truth] && k < truth))) wins = false;
          }
          ++sampled_total;
          sampled_correct += wins;
        });
      }
      const eval::Tally t = eval::nway_accuracy(table, n, cfg);
      if (t.correct != sampled_correct || t.total != sampled_total ||
          sampled_total != table.rows() * cfg.sampling_cap) {
        failures.push_back(fmt("nway n=%zu", n));
      }
    }
  }
  std::size_t sets2 = 0;
  std::size_t sets3 = 0;
  eval::for_each_candidate_set(0, 51, 2, 0, cfg, [&](std::span<const int>) { ++sets2; });
  eval::for_each_candidate_set(0, 51, 3, 0, cfg, [&](std::span<const int>) { ++sets3; });
  if (sets2 != 50 || sets3 != 1225) failures.push_back(fmt("set counts %zu/%zu", sets2, sets3));

  eval::ProbabilityTable one_hot;
  one_hot.probabilities = Tensor({24, 6});
  for (std::size_t i = 0; i < 24; ++i) {
    one_hot.probabilities[i * 6 + i % 6] = 1.0;
    one_hot.labels.push_back(static_cast<int>(i % 6));
    one_hot.areas.push_back(data::Area::Urban);
  }
  for (std::size_t n : {2u, 3u, 4u, 5u}) {
    if (eval::nota_accuracy(table, n, 1.0, cfg).accuracy() != 0.5 ||
        eval::nota_accuracy(one_hot, n, 1.0, cfg).accuracy() != 0.5) {
      failures.push_back(fmt("nota threshold 1 n=%zu", n));
    }
    if (eval::nway_accuracy(one_hot, n, cfg).accuracy() != 1.0) {
      failures.push_back(fmt("one-hot nway n=%zu", n));
    }
  }
  std::string detail = "nway brute force n=2..5, set counts 50/1225, nota@1 = 0.5, one-hot = 1.0";
  if (!failures.empty()) {
    detail = "failed:";
    for (const auto& f : failures) detail += " " + f;
  }
  return {failures.empty(), detail};
}

// ---------------------------------------------------------------------------
// 6. GBDT correctness

Outcome criterion6() {
  const auto gh = gbdt::softmax_grad_hess(std::vector<double>{0, 0, 0}, 0);
  const Tensor one({1, 1}, {0.0});
  const std::vector<gbdt::FeatureBins> bins = {gbdt::FeatureBins::fit(one.values(), 64)};
  const std::vector<std::size_t> counts = {bins[0].bin_count()};
  gbdt::GbdtConfig root_cfg;
  root_cfg.lambda_l2 = 0.0;
  root_cfg.learning_rate = 1.0;  // pre-shrinkage value
  const std::vector<std::size_t> rows = {0};
  const std::vector<std::size_t> features = {0};
  const auto tree = gbdt::grow_tree(gbdt::bin_matrix(one, bins), counts,
                                    std::span(gh.grad).first(1), std::span(gh.hess).first(1),
                                    rows, features, root_cfg);
  const double leaf = tree.nodes[0].value;

  const double centers[3][2] = {{0, 0}, {8, 0}, {0, 8}};
  Rng rng(606);
  Tensor x({300, 2});
  std::vector<int> y;
  for (std::size_t i = 0; i < 300; ++i) {
    const int label = static_cast<int>(i % 3);
    y.push_back(label);
    x[i * 2] = centers[label][0] + rng.normal(0.0, 1.0);
    x[i * 2 + 1] = centers[label][1] + rng.normal(0.0, 1.0);
  }
  gbdt::GbdtConfig full;
  full.bagging_fraction = 1.0;
  full.feature_fraction = 1.0;
  const auto curve = gbdt::training_logloss_curve(gbdt::fit(x, y, 3, full), x, y);
  double worst_rise = 0.0;
  for (std::size_t r = 1; r < curve.size(); ++r) worst_rise = std::max(worst_rise, curve[r] - curve[r - 1]);

  const gbdt::GbdtModel model = gbdt::fit(x, y, 3, gbdt::GbdtConfig{});
  const Tensor p = gbdt::predict_proba(model, x);
  std::size_t correct = 0;
  const std::vector<int> all = {0, 1, 2};
  for (std::size_t i = 0; i < 300; ++i) {
    correct += gbdt::predict_restricted(p.values().subspan(i * 3, 3), all, 0.0) == y[i];
  }
  const double accuracy = correct / 300.0;
  const auto path = scratch("gbdt") / "model.json";
  gbdt::save_model(path, model);
  const bool round_trip = gbdt::predict_proba(gbdt::load_model(path), x) == p;

  const bool pass = std::abs(leaf - 3.0) <= 1e-12 && worst_rise <= 1e-9 && accuracy >= 0.99 &&
                    round_trip;
  return {pass, fmt("leaf %.15g, max logloss rise %.3g, train accuracy %.4f, round trip %s", leaf,
                    worst_rise, accuracy, round_trip ? "identical" : "DIFFERS")};
}

// ---------------------------------------------------------------------------
// 7. End-to-end synthetic identification

data::Dataset synthetic_dataset(std::size_t drivers, const data::SyntheticConfig& sc) {
  return data::build_dataset(data::generate_synthetic(data::make_profiles(drivers, 1.0, 11), sc),
                             data::WindowingConfig{});
}

Outcome criterion7() {
  const data::Dataset raw = synthetic_dataset(8, data::SyntheticConfig{});
  const eval::PipelineConfig cfg;
  const eval::PipelineRun run = eval::run_pipeline(raw, cfg, [](const training::EpochStats& s) {
    std::cout << "  [7] epoch " << s.epoch << " loss " << s.mean_loss << " (" << s.seconds << " s)"
              << std::endl;
  });
  const auto table = eval::classify(run.training.params, run.classifier, run.dataset.test);
  const double pairwise = eval::nway_accuracy(table, 2, cfg.eval).accuracy();
  const double eight_way = eval::confusion_matrix(table).accuracy;
  const double minutes = run.training.wall_seconds / 60.0;
  return {pairwise >= 0.85 && eight_way >= 0.5 && minutes <= 30.0,
          fmt("pairwise %.4f (>= 0.85), 8-way %.4f (>= 0.5), training %.1f min (<= 30), %zu test "
              "windows",
              pairwise, eight_way, minutes, table.rows())};
}

// ---------------------------------------------------------------------------
// 8. Directional ablations

/// Smaller encoder and data so three seeds of five trainings stay affordable.
eval::PipelineConfig ablation_config(std::uint64_t seed) {
  eval::PipelineConfig cfg;
  cfg.encoder.kernel_size = 8;
  cfg.encoder.levels = 7;  // receptive field 1779 covers 15 s windows
  cfg.encoder.hidden_channels = 8;
  cfg.encoder.tcn_embedding = 16;
  cfg.training.epochs = 5;
  cfg.training.seed = seed;
  cfg.gbdt.seed = seed;
  cfg.eval.seed = seed;
  cfg.eval.sampling_cap = 1000;
  return cfg;
}

Outcome criterion8() {
  data::SyntheticConfig sc;
  sc.area_duration_s = {200.0, 200.0, 200.0, 200.0};  // eval split holds 15 s windows
  const data::Dataset raw = synthetic_dataset(8, sc);
  int votes_features = 0;
  int votes_intervals = 0;
  int votes_nota = 0;
  std::ostringstream detail;
  detail.precision(3);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const eval::PipelineConfig cfg = ablation_config(seed);
    const eval::PipelineRun run = eval::run_pipeline(raw, cfg);
    const double all = eval::eval_pairwise(run, cfg);

    data::GroupMask speed_acc;
    speed_acc.keep_only = std::set<data::ChannelGroup>{data::ChannelGroup::Speed,
                                                      data::ChannelGroup::Acceleration};
    const double reduced = eval::ablate_features(raw, cfg, std::vector{speed_acc}).at(0).pairwise;

    const std::vector<double> lengths = {5.0, 15.0};
    const auto sweep = eval::interval_sweep(raw, cfg, lengths);
    const double p5 = sweep.at(0).pairwise;
    const double p15 = sweep.at(1).pairwise;

    const auto test = eval::classify(run.training.params, run.classifier, run.dataset.test);
    const auto validation = eval::classify(run.training.params, run.classifier, run.dataset.eval);
    const eval::EvalReport report =
        eval::evaluate(test, validation, run.dataset.drivers, cfg.eval);
    bool nota_below = !report.nota.empty();
    for (const auto& [n, tally] : report.nota) {
      nota_below = nota_below && tally.accuracy() < report.nway.at(n).accuracy();
    }

    votes_features += reduced < all;
    votes_intervals += p5 <= all && all <= p15;
    votes_nota += nota_below;
    detail << " seed " << seed << ": all " << all << ", speed+acc " << reduced << ", 5/10/15 s "
           << p5 << "/" << all << "/" << p15 << ", nota";
    for (const auto& [n, tally] : report.nota) {
      detail << " n" << n << " " << tally.accuracy() << "<" << report.nway.at(n).accuracy();
    }
    detail << ";";
    std::cout << "  [8]" << detail.str().substr(detail.str().rfind(" seed")) << std::endl;
  }
  std::ostringstream summary;
  summary << "majority votes: speed+acc < all " << votes_features << "/3, intervals non-decreasing "
          << votes_intervals << "/3, nota < n-way " << votes_nota << "/3;" << detail.str();
  return {votes_features >= 2 && votes_intervals >= 2 && votes_nota >= 2, summary.str()};
}

// ---------------------------------------------------------------------------
// 9. Determinism

Outcome criterion9() {
  const auto dir = scratch("determinism");
  {
    std::ofstream out(dir / "config.json");
    out << R"({
  "synthetic": {"drivers": 4, "generator": {"area_duration_s": [100, 100, 100, 100]}},
  "windowing": {"interval_length_s": 5},
  "encoder": {"hidden_channels": 8, "tcn_embedding": 16, "kernel_size": 8, "levels": 7},
  "training": {"epochs": 2},
  "eval": {"group_sizes": [2, 3], "sampling_cap": 200}
})";
  }
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  std::vector<std::string> losses;
  std::vector<std::string> reports;
  for (const char* name : {"run_a", "run_b"}) {
    for (const char* command : {"train", "eval"}) {
      cli::RunSpec spec;
      spec.command = command;
      spec.config_path = dir / "config.json";
      spec.out = dir / name;
      spec.seed = 5;
      spec.single_thread = true;
      std::ostringstream log;
      if (cli::run(spec, log, std::cerr) != cli::kExitOk) {
        return {false, std::string("command '") + command + "' failed"};
      }
    }
    losses.push_back(slurp(dir / name / cli::files::kLossHistory));
    reports.push_back(slurp(dir / name / cli::files::kReport));
  }
  const bool same_loss = !losses[0].empty() && losses[0] == losses[1];
  const bool same_report = !reports[0].empty() && reports[0] == reports[1];
  return {same_loss && same_report,
          fmt("loss history %s (%zu bytes), report %s (%zu bytes)",
              same_loss ? "identical" : "DIFFERS", losses[0].size(),
              same_report ? "identical" : "DIFFERS", reports[0].size())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria = {
      criterion1, criterion2, criterion3, criterion4, criterion5,
      criterion6, criterion7, criterion8, criterion9};
  // Wall-clock limits in seconds; 7 checks its own training-time budget.
  const std::map<int, double> limits = {{1, 60.0}, {2, 60.0}, {6, 60.0}};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  bool all_pass = true;
  for (int id = 1; id <= static_cast<int>(criteria.size()); ++id) {
    if (!selected.empty() && !selected.contains(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[id - 1]();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (const auto it = limits.find(id); it != limits.end() && seconds > it->second) {
      outcome.pass = false;
      outcome.detail += fmt("; exceeded %.0f s limit", it->second);
    }
    all_pass = all_pass && outcome.pass;
    std::cout << "criterion " << id << ": " << (outcome.pass ? "PASS" : "FAIL") << " - "
              << outcome.detail << " [" << fmt("%.1f", seconds) << " s]" << std::endl;
  }
  return all_pass ? 0 : 1;
}
