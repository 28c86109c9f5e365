#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "driveid/data/synthetic.hpp"
#include "driveid/error.hpp"
#include "driveid/training/training.hpp"
#include "test_support.hpp"

namespace driveid::training {
namespace {

using driveid::testing::pattern_recording;
using driveid::testing::scratch_dir;
using numerics::Rng;

TEST(TripletLoss, CoincidentEmbeddingsGiveMargin) {
  const std::vector<double> e = {0.3, -1.2, 4.0};
  EXPECT_EQ(triplet_loss(e, e, e, 1.0), 1.0);
}

TEST(TripletLoss, SatisfiedMarginGivesZero) {
  EXPECT_EQ(triplet_loss(std::vector<double>{0, 0}, std::vector<double>{0, 0},
                         std::vector<double>{2, 0}, 1.0),
            0.0);
}

TEST(TripletLoss, HandExample) {
  EXPECT_NEAR(triplet_loss(std::vector<double>{0}, std::vector<double>{1},
                           std::vector<double>{1.2}, 1.0),
              0.56, 1e-15);
}

TEST(TripletLoss, LengthMismatch) {
  EXPECT_THROW(triplet_loss(std::vector<double>{0}, std::vector<double>{1, 2},
                            std::vector<double>{1}, 1.0),
               DimensionError);
}

TEST(TripletLoss, DifferentiableFormMatchesDirect) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto r = driveid::testing::random_tensor({1, 5}, rng);
    const auto p = driveid::testing::random_tensor({1, 5}, rng);
    const auto n = driveid::testing::random_tensor({1, 5}, rng);
    numerics::Tape tape;
    const double v =
        triplet_loss(tape.constant(r), tape.constant(p), tape.constant(n), 1.0).value().item();
    EXPECT_EQ(v, triplet_loss(r.values(), p.values(), n.values(), 1.0));
  }
}

std::vector<data::Window> windows_for(std::size_t drivers, std::size_t per_driver) {
  std::vector<data::Window> out;
  auto rec = std::make_shared<const data::Recording>(
      pattern_recording("d", data::Area::Highway, 10, 1.0, 1));
  for (std::size_t d = 0; d < drivers; ++d) {
    for (std::size_t i = 0; i < per_driver; ++i) {
      data::Window w;
      w.source = rec;
      w.driver = static_cast<int>(d);
      out.push_back(w);
    }
  }
  return out;
}

TEST(TripletSampler, TripletInvariants) {
  const auto windows = windows_for(2, 2);
  const TripletSampler sampler(windows);
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const Triplet t = sampler.draw(rng);
    EXPECT_NE(t.anchor, t.positive);
    EXPECT_EQ(windows[t.anchor].driver, windows[t.positive].driver);
    EXPECT_NE(windows[t.anchor].driver, windows[t.negative].driver);
  }
}

TEST(TripletSampler, Deterministic) {
  const auto windows = windows_for(3, 4);
  Rng a(9);
  Rng b(9);
  const auto x = sample_triplets(windows, 50, a);
  const auto y = sample_triplets(windows, 50, b);
  ASSERT_EQ(x.size(), 50u);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(x[i].anchor, y[i].anchor);
    EXPECT_EQ(x[i].positive, y[i].positive);
    EXPECT_EQ(x[i].negative, y[i].negative);
  }
}

TEST(TripletSampler, AnchorDriversUniform) {
  const auto windows = windows_for(5, 6);
  const TripletSampler sampler(windows);
  Rng rng(11);
  std::map<int, int> counts;
  for (int i = 0; i < 10000; ++i) ++counts[windows[sampler.draw(rng).anchor].driver];
  const double sigma = std::sqrt(10000 * 0.2 * 0.8);
  for (const auto& [driver, count] : counts) EXPECT_NEAR(count, 2000.0, 3 * sigma) << driver;
}

TEST(TripletSampler, RejectsDegenerateInputs) {
  EXPECT_THROW(TripletSampler(windows_for(1, 5)), DataError);
  auto windows = windows_for(3, 3);
  windows.erase(windows.begin() + 4, windows.begin() + 6);  // driver 1 keeps one window
  const std::vector<std::string> names = {"driver_00", "driver_01", "driver_02"};
  try {
    TripletSampler sampler(windows, names);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("driver_01"), std::string::npos);
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  numerics::Tensor theta({3}, {1, 2, 3});
  const numerics::Tensor before = theta;
  std::vector<numerics::Tensor*> params = {&theta};
  std::vector<numerics::Tensor> grads = {numerics::Tensor({3})};
  AdamState state;
  adam_step(params, grads, state, 4e-4);
  EXPECT_EQ(theta, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  numerics::Tensor theta({1}, {0.5});
  std::vector<numerics::Tensor*> params = {&theta};
  std::vector<numerics::Tensor> grads = {numerics::Tensor({1}, {1.0})};
  AdamState state;
  adam_step(params, grads, state, 4e-4);
  // m_hat = 1, v_hat = 1: step = lr / (1 + eps).
  EXPECT_NEAR(theta[0] - 0.5, -4e-4, 1e-11);
}

TEST(Adam, TwoStepsMatchReference) {
  numerics::Tensor theta({2}, {0.5, -1.0});
  std::vector<numerics::Tensor*> params = {&theta};
  const std::vector<numerics::Tensor> grads = {numerics::Tensor({2}, {0.3, -2.0})};
  AdamState state;
  adam_step(params, grads, state, 1e-2);
  adam_step(params, grads, state, 1e-2);
  for (std::size_t i = 0; i < 2; ++i) {
    double x = i == 0 ? 0.5 : -1.0;
    const double g = grads[0][i];
    double m = 0.0;
    double v = 0.0;
    for (int t = 1; t <= 2; ++t) {
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      const double mh = m / (1.0 - std::pow(0.9, t));
      const double vh = v / (1.0 - std::pow(0.999, t));
      x -= 1e-2 * mh / (std::sqrt(vh) + 1e-8);
    }
    EXPECT_NEAR(theta[i], x, 1e-15);
  }
}

TEST(Adam, RejectsMismatchedGradients) {
  numerics::Tensor theta({2});
  std::vector<numerics::Tensor*> params = {&theta};
  AdamState state;
  EXPECT_THROW(adam_step(params, std::vector<numerics::Tensor>{numerics::Tensor({3})}, state, 1e-3),
               DimensionError);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.decay = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(parse_mode("cross_entropy"), Mode::CrossEntropy);
  EXPECT_EQ(parse_mining("semi_hard"), Mining::SemiHard);
  EXPECT_THROW(parse_mode("contrastive"), ConfigError);
}

/// Four well-separated synthetic drivers, 2 s windows, small encoder.
struct SmallSetup {
  data::Dataset dataset;
  encoder::EncoderConfig encoder;

  SmallSetup() {
    data::SyntheticConfig sc;
    sc.area_duration_s = {40, 40, 40, 40};
    data::WindowingConfig wc;
    wc.interval_length_s = 2.0;
    wc.interval_gap_s = 1.0;
    const data::Dataset raw =
        data::build_dataset(data::generate_synthetic(data::make_profiles(4, 1.0, 11), sc), wc);
    dataset = data::normalize(raw, data::Normalizer::fit(raw.train));
    encoder.window_length = 200;
    encoder.kernel_size = 4;
    encoder.hidden_channels = 8;
    encoder.tcn_embedding = 8;
    encoder.wavelet_embedding_per_branch = 4;
  }
};

const SmallSetup& setup() {
  static const SmallSetup s;
  return s;
}

TEST(Train, ZeroEpochsReturnsInitialParameters) {
  TrainConfig c;
  c.epochs = 0;
  const TrainResult r = train(setup().dataset, setup().encoder, c);
  EXPECT_TRUE(r.loss_history.empty());
  const encoder::EncoderParams init = encoder::build_encoder(setup().encoder, c.seed);
  const auto a = r.params.tensors();
  const auto b = init.tensors();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i], *b[i]);
}

TEST(Train, RejectsMismatchedEncoder) {
  encoder::EncoderConfig e = setup().encoder;
  e.in_channels = 30;
  EXPECT_THROW(train(setup().dataset, e, TrainConfig{}), ConfigError);
}

TEST(Train, TripletLossDecreasesFromMargin) {
  TrainConfig c;
  c.epochs = 20;
  c.batch_size = 32;
  std::vector<EpochStats> stats;
  const TrainResult r =
      train(setup().dataset, setup().encoder, c, [&](const EpochStats& s) { stats.push_back(s); });
  ASSERT_EQ(r.loss_history.size(), 20u);
  ASSERT_EQ(stats.size(), 20u);
  EXPECT_GT(r.loss_history.front(), 0.8);
  EXPECT_LT(r.loss_history.front(), 1.2);
  const double tail =
      std::accumulate(r.loss_history.end() - 5, r.loss_history.end(), 0.0) / 5.0;
  EXPECT_LT(tail, 0.8 * r.loss_history.front());
  for (std::size_t k = 0; k < r.learning_rates.size(); ++k) {
    EXPECT_EQ(r.learning_rates[k], c.learning_rate * std::pow(c.decay, static_cast<double>(k)));
  }
}

TEST(Train, BitwiseReproducible) {
  TrainConfig c;
  c.epochs = 2;
  const TrainResult a = train(setup().dataset, setup().encoder, c);
  const TrainResult b = train(setup().dataset, setup().encoder, c);
  EXPECT_EQ(a.loss_history, b.loss_history);
  EXPECT_EQ(*a.params.tensors()[0], *b.params.tensors()[0]);
  c.seed = 2;
  const TrainResult other = train(setup().dataset, setup().encoder, c);
  EXPECT_NE(other.loss_history, a.loss_history);
}

TEST(Train, ThreadedRunIsReproducible) {
  TrainConfig c;
  c.epochs = 1;
  c.threads = 2;
  const TrainResult a = train(setup().dataset, setup().encoder, c);
  const TrainResult b = train(setup().dataset, setup().encoder, c);
  EXPECT_EQ(a.loss_history, b.loss_history);
}

TEST(Train, CrossEntropyModeProducesHead) {
  TrainConfig c;
  c.epochs = 3;
  c.mode = Mode::CrossEntropy;
  const TrainResult r = train(setup().dataset, setup().encoder, c);
  ASSERT_TRUE(r.classifier_head.has_value());
  EXPECT_EQ(r.classifier_head->weight.shape(),
            (numerics::Shape{setup().encoder.embedding_size(), 4}));
  // Starts near log(4) and decreases.
  EXPECT_NEAR(r.loss_history.front(), std::log(4.0), 0.7);
  EXPECT_LT(r.loss_history.back(), r.loss_history.front());
}

TEST(Train, SemiHardMiningRuns) {
  TrainConfig c;
  c.epochs = 1;
  c.mining = Mining::SemiHard;
  const TrainResult r = train(setup().dataset, setup().encoder, c);
  ASSERT_EQ(r.loss_history.size(), 1u);
  EXPECT_TRUE(std::isfinite(r.loss_history[0]));
}

TEST(Train, DivergenceReportsEpochBatchAndRate) {
  TrainConfig c;
  c.epochs = 3;
  c.learning_rate = 1e300;
  try {
    train(setup().dataset, setup().encoder, c);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch"), std::string::npos);
    EXPECT_NE(msg.find("batch"), std::string::npos);
    EXPECT_NE(msg.find("learning rate"), std::string::npos);
  }
}

TEST(Train, ManifestAndLossHistoryFiles) {
  TrainConfig c;
  c.epochs = 2;
  const TrainResult r = train(setup().dataset, setup().encoder, c);
  const auto dir = scratch_dir("train_outputs");
  write_run_manifest(dir / "run.json", setup().encoder, c, r);
  write_loss_history(dir / "loss.csv", r);
  std::ifstream in(dir / "loss.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "epoch,learning_rate,mean_loss");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 2);
  EXPECT_GT(std::filesystem::file_size(dir / "run.json"), 100u);
}

}  // namespace
}  // namespace driveid::training
