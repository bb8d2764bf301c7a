#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "shoggoth/learner.hpp"

using namespace shoggoth;
using namespace shoggoth::learner;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

std::vector<int> random_labels(std::size_t n, int classes, Rng& rng) {
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(rng() % static_cast<std::uint64_t>(classes));
  return y;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-6, std::abs(a) + std::abs(b)); }

// Batch normalization written from its definition, independent of BrnState.
Matrix plain_batch_norm(const Matrix& x, double eps) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double mean = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) mean += x(i, j);
    mean /= static_cast<double>(x.rows());
    double var = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= static_cast<double>(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i, j) = (x(i, j) - mean) / std::sqrt(var + eps);
  }
  return out;
}

HeadModel random_head(std::size_t act, std::size_t classes, Rng& rng) {
  HeadModel h = HeadModel::zeros(act, classes, 0.05);
  h.weights = random_matrix(static_cast<Eigen::Index>(act), static_cast<Eigen::Index>(classes), rng);
  h.bias = random_matrix(static_cast<Eigen::Index>(classes), 1, rng).col(0);
  h.brn.running_mean = random_matrix(static_cast<Eigen::Index>(act), 1, rng, 0.3).col(0);
  h.brn.running_var = random_matrix(static_cast<Eigen::Index>(act), 1, rng, 0.3).col(0).array().abs() + 0.5;
  return h;
}

TwoStageModel small_model(ReplayTap tap, std::uint64_t seed) {
  Rng rng(seed);
  ModelShape shape{6, 7, 5, 3, tap};
  ModelInit init;
  init.r_max_clip = 1.0;
  init.d_max_clip = 0.0;
  return TwoStageModel::create(shape, init, rng);
}

}  // namespace

TEST(Head, GradientsMatchCentralDifferences) {
  Rng rng(21);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    HeadModel head = random_head(8, 4, rng);
    const Matrix x = random_matrix(12, 8, rng);
    const auto y = random_labels(12, 4, rng);
    const HeadGradients g = head_gradients(head, x, y);
    EXPECT_NEAR(g.mean_loss, head_batch_loss(head, x, y), 1e-12);
    for (Eigen::Index i = 0; i < head.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < head.weights.cols(); ++j) {
        HeadModel p = head, m = head;
        p.weights(i, j) += h;
        m.weights(i, j) -= h;
        const double num = (head_batch_loss(p, x, y) - head_batch_loss(m, x, y)) / (2 * h);
        ASSERT_LT(rel_err(g.weights(i, j), num), 1e-4);
      }
    }
    for (Eigen::Index j = 0; j < head.bias.size(); ++j) {
      HeadModel p = head, m = head;
      p.bias[j] += h;
      m.bias[j] -= h;
      const double num = (head_batch_loss(p, x, y) - head_batch_loss(m, x, y)) / (2 * h);
      ASSERT_LT(rel_err(g.bias[j], num), 1e-4);
    }
  }
}

TEST(Head, InputGradientsMatchWhenCorrectionIsFixed) {
  Rng rng(22);
  const double h = 1e-5;
  HeadModel head = random_head(5, 3, rng);
  head.brn.r_max_clip = 1.0;
  head.brn.d_max_clip = 0.0;
  const Matrix x = random_matrix(9, 5, rng);
  const auto y = random_labels(9, 3, rng);
  const HeadGradients g = head_gradients(head, x, y);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      Matrix p = x, m = x;
      p(i, j) += h;
      m(i, j) -= h;
      const double num = (head_batch_loss(head, p, y) - head_batch_loss(head, m, y)) / (2 * h);
      ASSERT_LT(rel_err(g.inputs(i, j), num), 1e-4);
    }
  }
}

TEST(Model, AllParameterGradientsMatchCentralDifferences) {
  const double h = 1e-5;
  for (ReplayTap tap : {ReplayTap::kInput, ReplayTap::kMid, ReplayTap::kPool}) {
    TwoStageModel model = small_model(tap, 5);
    Rng rng(9);
    const Matrix fresh = random_matrix(4, 6, rng);
    const Matrix replay = random_matrix(6, static_cast<Eigen::Index>(model.tap_dim()), rng);
    const auto y = random_labels(10, 3, rng);
    const ModelGradients g = model_gradients(model, fresh, replay, y);
    for (std::size_t l = 0; l < model.trunk.size(); ++l) {
      for (Eigen::Index i = 0; i < model.trunk[l].rows(); ++i) {
        for (Eigen::Index j = 0; j < model.trunk[l].cols(); ++j) {
          TwoStageModel p = model, m = model;
          p.trunk[l](i, j) += h;
          m.trunk[l](i, j) -= h;
          const double num = (model_batch_loss(p, fresh, replay, y) - model_batch_loss(m, fresh, replay, y)) / (2 * h);
          ASSERT_LT(rel_err(g.trunk[l](i, j), num), 1e-4) << to_string(tap) << " trunk " << l;
        }
      }
    }
    ASSERT_EQ(g.front.size(), model.front.projections().size());
    for (std::size_t l = 0; l < g.front.size(); ++l) {
      for (Eigen::Index i = 0; i < g.front[l].rows(); ++i) {
        for (Eigen::Index j = 0; j < g.front[l].cols(); ++j) {
          TwoStageModel p = model, m = model;
          p.front.projections()[l](i, j) += h;
          m.front.projections()[l](i, j) -= h;
          const double num = (model_batch_loss(p, fresh, replay, y) - model_batch_loss(m, fresh, replay, y)) / (2 * h);
          ASSERT_LT(rel_err(g.front[l](i, j), num), 1e-4) << to_string(tap) << " front " << l;
        }
      }
    }
  }
}

TEST(Model, FrozenFrontHasNoGradientAndDoesNotMove) {
  TwoStageModel model = small_model(ReplayTap::kPool, 6);
  model.front.set_lr_multiplier(0.0);
  Rng rng(3);
  const Matrix fresh = random_matrix(5, 6, rng);
  const Matrix replay = random_matrix(5, 5, rng);
  const auto y = random_labels(10, 3, rng);
  EXPECT_TRUE(model_gradients(model, fresh, replay, y).front.empty());
  const auto before = model.front.projections();
  train_step(model, fresh, replay, y);
  for (std::size_t l = 0; l < before.size(); ++l) EXPECT_EQ(model.front.projections()[l], before[l]);
}

TEST(Model, TrainingReducesLossOnSeparableData) {
  Rng rng(12);
  ModelShape shape;
  TwoStageModel model = TwoStageModel::create(shape, {}, rng);
  const Matrix means = random_matrix(4, 16, rng, 2.0);
  Matrix x(64, 16);
  std::vector<int> y(64);
  std::normal_distribution<double> g(0.0, 0.5);
  for (int i = 0; i < 64; ++i) {
    y[static_cast<std::size_t>(i)] = i % 4;
    for (int j = 0; j < 16; ++j) x(i, j) = means(i % 4, j) + g(rng);
  }
  const Matrix none(0, static_cast<Eigen::Index>(model.tap_dim()));
  const double first = model_batch_loss(model, x, none, y);
  for (int step = 0; step < 200; ++step) train_step(model, x, none, y);
  EXPECT_LT(model_batch_loss(model, x, none, y), 0.5 * first);
}

TEST(Model, NonFiniteStepLeavesModelUntouched) {
  TwoStageModel model = small_model(ReplayTap::kPool, 7);
  Rng rng(4);
  Matrix fresh = random_matrix(4, 6, rng);
  fresh(0, 0) = std::numeric_limits<double>::quiet_NaN();
  const Matrix replay(0, 5);
  const std::vector<int> y{0, 1, 2, 0};
  const auto bytes = serialize(model);
  EXPECT_THROW(train_step(model, fresh, replay, y), NonFiniteError);
  EXPECT_EQ(serialize(model), bytes);
}

TEST(Brn, ClipsOneZeroReduceToBatchNorm) {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    BrnState brn = BrnState::identity(7);
    brn.running_mean = random_matrix(7, 1, rng).col(0);
    brn.running_var = random_matrix(7, 1, rng).col(0).array().abs() + 0.1;
    brn.r_max_clip = 1.0;
    brn.d_max_clip = 0.0;
    const Matrix x = random_matrix(16, 7, rng, 3.0);
    const BrnBatch out = brn_normalize_training(brn, x);
    EXPECT_LT((out.normalized - plain_batch_norm(x, brn.epsilon)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Brn, CorrectionFactorsAreClipped) {
  BrnState brn = BrnState::identity(1);
  brn.running_var = Vector::Constant(1, 1e-4);
  brn.r_max_clip = 3.0;
  brn.d_max_clip = 5.0;
  Matrix x(4, 1);
  x << 100, 101, 102, 103;
  const BrnBatch out = brn_normalize_training(brn, x);
  EXPECT_DOUBLE_EQ(out.r[0], 3.0);
  EXPECT_DOUBLE_EQ(out.d[0], 5.0);
}

TEST(Brn, InferenceIsDeterministicGivenRunningStats) {
  Rng rng(2);
  BrnState brn = BrnState::identity(4);
  brn.running_mean = random_matrix(4, 1, rng).col(0);
  brn.running_var = Vector::Constant(4, 2.0);
  const Matrix x = random_matrix(10, 4, rng);
  const Matrix a = brn_normalize_inference(brn, x);
  const Matrix b = brn_normalize_inference(brn, x);
  EXPECT_EQ(a, b);
  // Row-wise evaluation gives the same numbers as batched evaluation.
  for (Eigen::Index i = 0; i < x.rows(); ++i) EXPECT_EQ(brn_normalize_inference(brn, x.row(i)), a.row(i));
  const Vector sd = (brn.running_var.array() + brn.epsilon).sqrt();
  EXPECT_NEAR(a(3, 2), (x(3, 2) - brn.running_mean[2]) / sd[2], 1e-15);
}

TEST(Brn, RunningStatsMoveByMomentum) {
  BrnState brn = BrnState::identity(2);
  brn.momentum = 0.1;
  update_running_stats(brn, Vector::Constant(2, 1.0), Vector::Constant(2, 3.0));
  EXPECT_NEAR(brn.running_mean[0], 0.1, 1e-15);
  EXPECT_NEAR(brn.running_var[1], 1.2, 1e-15);
}

TEST(Head, PredictionIsNormalized) {
  const Prediction p = prediction_from_logits((Vector(3) << 1000.0, 0.0, -1000.0).finished());
  EXPECT_EQ(p.predicted_class, 0);
  EXPECT_NEAR(p.scores.sum(), 1.0, 1e-12);
  EXPECT_NEAR(loss(p, 2), -std::log(kProbabilityFloor), 1e-9);
  EXPECT_THROW(loss(p, 3), ContractError);
}

TEST(Head, TrainingModeNeedsContext) {
  HeadModel h = HeadModel::zeros(3, 2, 0.1);
  h.brn.mode = BrnMode::kTraining;
  EXPECT_THROW(forward_head(h, Activation{Vector::Zero(3)}), ContractError);
}

TEST(Model, SerializeRoundTrip) {
  TwoStageModel model = small_model(ReplayTap::kMid, 8);
  const auto bytes = serialize(model);
  const TwoStageModel back = deserialize(bytes);
  EXPECT_EQ(serialize(back), bytes);
  const Vector x = Vector::LinSpaced(6, -1.0, 1.0);
  EXPECT_EQ(back.predict(x).scores, model.predict(x).scores);
  EXPECT_EQ(back.front.lr_multiplier(), model.front.lr_multiplier());
}

TEST(Model, TapSplitsStages) {
  EXPECT_EQ(small_model(ReplayTap::kInput, 1).tap_dim(), 6u);
  EXPECT_EQ(small_model(ReplayTap::kMid, 1).tap_dim(), 7u);
  EXPECT_EQ(small_model(ReplayTap::kPool, 1).tap_dim(), 5u);
  EXPECT_GT(small_model(ReplayTap::kPool, 1).front_macs(), small_model(ReplayTap::kMid, 1).front_macs());
  EXPECT_EQ(small_model(ReplayTap::kInput, 1).front_macs(), 0u);
  EXPECT_EQ(replay_tap_from_string("mid"), ReplayTap::kMid);
}

TEST(Front, DimensionMismatchRejected) {
  TwoStageModel model = small_model(ReplayTap::kPool, 1);
  EXPECT_THROW(model.tap_activation(Vector::Zero(5)), ContractError);
}
