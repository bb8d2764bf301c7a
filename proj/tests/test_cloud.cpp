#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "shoggoth/cloud.hpp"

using namespace shoggoth;
using namespace shoggoth::cloud;

namespace {

// Direct evaluation of the rate update, written out term by term.
double rate_oracle(const ControllerParams& p, double r, double phi, double alpha, double lam_prev, double lam_next) {
  const double r_phi = p.eta_r * (phi - p.phi_target);
  const double r_alpha = alpha < p.alpha_target ? p.eta_alpha * (p.alpha_target - alpha) : 0.0;
  const double r_lambda = (1.0 + lam_next - lam_prev) * r;
  const double raw = r_phi + r_alpha + r_lambda;
  return raw < p.r_min ? p.r_min : (raw > p.r_max ? p.r_max : raw);
}

ControllerState state_at(double rate, ControllerParams p = {}) {
  ControllerState s = ControllerState::initial(p);
  s.rate = rate;
  return s;
}

stream::Frame frame(std::int64_t id, int cls) {
  stream::Frame f;
  f.frame_id = id;
  f.true_class = cls;
  f.features = Eigen::VectorXd::Zero(2);
  return f;
}

TeacherOutput output_with(std::vector<double> scores) {
  TeacherOutput o;
  o.scores = Eigen::Map<Eigen::VectorXd>(scores.data(), static_cast<Eigen::Index>(scores.size()));
  Eigen::Index arg = 0;
  o.scores.maxCoeff(&arg);
  o.label = static_cast<int>(arg);
  return o;
}

}  // namespace

TEST(Controller, HandEvaluatedExample) {
  ControllerParams p;
  p.eta_r = 0.5;
  p.phi_target = 0.2;
  p.eta_alpha = 1.0;
  p.alpha_target = 0.8;
  ControllerState s = state_at(1.0, p);
  s.lambda_prev = 0.3;
  const double r = update_rate(s, 0.3, 0.9, 0.3);
  EXPECT_NEAR(r, 1.05, 1e-12);
  EXPECT_NEAR(r, rate_oracle(p, 1.0, 0.3, 0.9, 0.3, 0.3), 1e-15);
  EXPECT_DOUBLE_EQ(s.rate, r);
}

TEST(Controller, FixedPointAtTargets) {
  ControllerParams p;
  ControllerState s = state_at(1.0, p);
  s.lambda_prev = 0.4;
  EXPECT_EQ(update_rate(s, p.phi_target, p.alpha_target, 0.4), 1.0);
  EXPECT_EQ(update_rate(s, p.phi_target, 0.95, 0.4), 1.0);
}

TEST(Controller, ClipsBothEnds) {
  ControllerParams p;
  // raw 3.5: phi term 0.5 * (phi - 0.15) = 2.5 on top of r = 1.
  ControllerState hi = state_at(1.0, p);
  EXPECT_EQ(update_rate(hi, 5.15, 1.0, 0.0), 2.0);
  // raw 0.02: r = 0.02 + 0 with lambda unchanged and phi term 0.
  ControllerState lo = state_at(0.1, p);
  lo.lambda_prev = 0.0;
  EXPECT_EQ(update_rate(lo, p.phi_target - 0.16, 1.0, 0.0), 0.1);
}

TEST(Controller, LambdaTermScalesPreviousRate) {
  ControllerParams p;
  ControllerState s = state_at(1.0, p);
  s.lambda_prev = 0.1;
  EXPECT_NEAR(update_rate(s, p.phi_target, 1.0, 0.5), 1.4, 1e-12);
  EXPECT_DOUBLE_EQ(s.lambda_prev, 0.5);
  EXPECT_NEAR(update_rate(s, p.phi_target, 1.0, 0.2), 1.4 * 0.7, 1e-12);
}

TEST(Controller, NonFiniteInputKeepsRate) {
  ControllerState s = state_at(0.7);
  s.lambda_prev = 0.2;
  EXPECT_EQ(update_rate(s, std::numeric_limits<double>::quiet_NaN(), 0.5, 0.3), 0.7);
  EXPECT_EQ(update_rate(s, 0.2, std::numeric_limits<double>::infinity(), 0.3), 0.7);
  EXPECT_EQ(s.lambda_prev, 0.2);
}

TEST(Controller, LambdaOutsideUnitIntervalRejected) {
  ControllerState s = state_at(1.0);
  EXPECT_THROW(update_rate(s, 0.2, 0.9, 1.5), ContractError);
  EXPECT_THROW(update_rate(s, 0.2, 0.9, -0.1), ContractError);
}

TEST(Controller, RandomInputsMatchOracleAndStayInBounds) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ControllerParams p;
  for (int i = 0; i < 2000; ++i) {
    const double r = p.r_min + (p.r_max - p.r_min) * u(rng);
    const double phi = 10.0 * u(rng);
    const double alpha = u(rng);
    const double lp = u(rng);
    const double ln = u(rng);
    ControllerState s = state_at(r, p);
    s.lambda_prev = lp;
    const double got = update_rate(s, phi, alpha, ln);
    ASSERT_NEAR(got, rate_oracle(p, r, phi, alpha, lp, ln), 1e-12);
    ASSERT_GE(got, p.r_min);
    ASSERT_LE(got, p.r_max);
  }
}

TEST(ControllerParams, ValidationReportsFields) {
  ControllerParams p;
  p.r_min = 3.0;
  p.theta = 1.5;
  const auto errs = validate(p);
  ASSERT_FALSE(errs.empty());
  EXPECT_TRUE(std::any_of(errs.begin(), errs.end(), [](const std::string& e) { return e.find("theta") != e.npos; }));
}

TEST(Teacher, NoiselessLabelsMatchGroundTruth) {
  TeacherOracle t(4, {0.0, 0.1}, 5);
  std::vector<stream::Frame> frames;
  for (int i = 0; i < 200; ++i) frames.push_back(frame(i, i % 4));
  const auto out = t.label_frames(frames);
  ASSERT_EQ(out.size(), frames.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out[i].label, frames[i].true_class);
    EXPECT_EQ(out[i].frame_id, frames[i].frame_id);
    EXPECT_NEAR(out[i].scores.sum(), 1.0, 1e-12);
    EXPECT_NEAR(out[i].scores[out[i].label], 0.9 + 0.1 / 4, 1e-12);
  }
}

TEST(Teacher, NoiseRateConcentrates) {
  TeacherOracle t(4, {0.1, 0.1}, 17);
  std::vector<stream::Frame> frames;
  for (int i = 0; i < 10000; ++i) frames.push_back(frame(i, i % 4));
  const auto out = t.label_frames(frames);
  int wrong = 0;
  for (std::size_t i = 0; i < out.size(); ++i) wrong += out[i].label != frames[i].true_class ? 1 : 0;
  // Binomial(10000, 0.1): std-dev 30, so +-100 is more than 3 sigma.
  EXPECT_NEAR(wrong / 10000.0, 0.1, 0.01);
}

TEST(Teacher, EmptyInputRejected) {
  TeacherOracle t(4, {}, 1);
  EXPECT_THROW(t.label_frames({}), ContractError);
}

TEST(Phi, IdenticalOneHotScoresGiveZero) {
  const std::vector<TeacherOutput> outs{output_with({0, 1, 0, 0}), output_with({0, 1, 0, 0}),
                                        output_with({0, 1, 0, 0})};
  const auto phi = compute_phi(outs);
  ASSERT_EQ(phi.per_frame.size(), 2u);
  EXPECT_NEAR(phi.mean, 0.0, 1e-12);
}

TEST(Phi, UniformAfterConfidentGivesLogC) {
  const std::vector<TeacherOutput> outs{output_with({0.97, 0.01, 0.01, 0.01}),
                                        output_with({0.25, 0.25, 0.25, 0.25})};
  EXPECT_NEAR(compute_phi(outs).mean, std::log(4.0), 1e-12);
}

TEST(Phi, DomainCutRaisesMean) {
  TeacherOracle t(4, {0.0, 0.1}, 3);
  std::vector<stream::Frame> steady;
  std::vector<stream::Frame> cut;
  for (int i = 0; i < 40; ++i) {
    steady.push_back(frame(i, 1));
    cut.push_back(frame(i, i < 20 ? 1 : (i % 4)));
  }
  EXPECT_GT(compute_phi(t.label_frames(cut)).mean, compute_phi(t.label_frames(steady)).mean);
}

TEST(Phi, NeedsTwoOutputs) {
  const std::vector<TeacherOutput> one{output_with({1, 0})};
  EXPECT_THROW(compute_phi(one), ContractError);
}

TEST(CloudNode, BatchCarriesOneLabelPerFrameAndBoundedRate) {
  CloudNode node(4, {}, {}, 8);
  node.register_device(7);
  node.report_stats(7, 0.5, 0.0);
  std::vector<stream::Frame> frames;
  for (int i = 0; i < 30; ++i) frames.push_back(frame(i * 15, (i / 3) % 4));
  const auto resp = node.handle_batch(7, frames);
  ASSERT_EQ(resp.labels.size(), frames.size());
  ASSERT_EQ(resp.frame_ids.size(), frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) EXPECT_EQ(resp.labels[i], frames[i].true_class);
  EXPECT_GE(resp.new_rate, 0.1);
  EXPECT_LE(resp.new_rate, 2.0);
  EXPECT_DOUBLE_EQ(node.device(7).controller.rate, resp.new_rate);
}

TEST(CloudNode, FixedRateDeviceIgnoresController) {
  CloudNode node(4, {}, {}, 8);
  node.register_device(1, 0.4);
  node.report_stats(1, 0.0, 0.9);
  std::vector<stream::Frame> frames;
  for (int i = 0; i < 10; ++i) frames.push_back(frame(i, i % 4));
  EXPECT_EQ(node.handle_batch(1, frames).new_rate, 0.4);
}

TEST(CloudNode, DevicesKeepSeparateControllers) {
  CloudNode node(4, {}, {}, 8);
  node.register_device(1);
  node.register_device(2);
  node.report_stats(1, 0.0, 0.0);
  node.report_stats(2, 1.0, 0.0);
  std::vector<stream::Frame> frames;
  for (int i = 0; i < 10; ++i) frames.push_back(frame(i, 0));
  const double r1 = node.handle_batch(1, frames).new_rate;
  const double r2 = node.handle_batch(2, frames).new_rate;
  EXPECT_GT(r1, r2);
}

TEST(CloudNode, LoneFrameUsesTargetPhi) {
  CloudNode node(4, {}, {}, 8);
  node.register_device(3);
  const std::vector<stream::Frame> one{frame(0, 2)};
  EXPECT_DOUBLE_EQ(node.handle_batch(3, one).phi_bar, ControllerParams{}.phi_target);
}
