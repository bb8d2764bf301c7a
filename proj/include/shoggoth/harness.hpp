#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "shoggoth/scenario.hpp"

namespace shoggoth::harness {

/// One row per window of `window_frames` stream frames.
struct WindowRow {
  std::int64_t window_id = 0;
  double start_s = 0.0;
  double accuracy = 0.0;
  double mean_confidence = 0.0;
  double weighted_correct = 0.0;  // mean of confidence * correct
  double phi_bar = 0.0;           // last value received by the edge
  double rate = 0.0;              // sampling rate at window end (fps)
  double up_kbps = 0.0;
  double down_kbps = 0.0;
  double avg_fps = 0.0;
  int sessions_run = 0;  // sessions finished inside the window
};

struct SessionRecord {
  double start_s = 0.0;
  trainer::SessionReport report;
};

struct RunSummary {
  double mean_accuracy = 0.0;
  double mean_weighted_correct = 0.0;
  double up_kbps = 0.0;
  double down_kbps = 0.0;
  std::uint64_t up_bytes = 0;
  std::uint64_t down_bytes = 0;
  double avg_fps = 0.0;
  double duty_cycle = 0.0;
  double mean_rate = 0.0;
  int sessions = 0;
  int aborted_sessions = 0;
  double mean_forward_s = 0.0;
  double mean_backward_s = 0.0;
  double mean_overall_s = 0.0;
  double duration_s = 0.0;
};

struct RunResult {
  std::string scenario;
  Strategy strategy;
  std::vector<WindowRow> windows;
  std::vector<SessionRecord> sessions;
  RunSummary summary;
  transport::LinkStats link;  // sender-side accounting
};

/// A metric came out NaN or infinite.
class NonFiniteMetrics : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Student after offline pre-training on the scenario's pre-training domain,
/// with the front learning-rate multiplier set to the configured value.
learner::TwoStageModel pretrained_model(const ScenarioConfig& cfg);

/// Simulates one strategy over the scenario's stream. Deterministic given the
/// configuration. Throws ConfigError if the configuration does not validate
/// and NonFiniteMetrics if a reported metric is not finite.
RunResult run_scenario(const ScenarioConfig& cfg);

/// Fraction of confidences strictly above theta. Throws ContractError on an
/// empty window or theta outside (0, 1).
double estimate_alpha(std::span<const double> confidences, double theta);

struct ActivityInterval {
  double start = 0.0;
  double end = 0.0;  // exclusive
};

/// Fraction of the integer seconds s in [window_start, window_end) at which
/// some training session is active (start <= s < end). 0 for an empty window.
double collect_lambda(std::span<const ActivityInterval> trace, double window_start, double window_end);

struct CdfPoint {
  double gain = 0.0;
  double cumulative = 0.0;
};

/// Sorted per-window accuracy differences a - b with cumulative fractions.
/// Throws ContractError if the series do not cover identical windows.
std::vector<CdfPoint> gain_cdf(std::span<const WindowRow> a, std::span<const WindowRow> b);

/// Fraction of windows in which a's accuracy exceeds b's.
double positive_gain_fraction(std::span<const CdfPoint> cdf);

}  // namespace shoggoth::harness
