#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shoggoth/harness.hpp"

namespace shoggoth::harness {

/// A fixed sampling rate, or the adaptive controller when empty.
struct RateSpec {
  std::optional<double> fixed;

  std::string label() const;
};

/// "0.1,0.2,adaptive" style lists. Throws ConfigError on bad entries.
std::vector<RateSpec> parse_rates(const std::string& text);
std::vector<RateSpec> default_rates();

struct SweepRow {
  std::string rate;
  double up_kbps = 0.0;
  double down_kbps = 0.0;
  std::uint64_t up_bytes = 0;
  double mean_accuracy = 0.0;
  double mean_weighted_correct = 0.0;
  double mean_rate = 0.0;
  int sessions = 0;
};

/// One full run per rate on the identical seeded stream: fixed rates use the
/// Prompt pipeline at that rate, the adaptive row uses Shoggoth.
std::vector<SweepRow> rate_sweep(const ScenarioConfig& cfg, std::span<const RateSpec> rates);

struct AblationRow {
  std::string variant;
  double accuracy = 0.0;
  double forward_s = 0.0;
  double backward_s = 0.0;
  double overall_s = 0.0;
  int sessions = 0;
};

/// Baseline, input-layer replay, completely freezing, mid-layer replay and
/// no replay, each a full Shoggoth run. Times are per-session means.
std::vector<AblationRow> ablation(const ScenarioConfig& cfg);

struct ForgettingResult {
  double a_after_pretrain = 0.0;
  double a_after_a = 0.0;
  double a_with_replay = 0.0;     // held-out domain A after the B sessions
  double a_without_replay = 0.0;
  double b_with_replay = 0.0;     // held-out domain B after the B sessions
  double b_without_replay = 0.0;

  double retention_gap() const { return a_with_replay - a_without_replay; }
};

/// Pre-training, then sessions_a sessions on domain A and sessions_b on
/// domain B, once with replay and once without; held-out accuracy measured
/// on i.i.d. samples of each domain.
ForgettingResult forgetting_experiment(const ScenarioConfig& cfg);

/// Top-1 accuracy of `model` on fresh i.i.d. samples of `domain`.
double heldout_accuracy(const learner::TwoStageModel& model, const ScenarioConfig& cfg, int domain);

/// All five strategies on the same scenario and seed.
std::vector<RunResult> compare_strategies(const ScenarioConfig& cfg);

// CSV renderers. Each output starts with a versioned comment line followed
// by a header row; numbers use fixed formatting so equal runs give equal bytes.
std::string metrics_csv(const RunResult& r);
std::string sessions_csv(const RunResult& r);
std::string sweep_csv(std::span<const SweepRow> rows);
std::string ablation_csv(std::span<const AblationRow> rows);
std::string strategies_csv(std::span<const RunResult> runs);
std::string gain_cdf_csv(std::span<const CdfPoint> cdf);
std::string forgetting_csv(const ForgettingResult& f);

}  // namespace shoggoth::harness
