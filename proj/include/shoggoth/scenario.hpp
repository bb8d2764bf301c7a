#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "shoggoth/cloud.hpp"
#include "shoggoth/learner.hpp"
#include "shoggoth/stream.hpp"
#include "shoggoth/trainer.hpp"
#include "shoggoth/transport.hpp"

namespace shoggoth::harness {

enum class StrategyKind { kEdgeOnly, kCloudOnly, kPrompt, kAmsLike, kShoggoth };

const char* to_string(StrategyKind kind);
std::optional<StrategyKind> strategy_from_string(std::string_view s);

struct Strategy {
  StrategyKind kind = StrategyKind::kShoggoth;
  double fixed_rate = 2.0;  // used by kPrompt only
};

struct PretrainConfig {
  int domain = -1;  // -1: no pre-training
  std::size_t samples = 1500;
  int epochs = 8;
};

struct TransportConfig {
  transport::CompressionModel compression;
  double link_latency_s = 0.05;
  transport::LinkKind link = transport::LinkKind::kSim;
  double upload_interval_s = 60.0;
  double lambda_window_s = 300.0;  // trailing horizon of the reported utilization
};

struct ForgettingConfig {
  int domain_a = 0;
  int domain_b = 1;
  int sessions_a = 10;
  int sessions_b = 10;
  std::size_t heldout = 2000;
  int sample_every = 15;  // stream frames between labelled samples
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  std::int64_t duration_frames = 108000;
  std::size_t window_frames = 300;
  Strategy strategy;
  stream::StreamConfig stream;
  PretrainConfig pretrain;
  learner::ModelShape shape;
  learner::ModelInit init;
  trainer::TrainingSessionConfig trainer;
  cloud::ControllerParams controller;
  cloud::TeacherConfig teacher;
  TransportConfig transport;
  ForgettingConfig forgetting;
  std::string output_dir = "out";

  double duration_seconds() const { return static_cast<double>(duration_frames) / stream.fps; }
};

/// Every problem with field paths; empty means the configuration is runnable.
std::vector<std::string> validate(const ScenarioConfig& cfg);

class ScenarioNotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kScenarioHeader = "shoggoth-scenario v1";

/// Parses the sectioned key = value format (see scenarios/README in the
/// repository). Unknown sections or keys, malformed values and failed
/// validation are all reported together in one ConfigError.
ScenarioConfig parse_scenario(std::string_view text);

/// Throws ScenarioNotFound if the file cannot be read.
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// A path to an existing file is used as is; otherwise `name_or_path` is
/// looked up as <dir>/<name>.scn in $SHOGGOTH_SCENARIO_DIR, then in the
/// scenario directory of the source tree.
std::filesystem::path resolve_scenario(const std::string& name_or_path);

}  // namespace shoggoth::harness
