// shoggoth command-line entry point.
//
//   shoggoth validate --scenario drift_ab
//   shoggoth run      --scenario drift_ab --strategy edge-only --out out/
//   shoggoth sweep    --scenario drift_ab --rates 0.1,0.2,adaptive
//   shoggoth ablate   --scenario drift_ab
//   shoggoth report   --scenario drift_ab
//
// Every flag can also come from the environment with the SHOGGOTH_ prefix
// (SHOGGOTH_SEED, SHOGGOTH_OUT, ...). Flags win over the environment.
//
// Exit codes: 0 ok, 2 usage, 3 scenario or file not found, 4 invalid
// configuration, 5 non-finite metrics, 6 output i/o failure, 1 other.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "shoggoth/experiments.hpp"

namespace fs = std::filesystem;
using namespace shoggoth;
using namespace shoggoth::harness;

namespace {

enum Exit : int { kOk = 0, kOther = 1, kUsage = 2, kNotFound = 3, kInvalid = 4, kNonFinite = 5, kIo = 6 };

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string scenario;
  std::string strategy;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string rates = "0.1,0.2,0.4,0.8,1.6,2.0,adaptive";
  std::optional<std::int64_t> duration_frames;
  std::optional<double> noise_rate;
  std::string log_level = "warn";
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--scenario", o.scenario, "scenario name or path")->required()->envname("SHOGGOTH_SCENARIO");
  cmd->add_option("--strategy", o.strategy, "edge-only | cloud-only | prompt | ams-like | shoggoth")
      ->envname("SHOGGOTH_STRATEGY");
  cmd->add_option("--seed", o.seed, "override the scenario seed")->envname("SHOGGOTH_SEED");
  cmd->add_option("--out", o.out, "output directory (default: scenario output_dir)")->envname("SHOGGOTH_OUT");
  cmd->add_option("--duration-frames", o.duration_frames, "override the run length in frames")
      ->envname("SHOGGOTH_DURATION_FRAMES");
  cmd->add_option("--noise-rate", o.noise_rate, "override the teacher label noise")->envname("SHOGGOTH_NOISE_RATE");
  cmd->add_option("--log-level", o.log_level, "trace | debug | info | warn | error | off")
      ->envname("SHOGGOTH_LOG_LEVEL");
}

ScenarioConfig load(const Options& o) {
  ScenarioConfig cfg = load_scenario(resolve_scenario(o.scenario));
  std::vector<std::string> errs;
  if (!o.strategy.empty()) {
    if (auto k = strategy_from_string(o.strategy)) {
      cfg.strategy.kind = *k;
    } else {
      errs.push_back(fmt::format("--strategy: unknown strategy '{}'", o.strategy));
    }
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.duration_frames) cfg.duration_frames = *o.duration_frames;
  if (o.noise_rate) cfg.teacher.noise_rate = *o.noise_rate;
  if (!o.out.empty()) cfg.output_dir = o.out;
  for (auto& e : validate(cfg)) errs.push_back(std::move(e));
  if (!errs.empty()) throw ConfigError(std::move(errs));
  return cfg;
}

fs::path write_file(const ScenarioConfig& cfg, const std::string& suffix, const std::string& body) {
  const fs::path dir = cfg.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  const fs::path path = dir / (cfg.name + suffix);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << body;
  f.close();
  if (!f) throw IoError(fmt::format("cannot write {}", path.string()));
  std::cout << path.string() << '\n';
  return path;
}

int cmd_validate(const Options& o) {
  const ScenarioConfig cfg = load(o);
  std::cout << fmt::format("{}: ok ({} frames, {} domains, strategy {})\n", cfg.name, cfg.duration_frames,
                           cfg.stream.schedule.domains.size(), to_string(cfg.strategy.kind));
  return kOk;
}

int cmd_run(const Options& o) {
  const ScenarioConfig cfg = load(o);
  const RunResult r = run_scenario(cfg);
  const std::string stem = fmt::format("-{}", to_string(cfg.strategy.kind));
  write_file(cfg, stem + ".csv", metrics_csv(r));
  write_file(cfg, stem + ".sessions.csv", sessions_csv(r));
  const auto& s = r.summary;
  std::cerr << fmt::format("accuracy {:.4f}  up {:.3f} kbps  down {:.3f} kbps  sessions {}  avg fps {:.2f}\n",
                           s.mean_accuracy, s.up_kbps, s.down_kbps, s.sessions, s.avg_fps);
  return kOk;
}

int cmd_sweep(const Options& o) {
  const ScenarioConfig cfg = load(o);
  const auto rates = parse_rates(o.rates);
  const auto rows = rate_sweep(cfg, rates);
  write_file(cfg, "-sweep.csv", sweep_csv(rows));
  return kOk;
}

int cmd_ablate(const Options& o) {
  const ScenarioConfig cfg = load(o);
  write_file(cfg, "-ablation.csv", ablation_csv(ablation(cfg)));
  return kOk;
}

int cmd_report(const Options& o) {
  const ScenarioConfig cfg = load(o);
  const auto runs = compare_strategies(cfg);
  write_file(cfg, "-strategies.csv", strategies_csv(runs));
  const RunResult* edge = nullptr;
  const RunResult* sho = nullptr;
  for (const auto& r : runs) {
    if (r.strategy.kind == StrategyKind::kEdgeOnly) edge = &r;
    if (r.strategy.kind == StrategyKind::kShoggoth) sho = &r;
  }
  const auto cdf = gain_cdf(sho->windows, edge->windows);
  write_file(cfg, "-gain-cdf.csv", gain_cdf_csv(cdf));
  write_file(cfg, "-forgetting.csv", forgetting_csv(forgetting_experiment(cfg)));
  std::cerr << fmt::format("windows with positive gain over edge-only: {:.3f}\n", positive_gain_fraction(cdf));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge-cloud collaborative inference simulator"};
  app.require_subcommand(1, 1);
  Options o;
  auto* validate_cmd = app.add_subcommand("validate", "check a scenario file");
  auto* run_cmd = app.add_subcommand("run", "simulate one strategy, write per-window and per-session CSVs");
  auto* sweep_cmd = app.add_subcommand("sweep", "fixed and adaptive sampling rates, one summary CSV");
  auto* ablate_cmd = app.add_subcommand("ablate", "replay and freezing ablations, one summary CSV");
  auto* report_cmd = app.add_subcommand("report", "all strategies, gain CDF and forgetting experiment");
  for (auto* c : {validate_cmd, run_cmd, sweep_cmd, ablate_cmd, report_cmd}) add_common(c, o);
  sweep_cmd->add_option("--rates", o.rates, "comma list of fps values and 'adaptive'")->envname("SHOGGOTH_RATES");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    set_log_level(o.log_level);
    if (*validate_cmd) return cmd_validate(o);
    if (*run_cmd) return cmd_run(o);
    if (*sweep_cmd) return cmd_sweep(o);
    if (*ablate_cmd) return cmd_ablate(o);
    return cmd_report(o);
  } catch (const ScenarioNotFound& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNotFound;
  } catch (const ConfigError& e) {
    for (const auto& p : e.problems()) std::cerr << "invalid: " << p << '\n';
    return kInvalid;
  } catch (const NonFiniteMetrics& e) {
    std::cerr << "non-finite: " << e.what() << '\n';
    return kNonFinite;
  } catch (const learner::NonFiniteError& e) {
    std::cerr << "non-finite: " << e.what() << '\n';
    return kNonFinite;
  } catch (const IoError& e) {
    std::cerr << "io: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
}
