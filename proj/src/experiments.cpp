#include "shoggoth/experiments.hpp"

#include <sstream>

#include <fmt/format.h>

namespace shoggoth::harness {

std::string RateSpec::label() const { return fixed ? fmt::format("{:g}", *fixed) : std::string("adaptive"); }

std::vector<RateSpec> parse_rates(const std::string& text) {
  std::vector<RateSpec> out;
  std::vector<std::string> errs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    item = b == std::string::npos ? std::string() : item.substr(b, e - b + 1);
    if (item == "adaptive") {
      out.push_back({});
      continue;
    }
    try {
      std::size_t used = 0;
      const double r = std::stod(item, &used);
      if (used != item.size() || !(r > 0.0)) throw std::invalid_argument(item);
      out.push_back({r});
    } catch (const std::exception&) {
      errs.push_back(fmt::format("rates: '{}' is neither a positive number nor 'adaptive'", item));
    }
  }
  if (out.empty() && errs.empty()) errs.emplace_back("rates: list is empty");
  if (!errs.empty()) throw ConfigError(std::move(errs));
  return out;
}

std::vector<RateSpec> default_rates() { return {{0.1}, {0.2}, {0.4}, {0.8}, {1.6}, {2.0}, {}}; }

std::vector<SweepRow> rate_sweep(const ScenarioConfig& cfg, std::span<const RateSpec> rates) {
  if (rates.empty()) throw ContractError("rate sweep needs at least one rate");
  std::vector<SweepRow> rows;
  for (const auto& entry : rates) {
    ScenarioConfig c = cfg;
    if (entry.fixed) {
      c.strategy = {StrategyKind::kPrompt, *entry.fixed};
    } else {
      c.strategy.kind = StrategyKind::kShoggoth;
    }
    const RunResult r = run_scenario(c);
    rows.push_back({entry.label(), r.summary.up_kbps, r.summary.down_kbps, r.summary.up_bytes, r.summary.mean_accuracy,
                    r.summary.mean_weighted_correct, r.summary.mean_rate, r.summary.sessions});
  }
  return rows;
}

std::vector<AblationRow> ablation(const ScenarioConfig& cfg) {
  struct Variant {
    const char* name;
    void (*apply)(ScenarioConfig&);
  };
  const Variant variants[] = {
      {"baseline", [](ScenarioConfig&) {}},
      {"input-layer replay", [](ScenarioConfig& c) { c.shape.tap = learner::ReplayTap::kInput; }},
      {"completely freezing", [](ScenarioConfig& c) { c.init.front_lr_multiplier = 0.0; }},
      {"mid-layer replay", [](ScenarioConfig& c) { c.shape.tap = learner::ReplayTap::kMid; }},
      {"no replay memory", [](ScenarioConfig& c) { c.trainer.replay_enabled = false; }},
  };
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    ScenarioConfig c = cfg;
    c.strategy.kind = StrategyKind::kShoggoth;
    v.apply(c);
    const RunResult r = run_scenario(c);
    rows.push_back({v.name, r.summary.mean_accuracy, r.summary.mean_forward_s, r.summary.mean_backward_s,
                    r.summary.mean_overall_s, r.summary.sessions});
  }
  return rows;
}

double heldout_accuracy(const learner::TwoStageModel& model, const ScenarioConfig& cfg, int domain) {
  Rng rng = make_rng(cfg.seed, RngStream::kHeldOut, static_cast<std::uint64_t>(domain));
  const auto samples = stream::sample_domain(cfg.stream.schedule.domains.at(static_cast<std::size_t>(domain)),
                                             cfg.stream.dim, cfg.forgetting.heldout, rng, domain);
  std::size_t hits = 0;
  for (const auto& f : samples) hits += model.predict(f.features).predicted_class == f.true_class ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

namespace {

stream::StreamConfig single_domain(const ScenarioConfig& cfg, int domain) {
  stream::StreamConfig sc = cfg.stream;
  sc.schedule.segments = {{0, domain}};
  sc.schedule.ramp_frames = 0;
  return sc;
}

std::vector<replay::LabeledSample> labelled_batch(stream::FrameStream& s, cloud::TeacherOracle& teacher,
                                                  std::size_t n, int every) {
  std::vector<replay::LabeledSample> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (int j = 1; j < every; ++j) s.next_frame();
    const stream::Frame f = s.next_frame();
    out.push_back({f.features, teacher.teach(f).label});
  }
  return out;
}

}  // namespace

ForgettingResult forgetting_experiment(const ScenarioConfig& cfg) {
  if (auto errs = validate(cfg); !errs.empty()) throw ConfigError(std::move(errs));
  const auto& fg = cfg.forgetting;
  const learner::TwoStageModel base = pretrained_model(cfg);
  ForgettingResult r;
  r.a_after_pretrain = heldout_accuracy(base, cfg, fg.domain_a);
  for (const bool with_replay : {true, false}) {
    learner::TwoStageModel model = base;
    trainer::TrainingSessionConfig tc = cfg.trainer;
    tc.replay_enabled = with_replay;
    trainer::EdgeTrainer tr(tc, cfg.seed);
    replay::ReplayMemory mem(tc.replay_capacity);
    cloud::TeacherOracle teacher(cfg.stream.classes, cfg.teacher, cfg.seed);
    stream::FrameStream stream_a(single_domain(cfg, fg.domain_a), cfg.seed);
    stream::FrameStream stream_b(single_domain(cfg, fg.domain_b), cfg.seed + 1);
    for (int s = 0; s < fg.sessions_a; ++s) {
      const auto batch = labelled_batch(stream_a, teacher, tc.batch_size, fg.sample_every);
      tr.run_training_session(model, mem, batch);
    }
    if (with_replay) r.a_after_a = heldout_accuracy(model, cfg, fg.domain_a);
    for (int s = 0; s < fg.sessions_b; ++s) {
      const auto batch = labelled_batch(stream_b, teacher, tc.batch_size, fg.sample_every);
      tr.run_training_session(model, mem, batch);
    }
    (with_replay ? r.a_with_replay : r.a_without_replay) = heldout_accuracy(model, cfg, fg.domain_a);
    (with_replay ? r.b_with_replay : r.b_without_replay) = heldout_accuracy(model, cfg, fg.domain_b);
  }
  return r;
}

std::vector<RunResult> compare_strategies(const ScenarioConfig& cfg) {
  std::vector<RunResult> out;
  for (auto k : {StrategyKind::kEdgeOnly, StrategyKind::kCloudOnly, StrategyKind::kPrompt, StrategyKind::kAmsLike,
                 StrategyKind::kShoggoth}) {
    ScenarioConfig c = cfg;
    c.strategy.kind = k;
    if (k == StrategyKind::kPrompt) c.strategy.fixed_rate = cfg.controller.r_max;
    out.push_back(run_scenario(c));
  }
  return out;
}

std::string metrics_csv(const RunResult& r) {
  std::string out = fmt::format("# shoggoth-metrics v1 scenario={} strategy={}\n", r.scenario, to_string(r.strategy.kind));
  out += "window_id,start_s,accuracy,mean_confidence,weighted_correct,phi_bar,rate,up_kbps,down_kbps,avg_fps,sessions_run\n";
  for (const auto& w : r.windows) {
    out += fmt::format("{},{:.3f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{}\n", w.window_id, w.start_s,
                       w.accuracy, w.mean_confidence, w.weighted_correct, w.phi_bar, w.rate, w.up_kbps, w.down_kbps,
                       w.avg_fps, w.sessions_run);
  }
  return out;
}

std::string sessions_csv(const RunResult& r) {
  std::string out = fmt::format("# shoggoth-sessions v1 scenario={} strategy={}\n", r.scenario, to_string(r.strategy.kind));
  out += "run_index,start_s,final_mean_loss,minibatches_run,memory_used,forward_s,backward_s,overall_s,aging_metric\n";
  for (const auto& s : r.sessions) {
    const auto& p = s.report;
    out += fmt::format("{},{:.3f},{:.6f},{},{},{:.6f},{:.6f},{:.6f},{:.6f}\n", p.run_index, s.start_s, p.final_mean_loss,
                       p.minibatches_run, p.memory_used, p.forward_seconds, p.backward_seconds, p.wall_clock_model,
                       p.aging_metric);
  }
  return out;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "# shoggoth-sweep v1\nrate,up_kbps,down_kbps,up_bytes,mean_accuracy,weighted_correct,mean_rate,sessions\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{:.6f},{:.6f},{},{:.6f},{:.6f},{:.6f},{}\n", r.rate, r.up_kbps, r.down_kbps, r.up_bytes,
                       r.mean_accuracy, r.mean_weighted_correct, r.mean_rate, r.sessions);
  }
  return out;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
  std::string out = "# shoggoth-ablation v1\nvariant,accuracy,forward_s,backward_s,overall_s,sessions\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f},{}\n", r.variant, r.accuracy, r.forward_s, r.backward_s,
                       r.overall_s, r.sessions);
  }
  return out;
}

std::string strategies_csv(std::span<const RunResult> runs) {
  std::string out =
      "# shoggoth-strategies v1\nstrategy,mean_accuracy,up_kbps,down_kbps,up_bytes,down_bytes,avg_fps,duty_cycle,"
      "sessions\n";
  for (const auto& r : runs) {
    const auto& s = r.summary;
    out += fmt::format("{},{:.6f},{:.6f},{:.6f},{},{},{:.6f},{:.6f},{}\n", to_string(r.strategy.kind), s.mean_accuracy,
                       s.up_kbps, s.down_kbps, s.up_bytes, s.down_bytes, s.avg_fps, s.duty_cycle, s.sessions);
  }
  return out;
}

std::string gain_cdf_csv(std::span<const CdfPoint> cdf) {
  std::string out = "# shoggoth-gain-cdf v1\ngain,cumulative_fraction\n";
  for (const auto& p : cdf) out += fmt::format("{:.6f},{:.6f}\n", p.gain, p.cumulative);
  return out;
}

std::string forgetting_csv(const ForgettingResult& f) {
  std::string out = "# shoggoth-forgetting v1\nmeasure,value\n";
  out += fmt::format("a_after_pretrain,{:.6f}\n", f.a_after_pretrain);
  out += fmt::format("a_after_a,{:.6f}\n", f.a_after_a);
  out += fmt::format("a_with_replay,{:.6f}\n", f.a_with_replay);
  out += fmt::format("a_without_replay,{:.6f}\n", f.a_without_replay);
  out += fmt::format("b_with_replay,{:.6f}\n", f.b_with_replay);
  out += fmt::format("b_without_replay,{:.6f}\n", f.b_without_replay);
  out += fmt::format("retention_gap,{:.6f}\n", f.retention_gap());
  return out;
}

}  // namespace shoggoth::harness
