#include "shoggoth/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace shoggoth::trainer {

std::vector<std::string> validate(const TrainingSessionConfig& cfg) {
  std::vector<std::string> errs;
  if (cfg.epochs < 1) errs.emplace_back("trainer.epochs: must be >= 1");
  if (cfg.minibatch_size < 1) errs.emplace_back("trainer.minibatch: must be >= 1");
  if (cfg.batch_size < 1) errs.emplace_back("trainer.batch: must be >= 1");
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    errs.emplace_back("trainer.learning_rate: must be a finite non-negative number");
  }
  return errs;
}

CostModel CostModel::calibrated() {
  // Steady state of the default configuration: frozen two-stage front
  // (16 -> 48 -> 32), 4-way head, N = 300, M = 1500, K = 64, 8 epochs.
  const learner::ModelShape shape;
  const TrainingSessionConfig cfg;
  const double front = static_cast<double>(shape.input_dim * shape.mid_dim + shape.mid_dim * shape.act_dim);
  const double head = static_cast<double>(shape.act_dim * shape.classes);
  const double per_epoch_batches =
      std::ceil(static_cast<double>(cfg.batch_size + cfg.replay_capacity) / static_cast<double>(cfg.minibatch_size));
  const double samples = per_epoch_batches * static_cast<double>(cfg.minibatch_size);
  const double fwd = cfg.epochs * (static_cast<double>(cfg.batch_size) * front + samples * head);
  const double bwd = cfg.epochs * samples * 2.0 * head;
  return {17.8 / fwd, 0.8 / bwd};
}

double CostModel::forward_seconds(const learner::TwoStageModel& model, std::size_t fresh, std::size_t replayed) const {
  const auto macs = static_cast<double>(fresh * model.front_macs() +
                                        (fresh + replayed) * (model.trunk_macs() + model.head_macs()));
  return macs * forward_seconds_per_mac;
}

double CostModel::backward_seconds(const learner::TwoStageModel& model, std::size_t fresh, std::size_t replayed) const {
  double macs = 2.0 * static_cast<double>((fresh + replayed) * (model.trunk_macs() + model.head_macs()));
  if (model.front.lr_multiplier() > 0.0) macs += 2.0 * static_cast<double>(fresh * model.front_macs());
  return macs * backward_seconds_per_mac;
}

EdgeTrainer::EdgeTrainer(TrainingSessionConfig cfg, std::uint64_t seed, CostModel cost)
    : cfg_(cfg), cost_(cost), rng_(make_rng(seed, RngStream::kTrainer)) {
  if (auto errs = validate(cfg_); !errs.empty()) throw ConfigError(std::move(errs));
}

SessionReport EdgeTrainer::run_training_session(learner::TwoStageModel& model, replay::ReplayMemory& mem,
                                                std::span<const replay::LabeledSample> labeled_batch) {
  if (labeled_batch.empty()) throw ContractError("training session needs a non-empty labelled batch");

  const learner::TwoStageModel model_snapshot = model;
  const replay::ReplayMemory mem_snapshot = mem;
  const Rng rng_snapshot = rng_;
  const bool first_done_snapshot = first_minibatch_done_;
  auto rollback = [&] {
    model = model_snapshot;
    mem = mem_snapshot;
    rng_ = rng_snapshot;
    first_minibatch_done_ = first_done_snapshot;
  };

  const std::size_t n = labeled_batch.size();
  const std::size_t m = cfg_.replay_enabled ? mem.size() : 0;
  const std::size_t k = cfg_.minibatch_size;
  const std::size_t batches = (n + m + k - 1) / k;
  const auto in_dim = static_cast<Eigen::Index>(model.input_dim());
  const auto tap_dim = static_cast<Eigen::Index>(model.tap_dim());

  SessionReport report;
  report.run_index = runs_ + 1;
  report.memory_used = m;
  model.head.learning_rate = cfg_.learning_rate;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  try {
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng_);
      double epoch_loss = 0.0;
      std::size_t cursor = 0;
      for (std::size_t b = 0; b < batches; ++b) {
        // Fresh samples are split as evenly as possible over the mini-batches.
        const std::size_t n_fresh = n / batches + (b < n % batches ? 1 : 0);
        const std::size_t n_replay = m > 0 ? k - n_fresh : 0;
        learner::Matrix fresh(static_cast<Eigen::Index>(n_fresh), in_dim);
        learner::Matrix replayed(static_cast<Eigen::Index>(n_replay), tap_dim);
        std::vector<int> labels;
        labels.reserve(n_fresh + n_replay);
        for (std::size_t i = 0; i < n_fresh; ++i) {
          const auto& s = labeled_batch[order[cursor++]];
          fresh.row(static_cast<Eigen::Index>(i)) = s.features.transpose();
          labels.push_back(s.label);
        }
        const auto picks = replay::draw_indices(m, n_replay, rng_, "replay");
        for (std::size_t i = 0; i < n_replay; ++i) {
          const auto& e = mem.entries()[picks[i]];
          replayed.row(static_cast<Eigen::Index>(i)) = e.activation.values.transpose();
          labels.push_back(e.label);
        }

        report.forward_seconds += cost_.forward_seconds(model, n_fresh, n_replay);
        report.backward_seconds += cost_.backward_seconds(model, n_fresh, n_replay);
        epoch_loss += learner::train_step(model, fresh, replayed, labels);
        ++report.minibatches_run;

        if (!first_minibatch_done_) {
          first_minibatch_done_ = true;
          if (cfg_.freeze_front_after_first_batch) model.front.set_lr_multiplier(0.0);
        }
      }
      report.final_mean_loss = epoch_loss / static_cast<double>(batches);
    }
    if (!std::isfinite(report.final_mean_loss)) throw learner::NonFiniteError("non-finite session loss");
  } catch (const learner::NonFiniteError& e) {
    rollback();
    throw TrainingAborted(fmt::format("training session {} aborted: {}", report.run_index, e.what()));
  }

  ++runs_;
  if (cfg_.replay_enabled) {
    std::vector<replay::ReplayEntry> entries;
    entries.reserve(n);
    for (const auto& s : labeled_batch) {
      replay::ReplayEntry e;
      e.activation = model.tap_activation(s.features);
      e.label = s.label;
      if (cfg_.keep_raw_features) e.raw_features = s.features;
      entries.push_back(std::move(e));
    }
    replay::update_memory(mem, std::move(entries), runs_, rng_, cfg_.rounding);
  }
  report.wall_clock_model = report.forward_seconds + report.backward_seconds;
  report.aging_metric = aging_metric(mem, model.front);
  return report;
}

double aging_metric(const replay::ReplayMemory& mem, const learner::FrontExtractor& front) {
  double total = 0.0;
  std::size_t counted = 0;
  for (const auto& e : mem.entries()) {
    if (!e.raw_features) continue;
    total += (e.activation.values - learner::forward_front(front, *e.raw_features).values).norm();
    ++counted;
  }
  return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

double inference_throughput_model(bool training_active) { return training_active ? kTrainingFps : kIdleFps; }

double average_fps(double duty_cycle) {
  const double duty = std::clamp(duty_cycle, 0.0, 1.0);
  return (1.0 - duty) * kIdleFps + duty * kTrainingFps;
}

}  // namespace shoggoth::trainer
