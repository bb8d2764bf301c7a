#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>

#include "shoggoth/common.hpp"
#include "shoggoth/learner.hpp"
#include "shoggoth/replay.hpp"

namespace shoggoth::trainer {

struct TrainingSessionConfig {
  int epochs = 8;
  std::size_t minibatch_size = 64;   // K
  std::size_t batch_size = 300;      // N, labelled frames per session
  std::size_t replay_capacity = 1500;
  double learning_rate = 0.05;
  bool freeze_front_after_first_batch = true;
  bool replay_enabled = true;
  replay::HRounding rounding = replay::HRounding::kStochastic;
  bool keep_raw_features = false;  // debug side-table for aging_metric
};

std::vector<std::string> validate(const TrainingSessionConfig& cfg);

/// Simulated training time. Each mini-batch costs time proportional to the
/// multiply-accumulates of the layers its samples cross: fresh samples cross
/// the front, every sample crosses trunk and head, and the backward pass
/// runs over trainable layers only (at twice the forward cost).
struct CostModel {
  double forward_seconds_per_mac = 0.0;
  double backward_seconds_per_mac = 0.0;

  /// Constants fitted so a steady-state session of the default model and
  /// default configuration takes 17.8 s forward + 0.8 s backward.
  static CostModel calibrated();

  double forward_seconds(const learner::TwoStageModel& model, std::size_t fresh, std::size_t replayed) const;
  double backward_seconds(const learner::TwoStageModel& model, std::size_t fresh, std::size_t replayed) const;
};

struct SessionReport {
  int run_index = 0;
  double final_mean_loss = 0.0;
  int minibatches_run = 0;
  std::size_t memory_used = 0;  // M at session start
  double forward_seconds = 0.0;
  double backward_seconds = 0.0;
  double wall_clock_model = 0.0;  // forward + backward
  double aging_metric = 0.0;
};

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs adaptive training sessions for one edge device. Owns the run
/// counter, the session random source and the freeze-after-first-batch
/// state.
class EdgeTrainer {
 public:
  EdgeTrainer(TrainingSessionConfig cfg, std::uint64_t seed, CostModel cost = CostModel::calibrated());

  /// One session: `epochs` passes in which every labelled sample appears in
  /// exactly one of ceil((N + M) / K) mini-batches, the remainder of each
  /// mini-batch being drawn from replay. Afterwards the memory is updated
  /// with the batch's replay-layer activations. On a non-finite loss the
  /// model, memory and trainer state are restored and TrainingAborted is
  /// thrown.
  SessionReport run_training_session(learner::TwoStageModel& model, replay::ReplayMemory& mem,
                                     std::span<const replay::LabeledSample> labeled_batch);

  const TrainingSessionConfig& config() const { return cfg_; }
  const CostModel& cost_model() const { return cost_; }
  int runs_completed() const { return runs_; }

 private:
  TrainingSessionConfig cfg_;
  CostModel cost_;
  Rng rng_;
  int runs_ = 0;
  bool first_minibatch_done_ = false;
};

/// Mean Euclidean distance between stored activations and the activations
/// the current front computes for the same raw inputs. Only entries that
/// kept their raw features contribute; 0 if none did.
double aging_metric(const replay::ReplayMemory& mem, const learner::FrontExtractor& front);

inline constexpr double kIdleFps = 30.0;
inline constexpr double kTrainingFps = 15.0;

/// Inference frame rate on the edge device: 30 fps idle, 15 fps while a
/// training session shares the accelerator.
double inference_throughput_model(bool training_active);

/// Time-averaged frame rate for a training duty cycle in [0, 1].
double average_fps(double duty_cycle);

}  // namespace shoggoth::trainer
