#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "shoggoth/common.hpp"
#include "shoggoth/learner.hpp"
#include "shoggoth/stream.hpp"

namespace shoggoth::cloud {

struct TeacherConfig {
  double noise_rate = 0.0;
  // Score vector = (1 - smoothing) * onehot(label) + smoothing / C.
  double smoothing = 0.1;
};

std::vector<std::string> validate(const TeacherConfig& cfg);

struct TeacherOutput {
  std::int64_t frame_id = 0;
  learner::Vector scores;
  int label = 0;
};

/// Golden model stand-in: the hidden class, corrupted to a uniformly random
/// other class with probability noise_rate.
class TeacherOracle {
 public:
  TeacherOracle(std::size_t classes, TeacherConfig cfg, std::uint64_t seed);

  TeacherOutput teach(const stream::Frame& frame);

  /// Hard pseudo-labels, one per frame. Throws ContractError on empty input.
  std::vector<TeacherOutput> label_frames(std::span<const stream::Frame> frames);

  std::size_t classes() const { return classes_; }
  const TeacherConfig& config() const { return cfg_; }

 private:
  std::size_t classes_;
  TeacherConfig cfg_;
  Rng rng_;
};

struct PhiResult {
  std::vector<double> per_frame;  // phi_k for k = 1 .. n-1
  double mean = 0.0;
};

/// phi_k = cross-entropy of T(I_k)'s scores against argmax T(I_{k-1}).
/// Throws ContractError for fewer than two outputs.
PhiResult compute_phi(std::span<const TeacherOutput> outputs);

struct ControllerParams {
  double r_min = 0.1;
  double r_max = 2.0;
  double initial_rate = 1.0;
  double phi_target = 0.15;
  double alpha_target = 0.8;
  double eta_r = 0.5;
  double eta_alpha = 1.0;
  double theta = 0.5;  // confidence threshold behind alpha
};

std::vector<std::string> validate(const ControllerParams& p);

struct ControllerState {
  ControllerParams params;
  double rate = 1.0;
  double lambda_prev = 0.0;

  static ControllerState initial(const ControllerParams& p);
};

/// r' = clip(eta_r (phi - phi_target) + eta_alpha max(0, alpha_target - alpha)
///           + (1 + lambda_next - lambda_prev) r, r_min, r_max).
/// Updates rate and lambda_prev and returns the new rate. A non-finite input
/// leaves the state unchanged, logs, and returns the previous rate. Throws
/// ContractError for lambda outside [0, 1].
double update_rate(ControllerState& state, double phi_bar, double alpha, double lambda_next);

struct LabelBatchResponse {
  std::vector<std::int64_t> frame_ids;
  std::vector<int> labels;
  double new_rate = 0.0;
  double phi_bar = 0.0;
};

/// Per-device controller record. A fixed rate disables the controller (the
/// Prompt strategy and the fixed rows of a rate sweep).
struct DeviceRecord {
  ControllerState controller;
  std::optional<double> fixed_rate;
  std::optional<TeacherOutput> last_output;
  double last_alpha = 1.0;
  double last_lambda = 0.0;
};

/// The shared cloud: one teacher serving every registered device, one
/// controller record per device.
class CloudNode {
 public:
  CloudNode(std::size_t classes, TeacherConfig teacher, ControllerParams controller, std::uint64_t seed);

  void register_device(std::uint32_t device_id, std::optional<double> fixed_rate = std::nullopt);

  /// Edge statistics for the next labelling round.
  void report_stats(std::uint32_t device_id, double alpha, double lambda);

  /// Labels an uploaded buffer, computes phi over it (prefixed by the last
  /// frame of the previous upload when there is one) and steps the device's
  /// controller with the latest reported stats.
  LabelBatchResponse handle_batch(std::uint32_t device_id, std::span<const stream::Frame> frames);

  /// Cloud-only inference: teacher outputs for every frame.
  std::vector<TeacherOutput> infer(std::span<const stream::Frame> frames);

  const DeviceRecord& device(std::uint32_t device_id) const;
  TeacherOracle& teacher() { return teacher_; }

 private:
  DeviceRecord& record(std::uint32_t device_id);

  TeacherOracle teacher_;
  ControllerParams controller_params_;
  std::map<std::uint32_t, DeviceRecord> devices_;
};

}  // namespace shoggoth::cloud
