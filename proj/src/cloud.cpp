#include "shoggoth/cloud.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace shoggoth::cloud {

std::vector<std::string> validate(const TeacherConfig& cfg) {
  std::vector<std::string> errs;
  if (!(cfg.noise_rate >= 0.0 && cfg.noise_rate < 1.0)) errs.emplace_back("teacher.noise_rate: must lie in [0, 1)");
  if (!(cfg.smoothing >= 0.0 && cfg.smoothing < 1.0)) errs.emplace_back("teacher.smoothing: must lie in [0, 1)");
  return errs;
}

TeacherOracle::TeacherOracle(std::size_t classes, TeacherConfig cfg, std::uint64_t seed)
    : classes_(classes), cfg_(cfg), rng_(make_rng(seed, RngStream::kTeacher)) {
  if (classes_ < 2) throw ContractError("teacher needs at least two classes");
  if (auto errs = validate(cfg_); !errs.empty()) throw ConfigError(std::move(errs));
}

TeacherOutput TeacherOracle::teach(const stream::Frame& frame) {
  if (frame.true_class < 0 || static_cast<std::size_t>(frame.true_class) >= classes_) {
    throw ContractError(fmt::format("frame {} has class {} outside [0, {})", frame.frame_id, frame.true_class, classes_));
  }
  int label = frame.true_class;
  if (cfg_.noise_rate > 0.0 && std::bernoulli_distribution(cfg_.noise_rate)(rng_)) {
    const int other = std::uniform_int_distribution<int>(0, static_cast<int>(classes_) - 2)(rng_);
    label = other >= frame.true_class ? other + 1 : other;
  }
  const auto c = static_cast<Eigen::Index>(classes_);
  TeacherOutput out;
  out.frame_id = frame.frame_id;
  out.label = label;
  out.scores = learner::Vector::Constant(c, cfg_.smoothing / static_cast<double>(classes_));
  out.scores[label] += 1.0 - cfg_.smoothing;
  return out;
}

std::vector<TeacherOutput> TeacherOracle::label_frames(std::span<const stream::Frame> frames) {
  if (frames.empty()) throw ContractError("label_frames needs at least one frame");
  std::vector<TeacherOutput> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(teach(f));
  return out;
}

PhiResult compute_phi(std::span<const TeacherOutput> outputs) {
  if (outputs.size() < 2) throw ContractError("phi needs at least two teacher outputs");
  PhiResult r;
  r.per_frame.reserve(outputs.size() - 1);
  double total = 0.0;
  for (std::size_t k = 1; k < outputs.size(); ++k) {
    Eigen::Index prev_label = 0;
    outputs[k - 1].scores.maxCoeff(&prev_label);
    const double p = std::max(outputs[k].scores[prev_label], learner::kProbabilityFloor);
    const double phi = -std::log(p);
    r.per_frame.push_back(phi);
    total += phi;
  }
  r.mean = total / static_cast<double>(r.per_frame.size());
  return r;
}

std::vector<std::string> validate(const ControllerParams& p) {
  std::vector<std::string> errs;
  auto finite = [](double v) { return std::isfinite(v); };
  if (!(finite(p.r_min) && p.r_min > 0.0)) errs.emplace_back("controller.r_min: must be > 0");
  if (!(finite(p.r_max) && p.r_max >= p.r_min)) errs.emplace_back("controller.r_max: must be >= r_min");
  if (!(p.initial_rate >= p.r_min && p.initial_rate <= p.r_max)) {
    errs.emplace_back("controller.initial_rate: must lie in [r_min, r_max]");
  }
  if (!finite(p.phi_target)) errs.emplace_back("controller.phi_target: must be finite");
  if (!(p.alpha_target >= 0.0 && p.alpha_target <= 1.0)) errs.emplace_back("controller.alpha_target: must lie in [0, 1]");
  if (!(finite(p.eta_r) && p.eta_r > 0.0)) errs.emplace_back("controller.eta_r: must be > 0");
  if (!(finite(p.eta_alpha) && p.eta_alpha > 0.0)) errs.emplace_back("controller.eta_alpha: must be > 0");
  if (!(p.theta > 0.0 && p.theta < 1.0)) errs.emplace_back("controller.theta: must lie in (0, 1)");
  return errs;
}

ControllerState ControllerState::initial(const ControllerParams& p) {
  ControllerState s;
  s.params = p;
  s.rate = p.initial_rate;
  return s;
}

double update_rate(ControllerState& state, double phi_bar, double alpha, double lambda_next) {
  if (!std::isfinite(phi_bar) || !std::isfinite(alpha) || !std::isfinite(lambda_next)) {
    spdlog::warn("controller input not finite (phi={}, alpha={}, lambda={}); keeping rate {}", phi_bar, alpha,
                 lambda_next, state.rate);
    return state.rate;
  }
  if (lambda_next < 0.0 || lambda_next > 1.0) {
    throw ContractError(fmt::format("lambda {} outside [0, 1]", lambda_next));
  }
  const ControllerParams& p = state.params;
  const double r_phi = p.eta_r * (phi_bar - p.phi_target);
  const double r_alpha = p.eta_alpha * std::max(0.0, p.alpha_target - alpha);
  const double r_lambda = (1.0 + (lambda_next - state.lambda_prev)) * state.rate;
  state.rate = std::clamp(r_phi + r_alpha + r_lambda, p.r_min, p.r_max);
  state.lambda_prev = lambda_next;
  return state.rate;
}

CloudNode::CloudNode(std::size_t classes, TeacherConfig teacher, ControllerParams controller, std::uint64_t seed)
    : teacher_(classes, teacher, seed), controller_params_(controller) {
  if (auto errs = validate(controller_params_); !errs.empty()) throw ConfigError(std::move(errs));
}

void CloudNode::register_device(std::uint32_t device_id, std::optional<double> fixed_rate) {
  DeviceRecord rec;
  rec.controller = ControllerState::initial(controller_params_);
  rec.fixed_rate = fixed_rate;
  if (fixed_rate) rec.controller.rate = *fixed_rate;
  devices_[device_id] = std::move(rec);
}

DeviceRecord& CloudNode::record(std::uint32_t device_id) {
  auto it = devices_.find(device_id);
  if (it == devices_.end()) throw ContractError(fmt::format("device {} is not registered", device_id));
  return it->second;
}

const DeviceRecord& CloudNode::device(std::uint32_t device_id) const {
  auto it = devices_.find(device_id);
  if (it == devices_.end()) throw ContractError(fmt::format("device {} is not registered", device_id));
  return it->second;
}

void CloudNode::report_stats(std::uint32_t device_id, double alpha, double lambda) {
  DeviceRecord& rec = record(device_id);
  rec.last_alpha = alpha;
  rec.last_lambda = lambda;
}

LabelBatchResponse CloudNode::handle_batch(std::uint32_t device_id, std::span<const stream::Frame> frames) {
  DeviceRecord& rec = record(device_id);
  auto outputs = teacher_.label_frames(frames);

  LabelBatchResponse resp;
  resp.frame_ids.reserve(outputs.size());
  resp.labels.reserve(outputs.size());
  for (const auto& o : outputs) {
    resp.frame_ids.push_back(o.frame_id);
    resp.labels.push_back(o.label);
  }

  std::vector<TeacherOutput> window;
  window.reserve(outputs.size() + 1);
  if (rec.last_output) window.push_back(*rec.last_output);
  window.insert(window.end(), outputs.begin(), outputs.end());
  // A lone first frame carries no change information; it counts as on target.
  resp.phi_bar = window.size() >= 2 ? compute_phi(window).mean : rec.controller.params.phi_target;
  rec.last_output = outputs.back();

  if (rec.fixed_rate) {
    resp.new_rate = *rec.fixed_rate;
  } else {
    resp.new_rate = update_rate(rec.controller, resp.phi_bar, rec.last_alpha, rec.last_lambda);
  }
  return resp;
}

std::vector<TeacherOutput> CloudNode::infer(std::span<const stream::Frame> frames) {
  return teacher_.label_frames(frames);
}

}  // namespace shoggoth::cloud
