#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "shoggoth/common.hpp"

namespace shoggoth::stream {

/// Generative parameters of one scene domain (e.g. "day", "night").
struct DomainParams {
  std::vector<double> class_prior;           // simplex over the classes
  std::vector<Eigen::VectorXd> class_means;  // one mean per class
  double noise_scale = 1.0;
  // Mean time an object class stays in view. Each frame the class is redrawn
  // from the prior with probability 1 / (dwell_seconds * fps); 0 redraws on
  // every frame (i.i.d. labels).
  double dwell_seconds = 0.0;
  // Slowly varying scene offset shared by all classes (lighting, camera
  // jitter): an Ornstein-Uhlenbeck process with this stationary std-dev and
  // correlation time. Scale 0 disables it.
  double scene_offset_scale = 0.0;
  double scene_offset_seconds = 60.0;
};

struct Segment {
  std::int64_t start_frame = 0;
  int domain_id = 0;
};

struct DomainSchedule {
  std::vector<Segment> segments;
  std::vector<DomainParams> domains;
  // Linear interpolation length after each domain switch; 0 = hard cut.
  std::int64_t ramp_frames = 0;

  /// Index into `segments` active at `frame_id`.
  std::size_t segment_at(std::int64_t frame_id) const;
  int domain_at(std::int64_t frame_id) const;
};

struct StreamConfig {
  std::size_t dim = 16;
  std::size_t classes = 4;
  double fps = 30.0;
  DomainSchedule schedule;
};

/// Collects every structural problem of a stream configuration as
/// "field.path: message" strings; empty means valid.
std::vector<std::string> validate(const StreamConfig& cfg);

struct Frame {
  std::int64_t frame_id = 0;
  double timestamp = 0.0;
  Eigen::VectorXd features;
  int true_class = 0;
  int domain_id = 0;
};

/// Endless drifting stream. Copyable: a copy continues the identical
/// sequence independently.
class FrameStream {
 public:
  /// Throws ConfigError if `cfg` does not validate.
  FrameStream(StreamConfig cfg, std::uint64_t seed);

  Frame next_frame();

  std::int64_t next_frame_id() const { return next_id_; }
  const StreamConfig& config() const { return cfg_; }

 private:
  struct Mixture {
    const DomainParams* from = nullptr;
    const DomainParams* to = nullptr;
    double weight = 1.0;  // weight on `to`
  };

  Mixture mixture_at(std::int64_t frame_id) const;
  int draw_class(const Mixture& mix);

  StreamConfig cfg_;
  Rng rng_;
  std::int64_t next_id_ = 0;
  int current_class_ = -1;
  std::size_t current_segment_ = 0;
  Eigen::VectorXd offset_;
  bool offset_initialized_ = false;
};

/// Draws `n` independent labelled samples from a single domain's long-run
/// distribution (scene offset drawn fresh per sample). Used for held-out
/// evaluation and offline pre-training.
std::vector<Frame> sample_domain(const DomainParams& domain, std::size_t dim,
                                 std::size_t n, Rng& rng, int domain_id = 0);

}  // namespace shoggoth::stream
