#include "shoggoth/stream.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace shoggoth::stream {

std::size_t DomainSchedule::segment_at(std::int64_t frame_id) const {
  auto it = std::upper_bound(
      segments.begin(), segments.end(), frame_id,
      [](std::int64_t f, const Segment& s) { return f < s.start_frame; });
  return it == segments.begin() ? 0 : static_cast<std::size_t>(it - segments.begin() - 1);
}

int DomainSchedule::domain_at(std::int64_t frame_id) const {
  return segments[segment_at(frame_id)].domain_id;
}

std::vector<std::string> validate(const StreamConfig& cfg) {
  std::vector<std::string> errs;
  const auto& sch = cfg.schedule;
  if (cfg.dim == 0) errs.emplace_back("stream.dim: must be positive");
  if (cfg.classes < 2) errs.emplace_back("stream.classes: need at least 2 classes");
  if (!(cfg.fps > 0.0)) errs.emplace_back("stream.fps: must be positive");
  if (sch.ramp_frames < 0) errs.emplace_back("stream.ramp_frames: must be >= 0");
  if (sch.segments.empty()) {
    errs.emplace_back("stream.segments: at least one segment required");
  } else if (sch.segments.front().start_frame != 0) {
    errs.emplace_back("stream.segments: first segment must start at frame 0");
  }
  for (std::size_t i = 0; i < sch.segments.size(); ++i) {
    const auto& s = sch.segments[i];
    if (i > 0 && s.start_frame <= sch.segments[i - 1].start_frame) {
      errs.push_back(fmt::format("stream.segments[{}]: start frames must be strictly increasing", i));
    }
    if (s.domain_id < 0 || static_cast<std::size_t>(s.domain_id) >= sch.domains.size()) {
      errs.push_back(fmt::format("stream.segments[{}]: unknown domain {}", i, s.domain_id));
    }
  }
  for (std::size_t d = 0; d < sch.domains.size(); ++d) {
    const auto& dom = sch.domains[d];
    const std::string path = fmt::format("domain.{}", d);
    if (dom.class_prior.size() != cfg.classes) {
      errs.push_back(fmt::format("{}.prior: expected {} entries, got {}", path, cfg.classes,
                                 dom.class_prior.size()));
    } else {
      const double sum = std::accumulate(dom.class_prior.begin(), dom.class_prior.end(), 0.0);
      const bool negative = std::any_of(dom.class_prior.begin(), dom.class_prior.end(),
                                        [](double p) { return !(p >= 0.0); });
      if (negative) errs.push_back(path + ".prior: entries must be non-negative");
      if (!(std::abs(sum - 1.0) <= 1e-9)) {
        errs.push_back(fmt::format("{}.prior: must sum to 1 (sums to {:.12g})", path, sum));
      }
    }
    if (dom.class_means.size() != cfg.classes) {
      errs.push_back(fmt::format("{}.means: expected {} class means, got {}", path, cfg.classes,
                                 dom.class_means.size()));
    }
    for (std::size_t c = 0; c < dom.class_means.size(); ++c) {
      if (static_cast<std::size_t>(dom.class_means[c].size()) != cfg.dim) {
        errs.push_back(fmt::format("{}.mean.{}: expected dimension {}", path, c, cfg.dim));
      } else if (!dom.class_means[c].allFinite()) {
        errs.push_back(fmt::format("{}.mean.{}: non-finite component", path, c));
      }
    }
    if (!(dom.noise_scale > 0.0) || !std::isfinite(dom.noise_scale)) {
      errs.push_back(path + ".noise: must be a finite positive number");
    }
    if (!(dom.dwell_seconds >= 0.0)) errs.push_back(path + ".dwell_seconds: must be >= 0");
    if (!(dom.scene_offset_scale >= 0.0)) errs.push_back(path + ".offset_scale: must be >= 0");
    if (!(dom.scene_offset_seconds > 0.0)) errs.push_back(path + ".offset_seconds: must be > 0");
  }
  return errs;
}

FrameStream::FrameStream(StreamConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), rng_(make_rng(seed, RngStream::kStream)) {
  if (auto errs = validate(cfg_); !errs.empty()) throw ConfigError(std::move(errs));
  offset_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cfg_.dim));
}

FrameStream::Mixture FrameStream::mixture_at(std::int64_t frame_id) const {
  const auto& sch = cfg_.schedule;
  const std::size_t seg = sch.segment_at(frame_id);
  const DomainParams* to = &sch.domains[static_cast<std::size_t>(sch.segments[seg].domain_id)];
  if (seg == 0 || sch.ramp_frames == 0) return {to, to, 1.0};
  const std::int64_t into = frame_id - sch.segments[seg].start_frame;
  if (into >= sch.ramp_frames) return {to, to, 1.0};
  const DomainParams* from =
      &sch.domains[static_cast<std::size_t>(sch.segments[seg - 1].domain_id)];
  const double w = static_cast<double>(into + 1) / static_cast<double>(sch.ramp_frames + 1);
  return {from, to, w};
}

int FrameStream::draw_class(const Mixture& mix) {
  std::vector<double> prior(cfg_.classes);
  for (std::size_t c = 0; c < cfg_.classes; ++c) {
    prior[c] = (1.0 - mix.weight) * mix.from->class_prior[c] + mix.weight * mix.to->class_prior[c];
  }
  std::discrete_distribution<int> pick(prior.begin(), prior.end());
  return pick(rng_);
}

Frame FrameStream::next_frame() {
  const std::int64_t id = next_id_++;
  const Mixture mix = mixture_at(id);
  const DomainParams& dom = *mix.to;
  const std::size_t seg = cfg_.schedule.segment_at(id);

  // Objects persist across frames; a domain switch always redraws.
  bool redraw = current_class_ < 0 || seg != current_segment_ || mix.weight < 1.0;
  if (!redraw) {
    if (dom.dwell_seconds <= 0.0) {
      redraw = true;
    } else {
      const double p_switch = std::min(1.0, 1.0 / (dom.dwell_seconds * cfg_.fps));
      redraw = std::bernoulli_distribution(p_switch)(rng_);
    }
  }
  if (redraw) current_class_ = draw_class(mix);
  current_segment_ = seg;

  std::normal_distribution<double> gauss(0.0, 1.0);
  if (dom.scene_offset_scale > 0.0) {
    if (!offset_initialized_) {
      for (Eigen::Index i = 0; i < offset_.size(); ++i) offset_[i] = dom.scene_offset_scale * gauss(rng_);
      offset_initialized_ = true;
    } else {
      const double rho = std::exp(-1.0 / (dom.scene_offset_seconds * cfg_.fps));
      const double innov = dom.scene_offset_scale * std::sqrt(1.0 - rho * rho);
      for (Eigen::Index i = 0; i < offset_.size(); ++i) offset_[i] = rho * offset_[i] + innov * gauss(rng_);
    }
  } else {
    offset_.setZero();
    offset_initialized_ = false;
  }

  const auto c = static_cast<std::size_t>(current_class_);
  const Eigen::VectorXd mean =
      (1.0 - mix.weight) * mix.from->class_means[c] + mix.weight * dom.class_means[c];
  const double noise = (1.0 - mix.weight) * mix.from->noise_scale + mix.weight * dom.noise_scale;

  Frame f;
  f.frame_id = id;
  f.timestamp = static_cast<double>(id) / cfg_.fps;
  f.features.resize(static_cast<Eigen::Index>(cfg_.dim));
  for (Eigen::Index i = 0; i < f.features.size(); ++i) {
    f.features[i] = mean[i] + offset_[i] + noise * gauss(rng_);
  }
  f.true_class = current_class_;
  f.domain_id = cfg_.schedule.segments[seg].domain_id;
  return f;
}

std::vector<Frame> sample_domain(const DomainParams& domain, std::size_t dim, std::size_t n,
                                 Rng& rng, int domain_id) {
  std::discrete_distribution<int> pick(domain.class_prior.begin(), domain.class_prior.end());
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Frame> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    Frame f;
    f.frame_id = static_cast<std::int64_t>(k);
    f.true_class = pick(rng);
    f.domain_id = domain_id;
    f.features.resize(static_cast<Eigen::Index>(dim));
    const auto& mean = domain.class_means[static_cast<std::size_t>(f.true_class)];
    for (Eigen::Index i = 0; i < f.features.size(); ++i) {
      const double offset = domain.scene_offset_scale > 0.0 ? domain.scene_offset_scale * gauss(rng) : 0.0;
      f.features[i] = mean[i] + offset + domain.noise_scale * gauss(rng);
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace shoggoth::stream
