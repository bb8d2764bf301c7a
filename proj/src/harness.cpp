#include "shoggoth/harness.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <memory>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace shoggoth::harness {

double estimate_alpha(std::span<const double> confidences, double theta) {
  if (confidences.empty()) throw ContractError("alpha needs a non-empty prediction window");
  if (!(theta > 0.0 && theta < 1.0)) throw ContractError("theta must lie in (0, 1)");
  const auto above = std::count_if(confidences.begin(), confidences.end(), [theta](double c) { return c > theta; });
  return static_cast<double>(above) / static_cast<double>(confidences.size());
}

double collect_lambda(std::span<const ActivityInterval> trace, double window_start, double window_end) {
  const auto first = static_cast<std::int64_t>(std::ceil(window_start));
  std::int64_t samples = 0;
  std::int64_t busy = 0;
  for (std::int64_t s = first; static_cast<double>(s) < window_end; ++s) {
    ++samples;
    const auto t = static_cast<double>(s);
    if (std::any_of(trace.begin(), trace.end(), [t](const ActivityInterval& a) { return a.start <= t && t < a.end; })) {
      ++busy;
    }
  }
  return samples == 0 ? 0.0 : static_cast<double>(busy) / static_cast<double>(samples);
}

std::vector<CdfPoint> gain_cdf(std::span<const WindowRow> a, std::span<const WindowRow> b) {
  if (a.size() != b.size()) throw ContractError("gain CDF needs series over identical windows");
  std::vector<double> gains;
  gains.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].window_id != b[i].window_id) throw ContractError("gain CDF needs series over identical windows");
    gains.push_back(a[i].accuracy - b[i].accuracy);
  }
  std::sort(gains.begin(), gains.end());
  std::vector<CdfPoint> cdf;
  cdf.reserve(gains.size());
  for (std::size_t i = 0; i < gains.size(); ++i) {
    cdf.push_back({gains[i], static_cast<double>(i + 1) / static_cast<double>(gains.size())});
  }
  return cdf;
}

double positive_gain_fraction(std::span<const CdfPoint> cdf) {
  if (cdf.empty()) return 0.0;
  const auto positive = std::count_if(cdf.begin(), cdf.end(), [](const CdfPoint& p) { return p.gain > 0.0; });
  return static_cast<double>(positive) / static_cast<double>(cdf.size());
}

learner::TwoStageModel pretrained_model(const ScenarioConfig& cfg) {
  Rng init_rng = make_rng(cfg.seed, RngStream::kModelInit);
  learner::ModelInit init = cfg.init;
  init.learning_rate = cfg.trainer.learning_rate;
  auto model = learner::TwoStageModel::create(cfg.shape, init, init_rng);
  if (cfg.pretrain.domain < 0 || cfg.pretrain.samples == 0) return model;

  Rng rng = make_rng(cfg.seed, RngStream::kPretrain);
  const auto& domain = cfg.stream.schedule.domains.at(static_cast<std::size_t>(cfg.pretrain.domain));
  const auto frames = stream::sample_domain(domain, cfg.stream.dim, cfg.pretrain.samples, rng, cfg.pretrain.domain);
  std::vector<replay::LabeledSample> batch;
  batch.reserve(frames.size());
  for (const auto& f : frames) batch.push_back({f.features, f.true_class});

  trainer::TrainingSessionConfig pc = cfg.trainer;
  pc.epochs = cfg.pretrain.epochs;
  pc.batch_size = cfg.pretrain.samples;
  pc.replay_enabled = false;
  pc.freeze_front_after_first_batch = false;
  pc.keep_raw_features = false;
  // Offline pre-training trains every stage at the full rate.
  model.front.set_lr_multiplier(1.0);
  trainer::EdgeTrainer pre(pc, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  replay::ReplayMemory scratch(0);
  pre.run_training_session(model, scratch, batch);
  model.front.set_lr_multiplier(cfg.init.front_lr_multiplier);
  return model;
}

namespace {

constexpr std::uint32_t kDevice = 1;

bool samples_frames(StrategyKind k) {
  return k == StrategyKind::kPrompt || k == StrategyKind::kAmsLike || k == StrategyKind::kShoggoth;
}

class Simulation {
 public:
  explicit Simulation(const ScenarioConfig& cfg)
      : cfg_(cfg),
        kind_(cfg.strategy.kind),
        stream_(cfg.stream, cfg.seed),
        model_(pretrained_model(cfg)),
        cloud_(cfg.stream.classes, cfg.teacher, cfg.controller, cfg.seed),
        link_(transport::make_link(cfg.transport.link, cfg.transport.link_latency_s)),
        trainer_(cfg.trainer, cfg.seed),
        mem_(cfg.trainer.replay_capacity),
        next_mem_(cfg.trainer.replay_capacity),
        compress_rng_(make_rng(cfg.seed, RngStream::kTransport)) {
    std::optional<double> fixed;
    if (kind_ == StrategyKind::kPrompt) fixed = cfg.strategy.fixed_rate;
    cloud_.register_device(kDevice, fixed);
    rate_ = fixed ? *fixed : cfg.controller.initial_rate;
    teacher_confidence_ = 1.0 - cfg.teacher.smoothing + cfg.teacher.smoothing / static_cast<double>(cfg.stream.classes);
  }

  RunResult run() {
    const std::int64_t n = cfg_.duration_frames;
    const double fps = cfg_.stream.fps;
    const auto w = static_cast<std::int64_t>(cfg_.window_frames);
    const std::int64_t n_windows = (n + w - 1) / w;
    correct_.assign(static_cast<std::size_t>(n), 0);
    confidence_.assign(static_cast<std::size_t>(n), 0.0);
    busy_.assign(static_cast<std::size_t>(n), 0);
    true_class_.assign(static_cast<std::size_t>(n), 0);
    window_rate_.assign(static_cast<std::size_t>(n_windows), 0.0);
    window_phi_.assign(static_cast<std::size_t>(n_windows), 0.0);
    next_upload_t_ = cfg_.transport.upload_interval_s;
    const auto chunk = static_cast<std::size_t>(std::max(1.0, std::round(fps)));

    for (std::int64_t f = 0; f < n; ++f) {
      const double t = static_cast<double>(f) / fps;
      const stream::Frame frame = stream_.next_frame();
      const auto i = static_cast<std::size_t>(f);
      true_class_[i] = frame.true_class;
      process_events(t);

      if (kind_ == StrategyKind::kCloudOnly) {
        infer_buf_.push_back(frame);
        if (infer_buf_.size() == chunk) send_infer_request(t);
      } else {
        infer(frame, i);
      }

      if (samples_frames(kind_)) {
        if (t + 1e-9 >= next_sample_t_) {
          upload_buf_.push_back(frame);
          last_sample_t_ = next_sample_t_;
          next_sample_t_ += 1.0 / rate_;
        }
        if (t + 1e-9 >= next_upload_t_) upload(t);
      }

      if ((f + 1) % w == 0 || f + 1 == n) {
        const auto win = static_cast<std::size_t>(f / w);
        window_rate_[win] = kind_ == StrategyKind::kEdgeOnly ? 0.0 : kind_ == StrategyKind::kCloudOnly ? fps : rate_;
        window_phi_[win] = phi_bar_;
      }
    }
    const double end_t = static_cast<double>(n) / fps;
    if (!infer_buf_.empty()) send_infer_request(static_cast<double>(n - 1) / fps);
    drain();
    link_->set_elapsed(end_t);
    return collect(end_t);
  }

 private:
  void infer(const stream::Frame& frame, std::size_t i) {
    const bool busy = training_;
    busy_[i] = busy ? 1 : 0;
    // While a session shares the device, inference runs at half rate and
    // every other frame reuses the previous answer.
    if (!(busy && i % 2 == 1) || !have_prediction_) {
      last_prediction_ = model_.predict(frame.features);
      have_prediction_ = true;
      alpha_window_.push_back(last_prediction_.confidence);
    }
    correct_[i] = last_prediction_.predicted_class == frame.true_class ? 1 : 0;
    confidence_[i] = last_prediction_.confidence;
  }

  void process_events(double now) {
    if (training_ && train_end_ <= now) finish_session();
    for (auto& d : link_->receive(transport::Direction::kUp, now)) handle_up(d);
    for (auto& d : link_->receive(transport::Direction::kDown, now)) handle_down(d);
    maybe_start_session(now);
  }

  void drain() {
    const double inf = std::numeric_limits<double>::infinity();
    while (link_->in_flight() > 0) {
      for (auto& d : link_->receive(transport::Direction::kUp, inf)) handle_up(d);
      for (auto& d : link_->receive(transport::Direction::kDown, inf)) handle_down(d);
    }
  }

  transport::MessageHeader send(transport::MessageKind kind, std::vector<std::uint8_t> payload, double at) {
    transport::Message msg;
    msg.header.device_id = kDevice;
    msg.header.kind = kind;
    msg.payload = std::move(payload);
    return link_->send(std::move(msg), at);
  }

  void send_infer_request(double now) {
    const auto blob = transport::make_frame_blob(cfg_.transport.compression.compressed_size(infer_buf_.size()));
    const auto hdr = send(transport::MessageKind::kInferRequestUp, blob, now);
    cloud_inbox_[hdr.seq] = std::move(infer_buf_);
    infer_buf_.clear();
  }

  void upload(double now) {
    if (!upload_buf_.empty()) {
      const double alpha = alpha_window_.empty() ? 1.0 : estimate_alpha(alpha_window_, cfg_.controller.theta);
      const double lambda = collect_lambda(activity_, std::max(0.0, now - cfg_.transport.lambda_window_s), now);
      const double at = now + cfg_.transport.compression.sample_latency(compress_rng_);
      send(transport::MessageKind::kStatsUp, transport::encode_stats({alpha, lambda}), at);
      const auto blob = transport::make_frame_blob(cfg_.transport.compression.compressed_size(upload_buf_.size()));
      const auto hdr = send(transport::MessageKind::kFrameBatchUp, blob, at);
      for (const auto& f : upload_buf_) kept_features_[f.frame_id] = f.features;
      cloud_inbox_[hdr.seq] = std::move(upload_buf_);
      upload_buf_.clear();
    }
    alpha_window_.clear();
    last_upload_t_ = now;
    next_upload_t_ += cfg_.transport.upload_interval_s;
  }

  std::vector<stream::Frame> take_inbox(std::uint64_t seq) {
    auto it = cloud_inbox_.find(seq);
    if (it == cloud_inbox_.end()) throw ContractError(fmt::format("no frames behind upload {}", seq));
    auto frames = std::move(it->second);
    cloud_inbox_.erase(it);
    return frames;
  }

  void handle_up(const transport::Delivery& d) {
    using transport::MessageKind;
    const auto& msg = d.message;
    switch (msg.header.kind) {
      case MessageKind::kStatsUp: {
        const auto s = transport::decode_stats(msg.payload);
        cloud_.report_stats(msg.header.device_id, s.alpha, s.lambda);
        break;
      }
      case MessageKind::kFrameBatchUp: {
        const auto frames = take_inbox(msg.header.seq);
        const auto resp = cloud_.handle_batch(msg.header.device_id, frames);
        transport::LabelBatchPayload p;
        p.new_rate = resp.new_rate;
        p.phi_bar = resp.phi_bar;
        for (std::size_t k = 0; k < resp.labels.size(); ++k) {
          p.labels.push_back({static_cast<std::uint32_t>(resp.frame_ids[k]), static_cast<std::uint32_t>(resp.labels[k])});
        }
        send(MessageKind::kLabelBatchDown, transport::encode_label_batch(p), d.delivered_at);
        break;
      }
      case MessageKind::kInferRequestUp: {
        const auto frames = take_inbox(msg.header.seq);
        std::vector<transport::LabelPair> pairs;
        for (const auto& o : cloud_.infer(frames)) {
          pairs.push_back({static_cast<std::uint32_t>(o.frame_id), static_cast<std::uint32_t>(o.label)});
        }
        send(MessageKind::kInferResponseDown, transport::encode_infer_response(pairs), d.delivered_at);
        break;
      }
      default:
        throw ContractError(fmt::format("cloud received a {} message", transport::to_string(msg.header.kind)));
    }
  }

  void handle_down(const transport::Delivery& d) {
    using transport::MessageKind;
    const auto& msg = d.message;
    switch (msg.header.kind) {
      case MessageKind::kLabelBatchDown: {
        const auto p = transport::decode_label_batch(msg.payload);
        for (const auto& lp : p.labels) {
          auto it = kept_features_.find(lp.frame_id);
          if (it == kept_features_.end()) continue;
          pending_.push_back({std::move(it->second), static_cast<int>(lp.label)});
          kept_features_.erase(it);
        }
        if (std::abs(p.new_rate - rate_) > 0.0) {
          rate_ = p.new_rate;
          next_sample_t_ = std::max(last_sample_t_ + 1.0 / rate_, d.delivered_at);
        }
        phi_bar_ = p.phi_bar;
        break;
      }
      case MessageKind::kInferResponseDown: {
        for (const auto& lp : transport::decode_infer_response(msg.payload)) {
          const std::size_t i = lp.frame_id;
          correct_[i] = static_cast<int>(lp.label) == true_class_[i] ? 1 : 0;
          confidence_[i] = teacher_confidence_;
        }
        break;
      }
      case MessageKind::kModelDown:
        // The downloaded parameters are the ones published at session end.
        model_ = learner::deserialize(msg.payload);
        break;
      default:
        throw ContractError(fmt::format("edge received a {} message", transport::to_string(msg.header.kind)));
    }
  }

  void maybe_start_session(double now) {
    const std::size_t n = cfg_.trainer.batch_size;
    if (training_ || pending_.size() < n || !samples_frames(kind_)) return;
    std::vector<replay::LabeledSample> batch(std::make_move_iterator(pending_.begin()),
                                             std::make_move_iterator(pending_.begin() + static_cast<std::ptrdiff_t>(n)));
    pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(n));
    next_model_ = model_;
    next_mem_ = mem_;
    trainer::SessionReport report;
    try {
      report = trainer_.run_training_session(next_model_, next_mem_, batch);
    } catch (const trainer::TrainingAborted& e) {
      spdlog::warn("{}", e.what());
      ++aborted_;
      return;
    }
    training_ = true;
    train_end_ = now + report.wall_clock_model;
    sessions_.push_back({now, report});
    activity_.push_back({now, train_end_});
  }

  void finish_session() {
    model_ = next_model_;
    mem_ = next_mem_;
    training_ = false;
    session_ends_.push_back(train_end_);
    if (kind_ == StrategyKind::kAmsLike) send(transport::MessageKind::kModelDown, learner::serialize(model_), train_end_);
  }

  RunResult collect(double end_t) {
    const double fps = cfg_.stream.fps;
    const auto n = static_cast<std::size_t>(cfg_.duration_frames);
    const std::size_t w = cfg_.window_frames;
    const std::size_t n_windows = window_rate_.size();

    std::vector<std::uint64_t> up(n_windows, 0), down(n_windows, 0);
    for (const auto& e : link_->sent_stats().log) {
      const auto frame = static_cast<std::int64_t>(std::floor(e.time * fps + 1e-9));
      const auto win = static_cast<std::size_t>(std::clamp<std::int64_t>(
          frame / static_cast<std::int64_t>(w), 0, static_cast<std::int64_t>(n_windows) - 1));
      (e.direction == transport::Direction::kUp ? up : down)[win] += e.bytes;
    }

    RunResult r;
    r.scenario = cfg_.name;
    r.strategy = cfg_.strategy;
    r.sessions = sessions_;
    r.link = link_->sent_stats();
    double total_correct = 0.0, total_weighted = 0.0, total_fps = 0.0, total_busy = 0.0, total_rate = 0.0;
    for (std::size_t win = 0; win < n_windows; ++win) {
      const std::size_t lo = win * w;
      const std::size_t hi = std::min(n, lo + w);
      const double len = static_cast<double>(hi - lo);
      WindowRow row;
      row.window_id = static_cast<std::int64_t>(win);
      row.start_s = static_cast<double>(lo) / fps;
      double correct = 0.0, conf = 0.0, weighted = 0.0, busy = 0.0;
      for (std::size_t i = lo; i < hi; ++i) {
        correct += correct_[i];
        conf += confidence_[i];
        weighted += confidence_[i] * correct_[i];
        busy += busy_[i];
      }
      const double seconds = len / fps;
      row.accuracy = correct / len;
      row.mean_confidence = conf / len;
      row.weighted_correct = weighted / len;
      row.phi_bar = window_phi_[win];
      row.rate = window_rate_[win];
      row.up_kbps = 8.0 * static_cast<double>(up[win]) / 1000.0 / seconds;
      row.down_kbps = 8.0 * static_cast<double>(down[win]) / 1000.0 / seconds;
      row.avg_fps = trainer::average_fps(busy / len);
      const double t0 = row.start_s;
      const double t1 = static_cast<double>(hi) / fps;
      row.sessions_run = static_cast<int>(
          std::count_if(session_ends_.begin(), session_ends_.end(), [&](double t) { return t >= t0 && t < t1; }));
      total_correct += correct;
      total_weighted += weighted;
      total_busy += busy;
      total_fps += row.avg_fps * len;
      total_rate += row.rate;
      r.windows.push_back(row);
    }

    RunSummary& s = r.summary;
    const auto frames = static_cast<double>(n);
    s.duration_s = end_t;
    s.mean_accuracy = total_correct / frames;
    s.mean_weighted_correct = total_weighted / frames;
    s.avg_fps = total_fps / frames;
    s.duty_cycle = total_busy / frames;
    s.mean_rate = total_rate / static_cast<double>(n_windows);
    s.up_bytes = r.link.up_bytes;
    s.down_bytes = r.link.down_bytes;
    const auto bw = transport::bandwidth_kbps(r.link, end_t);
    s.up_kbps = bw.up_kbps;
    s.down_kbps = bw.down_kbps;
    s.sessions = static_cast<int>(sessions_.size());
    s.aborted_sessions = aborted_;
    for (const auto& rec : sessions_) {
      s.mean_forward_s += rec.report.forward_seconds;
      s.mean_backward_s += rec.report.backward_seconds;
      s.mean_overall_s += rec.report.wall_clock_model;
    }
    if (!sessions_.empty()) {
      const auto k = static_cast<double>(sessions_.size());
      s.mean_forward_s /= k;
      s.mean_backward_s /= k;
      s.mean_overall_s /= k;
    }
    check_finite(r);
    return r;
  }

  static void check_finite(const RunResult& r) {
    auto bad = [](double v) { return !std::isfinite(v); };
    for (const auto& row : r.windows) {
      if (bad(row.accuracy) || bad(row.mean_confidence) || bad(row.phi_bar) || bad(row.rate) || bad(row.up_kbps) ||
          bad(row.down_kbps) || bad(row.avg_fps)) {
        throw NonFiniteMetrics(fmt::format("window {} has a non-finite metric", row.window_id));
      }
    }
    const auto& s = r.summary;
    if (bad(s.mean_accuracy) || bad(s.up_kbps) || bad(s.down_kbps) || bad(s.avg_fps) || bad(s.mean_overall_s)) {
      throw NonFiniteMetrics("run summary has a non-finite metric");
    }
  }

  const ScenarioConfig& cfg_;
  StrategyKind kind_;
  stream::FrameStream stream_;
  learner::TwoStageModel model_;
  cloud::CloudNode cloud_;
  std::unique_ptr<transport::Link> link_;
  trainer::EdgeTrainer trainer_;
  replay::ReplayMemory mem_;
  learner::TwoStageModel next_model_;
  replay::ReplayMemory next_mem_;
  Rng compress_rng_;
  double teacher_confidence_ = 1.0;

  double rate_ = 1.0;
  double phi_bar_ = 0.0;
  double next_sample_t_ = 0.0;
  double last_sample_t_ = 0.0;
  double next_upload_t_ = 0.0;
  double last_upload_t_ = 0.0;
  std::vector<stream::Frame> upload_buf_;
  std::vector<stream::Frame> infer_buf_;
  std::map<std::uint64_t, std::vector<stream::Frame>> cloud_inbox_;
  std::map<std::int64_t, learner::Vector> kept_features_;
  std::deque<replay::LabeledSample> pending_;
  std::vector<double> alpha_window_;

  bool training_ = false;
  double train_end_ = 0.0;
  std::vector<ActivityInterval> activity_;
  std::vector<SessionRecord> sessions_;
  std::vector<double> session_ends_;
  int aborted_ = 0;

  learner::Prediction last_prediction_;
  bool have_prediction_ = false;
  std::vector<std::uint8_t> correct_;
  std::vector<double> confidence_;
  std::vector<std::uint8_t> busy_;
  std::vector<int> true_class_;
  std::vector<double> window_rate_;
  std::vector<double> window_phi_;
};

}  // namespace

RunResult run_scenario(const ScenarioConfig& cfg) {
  if (auto errs = validate(cfg); !errs.empty()) throw ConfigError(std::move(errs));
  Simulation sim(cfg);
  return sim.run();
}

}  // namespace shoggoth::harness
