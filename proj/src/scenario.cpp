#include "shoggoth/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#ifndef SHOGGOTH_SCENARIO_DIR
#define SHOGGOTH_SCENARIO_DIR "scenarios"
#endif

namespace shoggoth::harness {

const char* to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kEdgeOnly: return "edge-only";
    case StrategyKind::kCloudOnly: return "cloud-only";
    case StrategyKind::kPrompt: return "prompt";
    case StrategyKind::kAmsLike: return "ams-like";
    case StrategyKind::kShoggoth: return "shoggoth";
  }
  return "unknown";
}

std::optional<StrategyKind> strategy_from_string(std::string_view s) {
  for (auto k : {StrategyKind::kEdgeOnly, StrategyKind::kCloudOnly, StrategyKind::kPrompt, StrategyKind::kAmsLike,
                 StrategyKind::kShoggoth}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

std::vector<std::string> validate(const ScenarioConfig& cfg) {
  std::vector<std::string> errs = stream::validate(cfg.stream);
  auto append = [&errs](std::vector<std::string> more) { errs.insert(errs.end(), more.begin(), more.end()); };
  append(trainer::validate(cfg.trainer));
  append(cloud::validate(cfg.controller));
  append(cloud::validate(cfg.teacher));
  append(transport::validate(cfg.transport.compression));

  if (cfg.duration_frames < 1) errs.emplace_back("scenario.duration_frames: must be >= 1");
  if (cfg.window_frames < 1) errs.emplace_back("scenario.window_frames: must be >= 1");
  if (cfg.strategy.kind == StrategyKind::kPrompt &&
      !(cfg.strategy.fixed_rate >= cfg.controller.r_min && cfg.strategy.fixed_rate <= cfg.controller.r_max)) {
    errs.emplace_back("scenario.fixed_rate: must lie in [controller.r_min, controller.r_max]");
  }
  const auto n_domains = static_cast<int>(cfg.stream.schedule.domains.size());
  if (cfg.pretrain.domain >= n_domains) errs.emplace_back("pretrain.domain: unknown domain");
  if (cfg.pretrain.epochs < 1) errs.emplace_back("pretrain.epochs: must be >= 1");
  if (cfg.shape.mid_dim < 1 || cfg.shape.act_dim < 1) errs.emplace_back("model: layer widths must be >= 1");
  if (cfg.shape.input_dim != cfg.stream.dim) errs.emplace_back("model.input_dim: must equal stream.dim");
  if (cfg.shape.classes != cfg.stream.classes) errs.emplace_back("model.classes: must equal stream.classes");
  if (!(cfg.init.front_lr_multiplier >= 0.0 && cfg.init.front_lr_multiplier <= 1.0)) {
    errs.emplace_back("model.front_lr_multiplier: must lie in [0, 1]");
  }
  if (!(cfg.init.brn_momentum > 0.0 && cfg.init.brn_momentum < 1.0)) {
    errs.emplace_back("model.brn_momentum: must lie in (0, 1)");
  }
  if (!(cfg.init.r_max_clip >= 1.0)) errs.emplace_back("model.r_max_clip: must be >= 1");
  if (!(cfg.init.d_max_clip >= 0.0)) errs.emplace_back("model.d_max_clip: must be >= 0");
  if (!(cfg.init.init_gain > 0.0)) errs.emplace_back("model.init_gain: must be > 0");
  if (!(cfg.transport.link_latency_s >= 0.0)) errs.emplace_back("transport.link_latency_s: must be >= 0");
  if (!(cfg.transport.upload_interval_s > 0.0)) errs.emplace_back("transport.upload_interval_s: must be > 0");
  if (!(cfg.transport.lambda_window_s >= 1.0)) errs.emplace_back("transport.lambda_window_s: must be >= 1");
  const auto& fg = cfg.forgetting;
  if (fg.domain_a < 0 || fg.domain_a >= n_domains) errs.emplace_back("forgetting.domain_a: unknown domain");
  if (fg.domain_b < 0 || fg.domain_b >= n_domains) errs.emplace_back("forgetting.domain_b: unknown domain");
  if (fg.sessions_a < 0 || fg.sessions_b < 0) errs.emplace_back("forgetting.sessions: must be >= 0");
  if (fg.heldout < 1) errs.emplace_back("forgetting.heldout: must be >= 1");
  if (fg.sample_every < 1) errs.emplace_back("forgetting.sample_every: must be >= 1");
  return errs;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

struct BadValue {
  std::string message;
};

template <typename T>
T parse_number(const std::string& s) {
  T v{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) throw BadValue{fmt::format("'{}' is not a valid number", s)};
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v)) throw BadValue{fmt::format("'{}' is not finite", s)};
  }
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw BadValue{fmt::format("'{}' is not a boolean", s)};
}

template <typename T>
std::vector<T> parse_list(const std::string& s) {
  std::vector<T> out;
  for (const auto& item : split(s, ',')) out.push_back(parse_number<T>(item));
  return out;
}

enum class MeanKind { kUnset, kRandom, kDerived, kExplicit };

struct RawDomain {
  stream::DomainParams params;
  MeanKind means = MeanKind::kUnset;
  std::uint64_t mean_seed = 1;
  double mean_scale = 1.0;
  int base = -1;
  std::vector<int> permute;
  std::uint64_t shift_seed = 1;
  double shift_scale = 0.0;
  double jitter = 0.0;
  std::map<int, std::vector<double>> explicit_means;
};

using Setter = std::function<void(const std::string&)>;

class Parser {
 public:
  Parser() { build_tables(); }

  ScenarioConfig run(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    std::map<std::string, Setter>* table = nullptr;
    std::string section;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (!header_seen) {
        header_seen = true;
        if (line != kScenarioHeader) {
          errs_.push_back(fmt::format("line {}: expected header '{}'", lineno, kScenarioHeader));
          return cfg_;
        }
        continue;
      }
      if (line.front() == '[') {
        if (line.back() != ']') {
          errs_.push_back(fmt::format("line {}: malformed section header", lineno));
          table = nullptr;
          continue;
        }
        section = trim(std::string_view(line).substr(1, line.size() - 2));
        table = open_section(section, lineno);
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        errs_.push_back(fmt::format("line {}: expected key = value", lineno));
        continue;
      }
      if (table == nullptr) {
        if (section.empty()) errs_.push_back(fmt::format("line {}: key outside any section", lineno));
        continue;
      }
      const std::string key = trim(std::string_view(line).substr(0, eq));
      const std::string value = trim(std::string_view(line).substr(eq + 1));
      const std::string path = section + "." + key;
      auto it = table->find(key);
      Setter setter;
      if (it != table->end()) {
        setter = it->second;
      } else if (section.rfind("domain.", 0) == 0 && key.rfind("mean.", 0) == 0) {
        setter = explicit_mean_setter(key);
      }
      if (!setter) {
        errs_.push_back(fmt::format("{}: unknown key (line {})", path, lineno));
        continue;
      }
      if (!seen_.insert(path).second) {
        errs_.push_back(fmt::format("{}: duplicate key (line {})", path, lineno));
        continue;
      }
      try {
        setter(value);
      } catch (const BadValue& e) {
        errs_.push_back(fmt::format("{}: {} (line {})", path, e.message, lineno));
      }
    }
    if (!header_seen) errs_.push_back(fmt::format("missing header '{}'", kScenarioHeader));
    for (const char* required : {"scenario", "stream"}) {
      if (!sections_.count(required)) errs_.push_back(fmt::format("{}: required section missing", required));
    }
    if (domains_.empty()) errs_.emplace_back("domain: at least one [domain.N] section required");
    resolve_domains();
    cfg_.shape.input_dim = cfg_.stream.dim;
    cfg_.shape.classes = cfg_.stream.classes;
    cfg_.init.learning_rate = cfg_.trainer.learning_rate;
    if (errs_.empty()) errs_ = validate(cfg_);
    return cfg_;
  }

  std::vector<std::string>& errors() { return errs_; }

 private:
  std::map<std::string, Setter>* open_section(const std::string& name, int lineno) {
    if (!sections_.insert(name).second) {
      errs_.push_back(fmt::format("{}: duplicate section (line {})", name, lineno));
      return nullptr;
    }
    if (name.rfind("domain.", 0) == 0) {
      int idx = -1;
      try {
        idx = parse_number<int>(name.substr(7));
      } catch (const BadValue&) {
      }
      if (idx < 0) {
        errs_.push_back(fmt::format("{}: domain index must be a non-negative integer (line {})", name, lineno));
        return nullptr;
      }
      current_domain_ = idx;
      domains_[idx];
      domain_table_ = domain_setters(domains_[idx]);
      return &domain_table_;
    }
    auto it = tables_.find(name);
    if (it == tables_.end()) {
      errs_.push_back(fmt::format("{}: unknown section (line {})", name, lineno));
      return nullptr;
    }
    return &it->second;
  }

  Setter explicit_mean_setter(const std::string& key) {
    RawDomain& d = domains_[current_domain_];
    return [&d, key](const std::string& v) {
      int c = -1;
      try {
        c = parse_number<int>(key.substr(5));
      } catch (const BadValue&) {
      }
      if (c < 0) throw BadValue{"class index must be a non-negative integer"};
      d.explicit_means[c] = parse_list<double>(v);
    };
  }

  std::map<std::string, Setter> domain_setters(RawDomain& d) {
    return {
        {"prior", [&d](const std::string& v) { d.params.class_prior = parse_list<double>(v); }},
        {"noise", [&d](const std::string& v) { d.params.noise_scale = parse_number<double>(v); }},
        {"dwell_seconds", [&d](const std::string& v) { d.params.dwell_seconds = parse_number<double>(v); }},
        {"offset_scale", [&d](const std::string& v) { d.params.scene_offset_scale = parse_number<double>(v); }},
        {"offset_seconds", [&d](const std::string& v) { d.params.scene_offset_seconds = parse_number<double>(v); }},
        {"means",
         [&d](const std::string& v) {
           if (v == "random") d.means = MeanKind::kRandom;
           else if (v == "derived") d.means = MeanKind::kDerived;
           else if (v == "explicit") d.means = MeanKind::kExplicit;
           else throw BadValue{"expected random, derived or explicit"};
         }},
        {"mean_seed", [&d](const std::string& v) { d.mean_seed = parse_number<std::uint64_t>(v); }},
        {"mean_scale", [&d](const std::string& v) { d.mean_scale = parse_number<double>(v); }},
        {"base", [&d](const std::string& v) { d.base = parse_number<int>(v); }},
        {"permute", [&d](const std::string& v) { d.permute = parse_list<int>(v); }},
        {"shift_seed", [&d](const std::string& v) { d.shift_seed = parse_number<std::uint64_t>(v); }},
        {"shift_scale", [&d](const std::string& v) { d.shift_scale = parse_number<double>(v); }},
        {"jitter", [&d](const std::string& v) { d.jitter = parse_number<double>(v); }},
    };
  }

  void resolve_domains() {
    const auto dim = static_cast<Eigen::Index>(cfg_.stream.dim);
    const std::size_t classes = cfg_.stream.classes;
    int expected = 0;
    for (auto& [idx, d] : domains_) {
      const std::string path = fmt::format("domain.{}", idx);
      if (idx != expected++) {
        errs_.push_back(fmt::format("{}: domain indices must be contiguous from 0", path));
        return;
      }
      auto& means = d.params.class_means;
      means.clear();
      switch (d.means) {
        case MeanKind::kUnset:
          errs_.push_back(path + ".means: required (random, derived or explicit)");
          break;
        case MeanKind::kRandom: {
          Rng rng = make_rng(d.mean_seed, RngStream::kDomainMeans);
          std::normal_distribution<double> g(0.0, 1.0);
          for (std::size_t c = 0; c < classes; ++c) {
            Eigen::VectorXd m(dim);
            for (Eigen::Index i = 0; i < dim; ++i) m[i] = d.mean_scale * g(rng);
            means.push_back(std::move(m));
          }
          break;
        }
        case MeanKind::kDerived: {
          if (d.base < 0 || d.base >= idx) {
            errs_.push_back(path + ".base: must name an earlier domain");
            break;
          }
          const auto& base = domains_[d.base].params.class_means;
          if (base.size() != classes) break;  // base already reported
          std::vector<int> perm = d.permute;
          if (perm.empty()) {
            for (std::size_t c = 0; c < classes; ++c) perm.push_back(static_cast<int>(c));
          }
          std::vector<int> sorted = perm;
          std::sort(sorted.begin(), sorted.end());
          bool is_perm = sorted.size() == classes;
          for (std::size_t c = 0; is_perm && c < classes; ++c) is_perm = sorted[c] == static_cast<int>(c);
          if (!is_perm) {
            errs_.push_back(fmt::format("{}.permute: must be a permutation of 0..{}", path, classes - 1));
            break;
          }
          Rng rng = make_rng(d.shift_seed, RngStream::kDomainMeans, static_cast<std::uint64_t>(idx) + 1);
          std::normal_distribution<double> g(0.0, 1.0);
          Eigen::VectorXd shift(dim);
          for (Eigen::Index i = 0; i < dim; ++i) shift[i] = d.shift_scale * g(rng);
          for (std::size_t c = 0; c < classes; ++c) {
            Eigen::VectorXd m = base[static_cast<std::size_t>(perm[c])] + shift;
            for (Eigen::Index i = 0; i < dim; ++i) m[i] += d.jitter * g(rng);
            means.push_back(std::move(m));
          }
          break;
        }
        case MeanKind::kExplicit:
          for (std::size_t c = 0; c < classes; ++c) {
            auto it = d.explicit_means.find(static_cast<int>(c));
            if (it == d.explicit_means.end()) {
              errs_.push_back(fmt::format("{}.mean.{}: missing", path, c));
              continue;
            }
            means.push_back(Eigen::Map<const Eigen::VectorXd>(it->second.data(),
                                                               static_cast<Eigen::Index>(it->second.size())));
          }
          break;
      }
      if (d.means != MeanKind::kExplicit && !d.explicit_means.empty()) {
        errs_.push_back(path + ".mean.N: only allowed with means = explicit");
      }
      cfg_.stream.schedule.domains.push_back(d.params);
    }
  }

  void build_tables() {
    auto& c = cfg_;
    tables_["scenario"] = {
        {"name", [&c](const std::string& v) { c.name = v; }},
        {"seed", [&c](const std::string& v) { c.seed = parse_number<std::uint64_t>(v); }},
        {"duration_frames", [&c](const std::string& v) { c.duration_frames = parse_number<std::int64_t>(v); }},
        {"window_frames", [&c](const std::string& v) { c.window_frames = parse_number<std::size_t>(v); }},
        {"strategy",
         [&c](const std::string& v) {
           auto k = strategy_from_string(v);
           if (!k) throw BadValue{fmt::format("unknown strategy '{}'", v)};
           c.strategy.kind = *k;
         }},
        {"fixed_rate", [&c](const std::string& v) { c.strategy.fixed_rate = parse_number<double>(v); }},
        {"output_dir", [&c](const std::string& v) { c.output_dir = v; }},
    };
    tables_["stream"] = {
        {"dim", [&c](const std::string& v) { c.stream.dim = parse_number<std::size_t>(v); }},
        {"classes", [&c](const std::string& v) { c.stream.classes = parse_number<std::size_t>(v); }},
        {"fps", [&c](const std::string& v) { c.stream.fps = parse_number<double>(v); }},
        {"ramp_frames", [&c](const std::string& v) { c.stream.schedule.ramp_frames = parse_number<std::int64_t>(v); }},
        {"segments",
         [&c](const std::string& v) {
           c.stream.schedule.segments.clear();
           for (const auto& item : split(v, ',')) {
             const auto colon = item.find(':');
             if (colon == std::string::npos) throw BadValue{fmt::format("'{}' is not start:domain", item)};
             c.stream.schedule.segments.push_back(
                 {parse_number<std::int64_t>(trim(item.substr(0, colon))), parse_number<int>(trim(item.substr(colon + 1)))});
           }
         }},
    };
    tables_["pretrain"] = {
        {"domain", [&c](const std::string& v) { c.pretrain.domain = parse_number<int>(v); }},
        {"samples", [&c](const std::string& v) { c.pretrain.samples = parse_number<std::size_t>(v); }},
        {"epochs", [&c](const std::string& v) { c.pretrain.epochs = parse_number<int>(v); }},
    };
    tables_["model"] = {
        {"tap",
         [&c](const std::string& v) {
           try {
             c.shape.tap = learner::replay_tap_from_string(v);
           } catch (const ContractError&) {
             throw BadValue{fmt::format("unknown replay tap '{}' (input, mid, pool)", v)};
           }
         }},
        {"mid_dim", [&c](const std::string& v) { c.shape.mid_dim = parse_number<std::size_t>(v); }},
        {"act_dim", [&c](const std::string& v) { c.shape.act_dim = parse_number<std::size_t>(v); }},
        {"front_lr_multiplier", [&c](const std::string& v) { c.init.front_lr_multiplier = parse_number<double>(v); }},
        {"init_gain", [&c](const std::string& v) { c.init.init_gain = parse_number<double>(v); }},
        {"brn_momentum", [&c](const std::string& v) { c.init.brn_momentum = parse_number<double>(v); }},
        {"r_max_clip", [&c](const std::string& v) { c.init.r_max_clip = parse_number<double>(v); }},
        {"d_max_clip", [&c](const std::string& v) { c.init.d_max_clip = parse_number<double>(v); }},
    };
    tables_["trainer"] = {
        {"epochs", [&c](const std::string& v) { c.trainer.epochs = parse_number<int>(v); }},
        {"minibatch", [&c](const std::string& v) { c.trainer.minibatch_size = parse_number<std::size_t>(v); }},
        {"batch", [&c](const std::string& v) { c.trainer.batch_size = parse_number<std::size_t>(v); }},
        {"replay_capacity", [&c](const std::string& v) { c.trainer.replay_capacity = parse_number<std::size_t>(v); }},
        {"learning_rate", [&c](const std::string& v) { c.trainer.learning_rate = parse_number<double>(v); }},
        {"freeze_front_after_first_batch",
         [&c](const std::string& v) { c.trainer.freeze_front_after_first_batch = parse_bool(v); }},
        {"replay", [&c](const std::string& v) { c.trainer.replay_enabled = parse_bool(v); }},
        {"h_rounding",
         [&c](const std::string& v) {
           if (v == "floor") c.trainer.rounding = replay::HRounding::kFloor;
           else if (v == "stochastic") c.trainer.rounding = replay::HRounding::kStochastic;
           else throw BadValue{"expected floor or stochastic"};
         }},
        {"keep_raw_features", [&c](const std::string& v) { c.trainer.keep_raw_features = parse_bool(v); }},
    };
    tables_["controller"] = {
        {"r_min", [&c](const std::string& v) { c.controller.r_min = parse_number<double>(v); }},
        {"r_max", [&c](const std::string& v) { c.controller.r_max = parse_number<double>(v); }},
        {"initial_rate", [&c](const std::string& v) { c.controller.initial_rate = parse_number<double>(v); }},
        {"phi_target", [&c](const std::string& v) { c.controller.phi_target = parse_number<double>(v); }},
        {"alpha_target", [&c](const std::string& v) { c.controller.alpha_target = parse_number<double>(v); }},
        {"eta_r", [&c](const std::string& v) { c.controller.eta_r = parse_number<double>(v); }},
        {"eta_alpha", [&c](const std::string& v) { c.controller.eta_alpha = parse_number<double>(v); }},
        {"theta", [&c](const std::string& v) { c.controller.theta = parse_number<double>(v); }},
    };
    tables_["teacher"] = {
        {"noise_rate", [&c](const std::string& v) { c.teacher.noise_rate = parse_number<double>(v); }},
        {"smoothing", [&c](const std::string& v) { c.teacher.smoothing = parse_number<double>(v); }},
    };
    tables_["transport"] = {
        {"bytes_per_raw_frame",
         [&c](const std::string& v) { c.transport.compression.bytes_per_raw_frame = parse_number<std::size_t>(v); }},
        {"compression_ratio",
         [&c](const std::string& v) { c.transport.compression.compression_ratio = parse_number<double>(v); }},
        {"latency_min_s", [&c](const std::string& v) { c.transport.compression.latency_min_s = parse_number<double>(v); }},
        {"latency_max_s", [&c](const std::string& v) { c.transport.compression.latency_max_s = parse_number<double>(v); }},
        {"link_latency_s", [&c](const std::string& v) { c.transport.link_latency_s = parse_number<double>(v); }},
        {"upload_interval_s", [&c](const std::string& v) { c.transport.upload_interval_s = parse_number<double>(v); }},
        {"lambda_window_s", [&c](const std::string& v) { c.transport.lambda_window_s = parse_number<double>(v); }},
        {"link",
         [&c](const std::string& v) {
           if (v == "sim") c.transport.link = transport::LinkKind::kSim;
           else if (v == "socket") c.transport.link = transport::LinkKind::kSocket;
           else throw BadValue{"expected sim or socket"};
         }},
    };
    tables_["forgetting"] = {
        {"domain_a", [&c](const std::string& v) { c.forgetting.domain_a = parse_number<int>(v); }},
        {"domain_b", [&c](const std::string& v) { c.forgetting.domain_b = parse_number<int>(v); }},
        {"sessions_a", [&c](const std::string& v) { c.forgetting.sessions_a = parse_number<int>(v); }},
        {"sessions_b", [&c](const std::string& v) { c.forgetting.sessions_b = parse_number<int>(v); }},
        {"heldout", [&c](const std::string& v) { c.forgetting.heldout = parse_number<std::size_t>(v); }},
        {"sample_every", [&c](const std::string& v) { c.forgetting.sample_every = parse_number<int>(v); }},
    };
  }

  ScenarioConfig cfg_;
  std::vector<std::string> errs_;
  std::map<std::string, std::map<std::string, Setter>> tables_;
  std::map<std::string, Setter> domain_table_;
  std::map<int, RawDomain> domains_;
  int current_domain_ = -1;
  std::set<std::string> sections_;
  std::set<std::string> seen_;
};

}  // namespace

ScenarioConfig parse_scenario(std::string_view text) {
  Parser p;
  ScenarioConfig cfg = p.run(text);
  if (!p.errors().empty()) throw ConfigError(std::move(p.errors()));
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioNotFound(fmt::format("cannot read scenario file '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::filesystem::path resolve_scenario(const std::string& name_or_path) {
  namespace fs = std::filesystem;
  const fs::path direct(name_or_path);
  if (fs::is_regular_file(direct)) return direct;
  std::vector<fs::path> dirs;
  if (const char* env = std::getenv("SHOGGOTH_SCENARIO_DIR"); env != nullptr && *env != '\0') dirs.emplace_back(env);
  dirs.emplace_back(SHOGGOTH_SCENARIO_DIR);
  for (const auto& d : dirs) {
    const fs::path candidate = d / (name_or_path + ".scn");
    if (fs::is_regular_file(candidate)) return candidate;
  }
  throw ScenarioNotFound(fmt::format("scenario '{}' not found (as a path or in the scenario directories)", name_or_path));
}

}  // namespace shoggoth::harness
