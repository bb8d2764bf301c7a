#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace shoggoth {

/// Raised when a caller breaks an operation's precondition (dimension
/// mismatch, out-of-range label, empty batch where one is required).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A configuration problem, carrying one "field.path: message" entry per
/// violation so validation can report everything at once.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

using Rng = std::mt19937_64;

/// Independent random sources derived from the single scenario seed. Each
/// consumer owns its own engine so that adding a consumer never perturbs the
/// draws of another (the strategy A/B comparisons depend on this).
enum class RngStream : std::uint32_t {
  kStream = 1,
  kHeldOut = 2,
  kTeacher = 3,
  kModelInit = 4,
  kPretrain = 5,
  kTrainer = 6,
  kReplay = 7,
  kTransport = 8,
  kDomainMeans = 9,
};

Rng make_rng(std::uint64_t seed, RngStream stream, std::uint64_t salt = 0);

/// Quiets or restores library diagnostics (tests and the CLI use this).
void set_log_level(const std::string& level);

}  // namespace shoggoth
