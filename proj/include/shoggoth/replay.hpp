#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "shoggoth/common.hpp"
#include "shoggoth/learner.hpp"

namespace shoggoth::replay {

struct ReplayEntry {
  learner::Activation activation;
  int label = 0;
  int inserted_at_run = 1;
  // Raw input kept only in debug mode, for the aging metric.
  std::optional<learner::Vector> raw_features;
};

/// How h = capacity / run_index becomes an integer when memory is full.
/// kStochastic rounds up with probability equal to the fractional part, so
/// E[h] = capacity / run_index exactly; kFloor always rounds down.
enum class HRounding { kFloor, kStochastic };

class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool is_full() const { return entries_.size() >= capacity_; }
  const std::vector<ReplayEntry>& entries() const { return entries_; }

  friend void update_memory(ReplayMemory& mem, std::vector<ReplayEntry> batch, int run_index, Rng& rng,
                            HRounding rounding);
  friend ReplayMemory load_memory(std::span<const std::uint8_t> bytes);

 private:
  std::size_t capacity_;
  std::vector<ReplayEntry> entries_;
};

/// Number of entries swapped in on a full-memory update: h = capacity /
/// run_index rounded per `rounding`, clamped to the batch size.
std::size_t replacement_count(std::size_t capacity, int run_index, std::size_t batch_size, HRounding rounding,
                              Rng& rng);

/// Replay memory management, called once after each adaptive training run.
/// Not full: a random subset of the batch fills the remaining capacity.
/// Full: a random h-subset of the batch replaces a random h-subset of the
/// stored entries. Throws ContractError if run_index < 1; an empty batch is
/// a no-op.
void update_memory(ReplayMemory& mem, std::vector<ReplayEntry> batch, int run_index, Rng& rng,
                   HRounding rounding = HRounding::kStochastic);

struct MinibatchSplit {
  std::size_t original = 0;
  std::size_t replay = 0;
};

/// floor(K*N/(N+M)) originals and the rest from replay.
MinibatchSplit minibatch_split(std::size_t minibatch_size, std::size_t batch_size, std::size_t memory_size);

struct LabeledSample {
  learner::Vector features;
  int label = 0;
};

/// Mixes fresh samples (passed through the front) with stored activations in
/// the constant proportion given by minibatch_split. Draws are without
/// replacement unless a pool is too small, in which case that pool is
/// sampled with replacement and a warning is logged.
std::vector<learner::LabeledActivation> compose_minibatch(std::span<const LabeledSample> batch,
                                                          const ReplayMemory& mem, std::size_t minibatch_size,
                                                          const learner::FrontExtractor& front, Rng& rng);

/// Uniform draw of `count` distinct indices from [0, pool), or with
/// replacement (plus a logged warning) if count > pool.
std::vector<std::size_t> draw_indices(std::size_t pool, std::size_t count, Rng& rng, const char* what);

/// Memory dump as a flat float record: [capacity, size, dim], labels,
/// insertion runs, then the activations row by row.
std::vector<std::uint8_t> dump_memory(const ReplayMemory& mem);
ReplayMemory load_memory(std::span<const std::uint8_t> bytes);

}  // namespace shoggoth::replay
