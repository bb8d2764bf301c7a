#include "shoggoth/replay.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "shoggoth/wire.hpp"

namespace shoggoth::replay {

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  entries_.reserve(capacity_);
}

std::size_t replacement_count(std::size_t capacity, int run_index, std::size_t batch_size, HRounding rounding,
                              Rng& rng) {
  if (run_index < 1) throw ContractError("run_index must be >= 1");
  const auto i = static_cast<std::size_t>(run_index);
  std::size_t h = capacity / i;
  const std::size_t rem = capacity % i;
  if (rounding == HRounding::kStochastic && rem > 0) {
    if (std::uniform_int_distribution<std::size_t>(0, i - 1)(rng) < rem) ++h;
  }
  return std::min(h, batch_size);
}

std::vector<std::size_t> draw_indices(std::size_t pool, std::size_t count, Rng& rng, const char* what) {
  std::vector<std::size_t> out;
  out.reserve(count);
  if (count == 0) return out;
  if (pool == 0) throw ContractError(fmt::format("cannot draw {} samples from an empty {} pool", count, what));
  if (count <= pool) {
    std::vector<std::size_t> all(pool);
    std::iota(all.begin(), all.end(), std::size_t{0});
    // Partial Fisher-Yates: the first `count` slots end up a uniform subset
    // in uniform random order.
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t j = std::uniform_int_distribution<std::size_t>(k, pool - 1)(rng);
      std::swap(all[k], all[j]);
    }
    out.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count));
    return out;
  }
  spdlog::warn("{} pool has {} samples but {} were requested; sampling with replacement", what, pool, count);
  std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
  for (std::size_t k = 0; k < count; ++k) out.push_back(pick(rng));
  return out;
}

void update_memory(ReplayMemory& mem, std::vector<ReplayEntry> batch, int run_index, Rng& rng,
                   HRounding rounding) {
  if (run_index < 1) throw ContractError("run_index must be >= 1");
  if (batch.empty() || mem.capacity_ == 0) return;
  for (auto& e : batch) e.inserted_at_run = run_index;

  if (mem.is_full()) {
    const std::size_t h = replacement_count(mem.capacity_, run_index, batch.size(), rounding, rng);
    const auto add = draw_indices(batch.size(), h, rng, "batch");
    const auto replace = draw_indices(mem.entries_.size(), h, rng, "memory");
    for (std::size_t k = 0; k < h; ++k) mem.entries_[replace[k]] = std::move(batch[add[k]]);
    return;
  }
  const std::size_t room = mem.capacity_ - mem.entries_.size();
  const std::size_t take = std::min(room, batch.size());
  if (take == batch.size()) {
    for (auto& e : batch) mem.entries_.push_back(std::move(e));
    return;
  }
  for (std::size_t idx : draw_indices(batch.size(), take, rng, "batch")) {
    mem.entries_.push_back(std::move(batch[idx]));
  }
}

MinibatchSplit minibatch_split(std::size_t minibatch_size, std::size_t batch_size, std::size_t memory_size) {
  if (minibatch_size < 1) throw ContractError("minibatch size K must be >= 1");
  if (batch_size < 1) throw ContractError("batch size N must be >= 1");
  const std::size_t original = minibatch_size * batch_size / (batch_size + memory_size);
  return {original, minibatch_size - original};
}

std::vector<learner::LabeledActivation> compose_minibatch(std::span<const LabeledSample> batch,
                                                          const ReplayMemory& mem, std::size_t minibatch_size,
                                                          const learner::FrontExtractor& front, Rng& rng) {
  const MinibatchSplit split = minibatch_split(minibatch_size, batch.size(), mem.size());
  std::vector<learner::LabeledActivation> out;
  out.reserve(minibatch_size);
  for (std::size_t idx : draw_indices(batch.size(), split.original, rng, "batch")) {
    out.push_back({learner::forward_front(front, batch[idx].features), batch[idx].label});
  }
  for (std::size_t idx : draw_indices(mem.size(), split.replay, rng, "replay")) {
    const auto& e = mem.entries()[idx];
    out.push_back({e.activation, e.label});
  }
  return out;
}

std::vector<std::uint8_t> dump_memory(const ReplayMemory& mem) {
  const std::size_t dim = mem.empty() ? 0 : static_cast<std::size_t>(mem.entries().front().activation.values.size());
  std::vector<double> labels, runs, acts;
  labels.reserve(mem.size());
  runs.reserve(mem.size());
  acts.reserve(mem.size() * dim);
  for (const auto& e : mem.entries()) {
    labels.push_back(e.label);
    runs.push_back(e.inserted_at_run);
    acts.insert(acts.end(), e.activation.values.data(), e.activation.values.data() + e.activation.values.size());
  }
  return wire::encode_record({{static_cast<double>(mem.capacity()), static_cast<double>(mem.size()),
                               static_cast<double>(dim)},
                              labels, runs, acts});
}

ReplayMemory load_memory(std::span<const std::uint8_t> bytes) {
  const auto arrays = wire::decode_record(bytes);
  if (arrays.size() != 4 || arrays[0].size() != 3) throw wire::DecodeError("memory record: bad layout");
  const auto capacity = static_cast<std::size_t>(arrays[0][0]);
  const auto size = static_cast<std::size_t>(arrays[0][1]);
  const auto dim = static_cast<std::size_t>(arrays[0][2]);
  if (size > capacity || arrays[1].size() != size || arrays[2].size() != size || arrays[3].size() != size * dim) {
    throw wire::DecodeError("memory record: inconsistent sizes");
  }
  ReplayMemory mem(capacity);
  for (std::size_t i = 0; i < size; ++i) {
    ReplayEntry e;
    e.activation.values = Eigen::Map<const learner::Vector>(arrays[3].data() + i * dim, static_cast<Eigen::Index>(dim));
    e.label = static_cast<int>(arrays[1][i]);
    e.inserted_at_run = static_cast<int>(arrays[2][i]);
    mem.entries_.push_back(std::move(e));
  }
  return mem;
}

}  // namespace shoggoth::replay
