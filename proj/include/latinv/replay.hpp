#pragma once

#include <cstddef>
#include <vector>

#include "latinv/mdp.hpp"
#include "latinv/random.hpp"
#include "latinv/tensor.hpp"

namespace latinv {

struct TransitionRecord {
  LatentVector state;
  LatentVector action;
  Real reward = 0;
  LatentVector next_state;
  bool done = false;

  friend bool operator==(const TransitionRecord&, const TransitionRecord&) = default;
};

/// Column-stacked view of sampled transitions, one row per record.
struct TransitionBatch {
  Matrix states;
  Matrix actions;
  std::vector<Real> rewards;
  Matrix next_states;
  std::vector<Real> dones;  // 1 for terminal, 0 otherwise

  std::size_t size() const { return rewards.size(); }
  static TransitionBatch from_records(const std::vector<TransitionRecord>& records);
};

/// Bounded FIFO replay memory.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t latent_dim);

  void push(TransitionRecord record);

  /// Uniform with replacement. Throws Unavailable when empty.
  std::vector<TransitionRecord> sample_records(std::size_t batch_size, Rng& rng) const;
  TransitionBatch sample(std::size_t batch_size, Rng& rng) const;

  /// i-th oldest stored record.
  const TransitionRecord& at(std::size_t i) const;

  std::size_t size() const { return records_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t latent_dim() const { return latent_dim_; }
  /// Ring position of the oldest record (needed to checkpoint the ring).
  std::size_t head() const { return head_; }
  const std::vector<TransitionRecord>& storage() const { return records_; }
  /// Rebuilds a buffer from checkpointed ring storage.
  static ReplayBuffer restore(std::size_t capacity, std::size_t latent_dim, std::vector<TransitionRecord> storage,
                              std::size_t head);

 private:
  std::size_t capacity_;
  std::size_t latent_dim_;
  std::vector<TransitionRecord> records_;
  std::size_t head_ = 0;
};

}  // namespace latinv
