#include "latinv/replay.hpp"

#include <string>

#include "latinv/error.hpp"

namespace latinv {

TransitionBatch TransitionBatch::from_records(const std::vector<TransitionRecord>& records) {
  TransitionBatch b;
  const std::size_t n = records.size();
  const std::size_t k = n ? records.front().state.size() : 0;
  b.states = Matrix(n, k);
  b.actions = Matrix(n, k);
  b.next_states = Matrix(n, k);
  b.rewards.resize(n);
  b.dones.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = records[i];
    std::copy(r.state.begin(), r.state.end(), b.states.row(i).begin());
    std::copy(r.action.begin(), r.action.end(), b.actions.row(i).begin());
    std::copy(r.next_state.begin(), r.next_state.end(), b.next_states.row(i).begin());
    b.rewards[i] = r.reward;
    b.dones[i] = r.done ? Real(1) : Real(0);
  }
  return b;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t latent_dim) : capacity_(capacity), latent_dim_(latent_dim) {
  if (capacity == 0) throw InvalidInput("replay capacity must be positive");
}

void ReplayBuffer::push(TransitionRecord record) {
  if (record.state.size() != latent_dim_ || record.action.size() != latent_dim_ ||
      record.next_state.size() != latent_dim_) {
    throw InvalidInput("replay push: record dimensions differ from buffer dimension " + std::to_string(latent_dim_));
  }
  if (records_.size() < capacity_) {
    records_.push_back(std::move(record));
  } else {
    records_[head_] = std::move(record);
    head_ = (head_ + 1) % capacity_;
  }
}

const TransitionRecord& ReplayBuffer::at(std::size_t i) const {
  if (i >= records_.size()) throw InvalidInput("replay index out of range");
  return records_[(head_ + i) % records_.size()];
}

std::vector<TransitionRecord> ReplayBuffer::sample_records(std::size_t batch_size, Rng& rng) const {
  if (records_.empty()) throw Unavailable("cannot sample from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, records_.size() - 1);
  std::vector<TransitionRecord> out;
  out.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) out.push_back(records_[pick(rng)]);
  return out;
}

TransitionBatch ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  if (records_.empty()) throw Unavailable("cannot sample from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, records_.size() - 1);
  TransitionBatch b;
  const std::size_t k = latent_dim_;
  b.states = Matrix(batch_size, k);
  b.actions = Matrix(batch_size, k);
  b.next_states = Matrix(batch_size, k);
  b.rewards.resize(batch_size);
  b.dones.resize(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const auto& r = records_[pick(rng)];
    std::copy(r.state.begin(), r.state.end(), b.states.row(i).begin());
    std::copy(r.action.begin(), r.action.end(), b.actions.row(i).begin());
    std::copy(r.next_state.begin(), r.next_state.end(), b.next_states.row(i).begin());
    b.rewards[i] = r.reward;
    b.dones[i] = r.done ? Real(1) : Real(0);
  }
  return b;
}

ReplayBuffer ReplayBuffer::restore(std::size_t capacity, std::size_t latent_dim, std::vector<TransitionRecord> storage,
                                   std::size_t head) {
  ReplayBuffer b(capacity, latent_dim);
  if (storage.size() > capacity || (storage.size() < capacity && head != 0) || (head >= capacity)) {
    throw InvalidInput("replay restore: inconsistent ring state");
  }
  for (const auto& r : storage) {
    if (r.state.size() != latent_dim || r.action.size() != latent_dim || r.next_state.size() != latent_dim) {
      throw InvalidInput("replay restore: record dimension mismatch");
    }
  }
  b.records_ = std::move(storage);
  b.head_ = head;
  return b;
}

}  // namespace latinv
