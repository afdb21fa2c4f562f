#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "latinv/tensor.hpp"

namespace latinv {

enum class QueryPurpose : std::size_t { training = 0, warmup = 1, evaluation = 2 };
inline constexpr std::size_t kNumPurposes = 3;
const char* to_string(QueryPurpose p);

enum class OracleKind { synthetic, external };

struct OracleDescriptor {
  std::size_t latent_dim = 0;   // k
  std::size_t num_classes = 0;  // K
  std::size_t feature_dim = 0;  // d, 0 when features are not exposed
  OracleKind kind = OracleKind::synthetic;

  friend bool operator==(const OracleDescriptor&, const OracleDescriptor&) = default;
};

struct OracleResponse {
  std::vector<Real> confidence;
  std::vector<Real> feature;  // empty unless served over a trusted channel
};

struct LedgerSnapshot {
  std::array<std::uint64_t, kNumPurposes> counts{};
  std::uint64_t renormalizations = 0;

  std::uint64_t total() const { return counts[0] + counts[1] + counts[2]; }
  std::uint64_t count(QueryPurpose p) const { return counts[static_cast<std::size_t>(p)]; }

  friend bool operator==(const LedgerSnapshot&, const LedgerSnapshot&) = default;
};

/// Monotone, purpose-partitioned query counter. Safe to bump from several
/// threads.
class QueryLedger {
 public:
  /// Returns the 1-based ordinal of the recorded query.
  std::uint64_t record(QueryPurpose p);
  void note_renormalization() { renormalizations_.fetch_add(1, std::memory_order_relaxed); }

  std::uint64_t total() const;
  std::uint64_t count(QueryPurpose p) const;
  LedgerSnapshot snapshot() const;
  /// Resumes counting from a checkpointed snapshot.
  void restore(const LedgerSnapshot& s);

 private:
  std::array<std::atomic<std::uint64_t>, kNumPurposes> counts_{};
  std::atomic<std::uint64_t> total_{0};
  std::atomic<std::uint64_t> renormalizations_{0};
};

/// Checks a confidence vector: entries finite and nonnegative (else
/// ProtocolError tagged with `ordinal`), sum within `tolerance` of 1. Off-sum
/// vectors are renormalized in place; returns true when that happened.
bool validate_confidences(std::vector<Real>& conf, std::uint64_t ordinal, Real tolerance = Real(1e-6));

/// Query-only access to T(G(z)).
class Oracle {
 public:
  virtual ~Oracle() = default;

  const OracleDescriptor& descriptor() const { return descriptor_; }

  /// Bills one query to `purpose`, then answers it. The query is counted even
  /// if answering fails.
  OracleResponse query(std::span<const Real> latent, QueryPurpose purpose);

  QueryLedger& ledger() { return ledger_; }
  const QueryLedger& ledger() const { return ledger_; }

 protected:
  explicit Oracle(OracleDescriptor d) : descriptor_(d) {}
  virtual OracleResponse answer(std::span<const Real> latent, std::uint64_t ordinal) = 0;

  OracleDescriptor descriptor_;

 private:
  QueryLedger ledger_;
};

std::size_t argmax(std::span<const Real> v);

}  // namespace latinv
