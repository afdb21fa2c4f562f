#include "latinv/oracle.hpp"

#include <cmath>

#include "latinv/error.hpp"

namespace latinv {

const char* to_string(QueryPurpose p) {
  switch (p) {
    case QueryPurpose::training:
      return "training";
    case QueryPurpose::warmup:
      return "warmup";
    case QueryPurpose::evaluation:
      return "evaluation";
  }
  return "?";
}

std::uint64_t QueryLedger::record(QueryPurpose p) {
  counts_[static_cast<std::size_t>(p)].fetch_add(1, std::memory_order_relaxed);
  return total_.fetch_add(1, std::memory_order_relaxed) + 1;
}

std::uint64_t QueryLedger::total() const { return total_.load(std::memory_order_relaxed); }

std::uint64_t QueryLedger::count(QueryPurpose p) const {
  return counts_[static_cast<std::size_t>(p)].load(std::memory_order_relaxed);
}

LedgerSnapshot QueryLedger::snapshot() const {
  LedgerSnapshot s;
  for (std::size_t i = 0; i < kNumPurposes; ++i) s.counts[i] = counts_[i].load(std::memory_order_relaxed);
  s.renormalizations = renormalizations_.load(std::memory_order_relaxed);
  return s;
}

void QueryLedger::restore(const LedgerSnapshot& s) {
  for (std::size_t i = 0; i < kNumPurposes; ++i) counts_[i].store(s.counts[i], std::memory_order_relaxed);
  total_.store(s.total(), std::memory_order_relaxed);
  renormalizations_.store(s.renormalizations, std::memory_order_relaxed);
}

bool validate_confidences(std::vector<Real>& conf, std::uint64_t ordinal, Real tolerance) {
  if (conf.empty()) throw ProtocolError("empty confidence vector", ordinal);
  Real sum = 0;
  for (Real c : conf) {
    if (!std::isfinite(c) || c < 0) throw ProtocolError("confidence entries must be finite and nonnegative", ordinal);
    sum += c;
  }
  if (!(sum > 0)) throw ProtocolError("confidence vector sums to zero", ordinal);
  if (std::abs(sum - Real(1)) <= tolerance) return false;
  for (Real& c : conf) c /= sum;
  return true;
}

OracleResponse Oracle::query(std::span<const Real> latent, QueryPurpose purpose) {
  if (latent.size() != descriptor_.latent_dim) {
    throw InvalidInput("oracle query: latent has dimension " + std::to_string(latent.size()) + ", oracle expects " +
                       std::to_string(descriptor_.latent_dim));
  }
  const auto ordinal = ledger_.record(purpose);
  OracleResponse r = answer(latent, ordinal);
  if (r.confidence.size() != descriptor_.num_classes) {
    throw ProtocolError("confidence vector has " + std::to_string(r.confidence.size()) + " entries, expected " +
                            std::to_string(descriptor_.num_classes),
                        ordinal);
  }
  if (validate_confidences(r.confidence, ordinal)) ledger_.note_renormalization();
  return r;
}

std::size_t argmax(std::span<const Real> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace latinv
