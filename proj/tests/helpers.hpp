#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "latinv/oracle.hpp"

namespace latinv::test {

/// Oracle answering through an arbitrary function of the latent.
class FunctionOracle final : public Oracle {
 public:
  using Fn = std::function<std::vector<Real>(std::span<const Real>)>;
  FunctionOracle(std::size_t k, std::size_t K, Fn fn)
      : Oracle(OracleDescriptor{k, K, 0, OracleKind::synthetic}), fn_(std::move(fn)) {}

 protected:
  OracleResponse answer(std::span<const Real> latent, std::uint64_t) override { return {fn_(latent), {}}; }

 private:
  Fn fn_;
};

inline FunctionOracle fixed_oracle(std::size_t k, std::vector<Real> conf) {
  const std::size_t K = conf.size();
  return FunctionOracle(k, K, [conf = std::move(conf)](std::span<const Real>) { return conf; });
}

}  // namespace latinv::test
