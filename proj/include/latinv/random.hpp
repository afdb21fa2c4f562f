#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "latinv/tensor.hpp"

namespace latinv {

using Rng = std::mt19937_64;

/// Mixes a base seed with stream tags (class index, purpose id...) into an
/// independent 64-bit seed. Stable across platforms.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

void fill_standard_normal(Rng& rng, std::span<Real> out);
std::vector<Real> standard_normal_vector(Rng& rng, std::size_t n);
Matrix standard_normal_matrix(Rng& rng, std::size_t rows, std::size_t cols);

std::string rng_state(const Rng& rng);
void restore_rng_state(Rng& rng, const std::string& state);

}  // namespace latinv
