#include "latinv/random.hpp"

#include <sstream>

#include "latinv/error.hpp"

namespace latinv {

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * tags.size());
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(base);
  for (auto t : tags) push(t);
  std::seed_seq seq(words.begin(), words.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

// A fresh distribution per call keeps all state inside the engine, so a
// checkpointed engine alone reproduces every later draw.
void fill_standard_normal(Rng& rng, std::span<Real> out) {
  std::normal_distribution<Real> normal(Real(0), Real(1));
  for (auto& x : out) x = normal(rng);
}

std::vector<Real> standard_normal_vector(Rng& rng, std::size_t n) {
  std::vector<Real> v(n);
  fill_standard_normal(rng, v);
  return v;
}

Matrix standard_normal_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  fill_standard_normal(rng, m.values);
  return m;
}

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void restore_rng_state(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw InvalidInput("corrupt random engine state");
}

}  // namespace latinv
