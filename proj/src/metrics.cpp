#include "latinv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "latinv/error.hpp"

namespace latinv {
namespace {

// Plain loop so the result never depends on buffer alignment.
Real distance(std::span<const Real> a, std::span<const Real> b) {
  Real s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Real d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Pairwise Euclidean distances, rows of a against rows of b.
Matrix pairwise_distances(const Matrix& a, const Matrix& b) {
  Matrix d(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) d(i, j) = distance(a.row(i), b.row(j));
  }
  return d;
}

void check_sets(const Matrix& recon, const FeatureSet& target, const char* op) {
  if (recon.rows == 0 || target.features.rows == 0) throw Unavailable(std::string(op) + ": empty feature set");
  if (recon.cols != target.features.cols) {
    throw InvalidInput(std::string(op) + ": feature dimensions differ (" + std::to_string(recon.cols) + " vs " +
                       std::to_string(target.features.cols) + ")");
  }
}

}  // namespace

Real attack_accuracy(std::span<const Reconstruction> recons, Oracle& eval_oracle) {
  if (recons.empty()) throw Unavailable("attack_accuracy: no reconstructions");
  std::size_t hits = 0;
  for (const auto& r : recons) {
    auto resp = eval_oracle.query(r.latent, QueryPurpose::evaluation);
    if (argmax(resp.confidence) == r.target_class) ++hits;
  }
  return static_cast<Real>(hits) / static_cast<Real>(recons.size());
}

Real knn_dist(const Matrix& recon_features, const FeatureSet& target) {
  check_sets(recon_features, target, "knn_dist");
  const Matrix d = pairwise_distances(recon_features, target.features);
  Real sum = 0;
  for (std::size_t i = 0; i < d.rows; ++i) {
    auto row = d.row(i);
    sum += *std::min_element(row.begin(), row.end());
  }
  return sum / static_cast<Real>(d.rows);
}

Real feat_dist(const Matrix& recon_features, const FeatureSet& target) {
  check_sets(recon_features, target, "feat_dist");
  const Matrix& t = target.features;
  std::vector<Real> centroid(t.cols, Real(0));
  for (std::size_t r = 0; r < t.rows; ++r) {
    for (std::size_t c = 0; c < t.cols; ++c) centroid[c] += t(r, c);
  }
  for (auto& v : centroid) v /= static_cast<Real>(t.rows);
  Real sum = 0;
  for (std::size_t i = 0; i < recon_features.rows; ++i) sum += distance(recon_features.row(i), centroid);
  return sum / static_cast<Real>(recon_features.rows);
}

DensityCoverage density_coverage(const Matrix& real, const Matrix& fake, std::size_t neighbor_k) {
  if (neighbor_k < 1) throw InvalidInput("density_coverage: neighbor_k must be >= 1");
  if (real.rows < neighbor_k + 1 || fake.rows < neighbor_k + 1) {
    throw Unavailable("density_coverage: both sets need at least neighbor_k + 1 = " + std::to_string(neighbor_k + 1) +
                      " points");
  }
  if (real.cols != fake.cols) throw InvalidInput("density_coverage: feature dimensions differ");

  const Matrix rr = pairwise_distances(real, real);
  std::vector<Real> radius(real.rows);
  std::vector<Real> scratch;
  for (std::size_t i = 0; i < real.rows; ++i) {
    scratch.assign(rr.row(i).begin(), rr.row(i).end());
    // index 0 after sorting is the point itself (distance 0)
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(neighbor_k), scratch.end());
    radius[i] = scratch[neighbor_k];
  }

  const Matrix rf = pairwise_distances(real, fake);
  std::size_t memberships = 0;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < real.rows; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < fake.rows; ++j) {
      if (rf(i, j) <= radius[i]) {
        ++memberships;
        any = true;
      }
    }
    if (any) ++covered;
  }
  DensityCoverage dc;
  dc.density = static_cast<Real>(memberships) / (static_cast<Real>(neighbor_k) * static_cast<Real>(fake.rows));
  dc.coverage = static_cast<Real>(covered) / static_cast<Real>(real.rows);
  return dc;
}

}  // namespace latinv
