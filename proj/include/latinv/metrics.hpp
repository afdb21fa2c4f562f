#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "latinv/oracle.hpp"
#include "latinv/tensor.hpp"

namespace latinv {

/// Private samples of one class, one feature vector per row.
struct FeatureSet {
  std::size_t label = 0;
  Matrix features;
};

struct MetricsReport {
  Real attack_accuracy = 0;
  Real knn_dist = 0;
  Real feat_dist = 0;
  Real density = 0;
  Real coverage = 0;
  std::uint64_t queries_used = 0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

struct Reconstruction {
  std::vector<Real> latent;
  std::size_t target_class = 0;
};

/// Fraction of reconstructions the evaluation oracle assigns (argmax) to their
/// target class. Queries are billed to QueryPurpose::evaluation.
Real attack_accuracy(std::span<const Reconstruction> recons, Oracle& eval_oracle);

/// Mean over rows of `recon_features` of the distance to the nearest sample in `target`.
Real knn_dist(const Matrix& recon_features, const FeatureSet& target);

/// Mean distance from each reconstruction feature to the centroid of `target`.
Real feat_dist(const Matrix& recon_features, const FeatureSet& target);

struct DensityCoverage {
  Real density = 0;
  Real coverage = 0;
};

/// k-NN-ball density and coverage of `fake` against the manifold of `real`.
/// A real point's ball radius is the distance to its neighbor_k-th nearest
/// other real point; membership is distance <= radius.
DensityCoverage density_coverage(const Matrix& real, const Matrix& fake, std::size_t neighbor_k = 5);

}  // namespace latinv
