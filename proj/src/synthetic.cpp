#include "latinv/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "latinv/error.hpp"
#include "latinv/random.hpp"

namespace latinv {
namespace {

constexpr int kMaxAttempts = 1000;
// Generator rows are scaled so W z has roughly unit variance per component
// for anchors of scale kAnchorScale; larger gain pushes tanh into saturation.
constexpr Real kGeneratorGain = Real(2.5);
constexpr Real kAnchorScale = Real(0.6);

Real squared_distance(std::span<const Real> a, std::span<const Real> b) {
  Real s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Real d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

Real min_pairwise_distance(const Matrix& points) {
  Real best = std::numeric_limits<Real>::infinity();
  for (std::size_t i = 0; i < points.rows; ++i) {
    for (std::size_t j = i + 1; j < points.rows; ++j) {
      best = std::min(best, std::sqrt(squared_distance(points.row(i), points.row(j))));
    }
  }
  return best;
}

bool eval_matches_target(const Matrix& target, const Matrix& eval) {
  for (std::size_t i = 0; i < eval.rows; ++i) {
    std::size_t nearest = 0;
    Real best = std::numeric_limits<Real>::infinity();
    for (std::size_t j = 0; j < target.rows; ++j) {
      const Real d = squared_distance(eval.row(i), target.row(j));
      if (d < best) {
        best = d;
        nearest = j;
      }
    }
    if (nearest != i) return false;
    // The invariant as stated: target i's nearest evaluation centroid is i.
    Real own = squared_distance(target.row(i), eval.row(i));
    for (std::size_t j = 0; j < eval.rows; ++j) {
      if (j != i && squared_distance(target.row(i), eval.row(j)) <= own) return false;
    }
  }
  return true;
}

}  // namespace

SyntheticWorld make_world(const SyntheticParams& p) {
  if (p.latent_dim == 0 || p.feature_dim == 0 || p.num_classes == 0) {
    throw ConfigError("synthetic world dimensions must be positive");
  }
  if (!(p.temperature > 0)) throw ConfigError("synthetic world temperature must be positive");
  if (!(p.separation >= 0) || !(p.perturbation >= 0)) {
    throw ConfigError("separation and perturbation must be nonnegative");
  }

  SyntheticWorld w;
  w.params = p;
  Rng rng(derive_seed(p.seed, {0x5eed}));
  const Real gen_scale = kGeneratorGain / (kAnchorScale * std::sqrt(static_cast<Real>(p.latent_dim)));

  bool placed = false;
  for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
    w.generator = standard_normal_matrix(rng, p.feature_dim, p.latent_dim);
    as_eigen(w.generator) *= gen_scale;
    w.anchors = standard_normal_matrix(rng, p.num_classes, p.latent_dim);
    as_eigen(w.anchors) *= kAnchorScale;
    w.target_centroids = Matrix(p.num_classes, p.feature_dim);
    for (std::size_t i = 0; i < p.num_classes; ++i) {
      auto x = synth_generate(w, w.anchors.row(i));
      std::copy(x.begin(), x.end(), w.target_centroids.row(i).begin());
    }
    placed = p.num_classes < 2 || min_pairwise_distance(w.target_centroids) >= p.separation;
  }
  if (!placed) {
    throw ConfigError("could not place " + std::to_string(p.num_classes) + " centroids at separation " +
                      std::to_string(p.separation) + " in dimension " + std::to_string(p.feature_dim));
  }

  const Real offset_sd = p.perturbation / std::sqrt(static_cast<Real>(p.feature_dim));
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    w.eval_centroids = w.target_centroids;
    if (p.perturbation > 0) {
      Matrix noise = standard_normal_matrix(rng, p.num_classes, p.feature_dim);
      as_eigen(w.eval_centroids) += offset_sd * as_eigen(noise);
    }
    if (eval_matches_target(w.target_centroids, w.eval_centroids)) return w;
  }
  throw ConfigError("evaluation centroids could not be matched to target centroids; perturbation " +
                    std::to_string(p.perturbation) + " is too large for separation " + std::to_string(p.separation));
}

std::vector<Real> synth_generate(const SyntheticWorld& world, std::span<const Real> latent) {
  if (latent.size() != world.latent_dim()) {
    throw InvalidInput("synth_generate: latent has dimension " + std::to_string(latent.size()) + ", expected " +
                       std::to_string(world.latent_dim()));
  }
  std::vector<Real> x(world.feature_dim());
  for (std::size_t r = 0; r < x.size(); ++r) {
    auto w = world.generator.row(r);
    Real acc = 0;
    for (std::size_t c = 0; c < latent.size(); ++c) acc += w[c] * latent[c];
    x[r] = std::tanh(acc);
  }
  return x;
}

std::vector<Real> synth_classify(const SyntheticWorld& world, std::span<const Real> feature, ClassifierView view) {
  if (feature.size() != world.feature_dim()) {
    throw InvalidInput("synth_classify: feature has dimension " + std::to_string(feature.size()) + ", expected " +
                       std::to_string(world.feature_dim()));
  }
  const Matrix& centroids = view == ClassifierView::target ? world.target_centroids : world.eval_centroids;
  std::vector<Real> logits(centroids.rows);
  for (std::size_t i = 0; i < centroids.rows; ++i) {
    logits[i] = -squared_distance(feature, centroids.row(i)) / world.params.temperature;
  }
  const Real top = *std::max_element(logits.begin(), logits.end());
  Real z = 0;
  for (auto& l : logits) {
    l = std::exp(l - top);
    z += l;
  }
  for (auto& l : logits) l /= z;
  return logits;
}

Matrix synth_private_features(const SyntheticWorld& world, std::size_t label, std::size_t count,
                              std::uint64_t seed) {
  if (label >= world.num_classes()) throw InvalidInput("private features: class index out of range");
  Rng rng(derive_seed(seed, {0x9717, label}));
  Matrix out(count, world.feature_dim());
  const std::size_t max_draws = std::max<std::size_t>(count, 1) * world.num_classes() * 2000;
  std::size_t filled = 0;
  std::vector<Real> z(world.latent_dim());
  for (std::size_t draw = 0; draw < max_draws && filled < count; ++draw) {
    fill_standard_normal(rng, z);
    auto x = synth_generate(world, z);
    auto conf = synth_classify(world, x, ClassifierView::target);
    if (argmax(conf) != label) continue;
    std::copy(x.begin(), x.end(), out.row(filled).begin());
    ++filled;
  }
  if (filled < count) {
    throw Unavailable("class " + std::to_string(label) + " region too small to draw " + std::to_string(count) +
                      " private samples");
  }
  return out;
}

SyntheticOracle::SyntheticOracle(std::shared_ptr<const SyntheticWorld> world, ClassifierView view)
    : Oracle(OracleDescriptor{world->latent_dim(), world->num_classes(), world->feature_dim(), OracleKind::synthetic}),
      world_(std::move(world)),
      view_(view) {}

OracleResponse SyntheticOracle::answer(std::span<const Real> latent, std::uint64_t) {
  OracleResponse r;
  r.confidence = synth_classify(*world_, synth_generate(*world_, latent), view_);
  return r;
}

}  // namespace latinv
