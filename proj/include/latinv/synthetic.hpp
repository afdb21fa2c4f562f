#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "latinv/oracle.hpp"
#include "latinv/tensor.hpp"

namespace latinv {

/// Parameters of a transparent generator-plus-classifier world.
struct SyntheticParams {
  std::uint64_t seed = 1;
  std::size_t latent_dim = 16;   // k
  std::size_t feature_dim = 32;  // d
  std::size_t num_classes = 10;  // K
  Real separation = Real(4.0);   // floor on pairwise target-centroid distance
  Real temperature = Real(4.0);
  Real perturbation = Real(0.4);  // expected norm of the evaluation-centroid offset

  friend bool operator==(const SyntheticParams&, const SyntheticParams&) = default;
};

/// Generator G(z) = tanh(W z) and two nearest-centroid softmax classifiers:
/// the attack-time target classifier and a perturbed evaluation classifier.
/// Each target centroid is the image of an anchor latent, so every class has a
/// latent reaching confidence ~1.
struct SyntheticWorld {
  SyntheticParams params;
  Matrix generator;           // d x k
  Matrix anchors;             // K x k
  Matrix target_centroids;    // K x d
  Matrix eval_centroids;      // K x d

  std::size_t latent_dim() const { return generator.cols; }
  std::size_t feature_dim() const { return generator.rows; }
  std::size_t num_classes() const { return target_centroids.rows; }
};

enum class ClassifierView { target, evaluation };

/// Deterministic in params.seed. Throws ConfigError when the separation floor
/// or the nearest-match invariant cannot be met within the retry budget.
SyntheticWorld make_world(const SyntheticParams& params);

std::vector<Real> synth_generate(const SyntheticWorld& world, std::span<const Real> latent);

/// Softmax over -||x - mu_i||^2 / temperature.
std::vector<Real> synth_classify(const SyntheticWorld& world, std::span<const Real> feature, ClassifierView view);

/// Private ("real") feature samples of `label`: generator images of prior
/// latents that the target classifier assigns to `label`.
Matrix synth_private_features(const SyntheticWorld& world, std::size_t label, std::size_t count,
                              std::uint64_t seed);

/// In-process oracle over a shared immutable world. Features are never
/// returned through `query`; use `synth_generate` as the trusted channel.
class SyntheticOracle final : public Oracle {
 public:
  SyntheticOracle(std::shared_ptr<const SyntheticWorld> world, ClassifierView view);

  const SyntheticWorld& world() const { return *world_; }

 protected:
  OracleResponse answer(std::span<const Real> latent, std::uint64_t ordinal) override;

 private:
  std::shared_ptr<const SyntheticWorld> world_;
  ClassifierView view_;
};

}  // namespace latinv
