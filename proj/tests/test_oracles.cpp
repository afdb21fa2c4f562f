#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "latinv/error.hpp"
#include "latinv/oracle.hpp"
#include "latinv/random.hpp"
#include "latinv/synthetic.hpp"

using namespace latinv;

namespace {

SyntheticWorld hand_world(Matrix centroids, Real temperature) {
  SyntheticWorld w;
  w.params.latent_dim = 1;
  w.params.feature_dim = centroids.cols;
  w.params.num_classes = centroids.rows;
  w.params.temperature = temperature;
  w.generator = Matrix(centroids.cols, 1);
  w.anchors = Matrix(centroids.rows, 1);
  w.target_centroids = centroids;
  w.eval_centroids = centroids;
  return w;
}

// log c_y(z) and its gradient in z, derived by hand for x = tanh(W z) and
// logits -||x - mu_i||^2 / T.
Real log_conf(const SyntheticWorld& w, const std::vector<Real>& z, std::size_t y, std::vector<Real>& grad) {
  const std::size_t d = w.feature_dim();
  const auto x = synth_generate(w, z);
  const auto p = synth_classify(w, x, ClassifierView::target);
  std::vector<Real> gx(d, 0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Real c = (i == y ? 1 : 0) - p[i];
    for (std::size_t r = 0; r < d; ++r) gx[r] += c * -2 * (x[r] - w.target_centroids(i, r)) / w.params.temperature;
  }
  grad.assign(z.size(), 0);
  for (std::size_t r = 0; r < d; ++r) {
    const Real g = gx[r] * (1 - x[r] * x[r]);
    for (std::size_t c = 0; c < z.size(); ++c) grad[c] += g * w.generator(r, c);
  }
  return std::log(p[y]);
}

// Normalized gradient ascent, optionally projected onto [-box, box]^k.
Real direct_optimum(const SyntheticWorld& w, std::size_t y, Real box, Rng& rng) {
  Real best = -1e300;
  std::vector<Real> z(w.latent_dim()), g;
  for (int start = 0; start < 5; ++start) {
    fill_standard_normal(rng, z);
    for (int it = 0; it < 2000; ++it) {
      log_conf(w, z, y, g);
      Real n = 0;
      for (Real v : g) n += v * v;
      n = std::sqrt(n) + 1e-12;
      for (std::size_t c = 0; c < z.size(); ++c) {
        z[c] += Real(0.05) * g[c] / n;
        if (box > 0) z[c] = std::clamp(z[c], -box, box);
      }
    }
    best = std::max(best, log_conf(w, z, y, g));
  }
  return std::exp(best);
}

}  // namespace

TEST_CASE("generator is tanh of a linear map") {
  const auto w = make_world(SyntheticParams{});
  const std::vector<Real> zero(w.latent_dim(), 0);
  for (Real v : synth_generate(w, zero)) CHECK(v == 0);
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto z = standard_normal_vector(rng, w.latent_dim());
    const auto x = synth_generate(w, z);
    REQUIRE(x.size() == w.feature_dim());
    for (std::size_t r = 0; r < x.size(); ++r) {
      long double acc = 0;
      for (std::size_t c = 0; c < z.size(); ++c) acc += static_cast<long double>(w.generator(r, c)) * z[c];
      CHECK(x[r] == doctest::Approx(static_cast<double>(std::tanh(acc))).epsilon(1e-12));
      CHECK(std::abs(x[r]) < 1);
    }
  }
  CHECK_THROWS_AS(synth_generate(w, std::vector<Real>(3)), InvalidInput);
}

TEST_CASE("classifier softmax properties") {
  const auto w = make_world(SyntheticParams{});
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const auto x = standard_normal_vector(rng, w.feature_dim());
    for (auto view : {ClassifierView::target, ClassifierView::evaluation}) {
      const auto p = synth_classify(w, x, view);
      Real s = 0;
      for (Real v : p) {
        CHECK(v > 0);
        s += v;
      }
      CHECK(std::abs(s - 1) < 1e-9);
    }
  }
  CHECK_THROWS_AS(synth_classify(w, std::vector<Real>(5), ClassifierView::target), InvalidInput);

  const auto two = hand_world(Matrix::from_rows({{1, 0}, {-1, 0}}), 0.5);
  const auto half = synth_classify(two, std::vector<Real>{0, 3}, ClassifierView::target);
  CHECK(half[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(half[1] == doctest::Approx(0.5).epsilon(1e-15));

  // Centroid with every other centroid at distance >= 10 * temperature.
  const Real T = 0.5;
  const auto far = hand_world(Matrix::from_rows({{0, 0, 0}, {5, 0, 0}, {0, 5, 0}, {0, 0, -5}}), T);
  const auto at = synth_classify(far, std::vector<Real>{0, 0, 0}, ClassifierView::target);
  const Real expected = 1 / (1 + 3 * std::exp(-25 / T));
  CHECK(at[0] > 0.99);
  CHECK(at[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("worlds are deterministic and honor their construction guarantees") {
  SyntheticParams p;
  const auto a = make_world(p);
  const auto b = make_world(p);
  CHECK(a.generator == b.generator);
  CHECK(a.target_centroids == b.target_centroids);
  CHECK(a.eval_centroids == b.eval_centroids);

  p.perturbation = 0;
  const auto flat = make_world(p);
  CHECK(flat.eval_centroids == flat.target_centroids);

  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    SyntheticParams q;
    q.seed = seed;
    const auto w = make_world(q);
    const Matrix& mu = w.target_centroids;
    const Matrix& ev = w.eval_centroids;
    for (std::size_t i = 0; i < mu.rows; ++i) {
      std::size_t nearest = 0;
      Real nearest_d = 1e300;
      for (std::size_t j = 0; j < mu.rows; ++j) {
        Real dd = 0, de = 0;
        for (std::size_t c = 0; c < mu.cols; ++c) {
          dd += (mu(i, c) - mu(j, c)) * (mu(i, c) - mu(j, c));
          de += (mu(i, c) - ev(j, c)) * (mu(i, c) - ev(j, c));
        }
        if (j != i) CHECK(std::sqrt(dd) >= q.separation);
        if (de < nearest_d) {
          nearest_d = de;
          nearest = j;
        }
      }
      CHECK(nearest == i);
    }
  }

  SyntheticParams impossible;
  impossible.separation = 100;
  CHECK_THROWS_AS(make_world(impossible), ConfigError);
  SyntheticParams bad;
  bad.temperature = 0;
  CHECK_THROWS_AS(make_world(bad), ConfigError);
}

TEST_CASE("every class of the default world is attainable above 0.99") {
  const auto w = make_world(SyntheticParams{});
  Rng rng(12);
  for (std::size_t y = 0; y < w.num_classes(); ++y) {
    CAPTURE(y);
    CHECK(direct_optimum(w, y, 0, rng) > 0.99);
    // ...and inside the agent's default action box.
    CHECK(direct_optimum(w, y, 1, rng) > 0.99);
  }
}

TEST_CASE("synthetic oracle composes generator and classifier and bills queries") {
  auto world = std::make_shared<const SyntheticWorld>(make_world(SyntheticParams{}));
  SyntheticOracle target(world, ClassifierView::target);
  SyntheticOracle eval(world, ClassifierView::evaluation);
  CHECK(target.descriptor().latent_dim == 16);
  CHECK(target.descriptor().num_classes == 10);
  Rng rng(5);
  for (std::uint64_t n = 0; n < 20; ++n) {
    const auto z = standard_normal_vector(rng, 16);
    CHECK(target.ledger().total() == n);
    const auto r = target.query(z, QueryPurpose::training);
    CHECK(target.ledger().total() == n + 1);
    CHECK(r.confidence == synth_classify(*world, synth_generate(*world, z), ClassifierView::target));
    CHECK(r.feature.empty());
    CHECK(eval.query(z, QueryPurpose::evaluation).confidence ==
          synth_classify(*world, synth_generate(*world, z), ClassifierView::evaluation));
  }
  CHECK_THROWS_AS(target.query(std::vector<Real>(3), QueryPurpose::training), InvalidInput);
  CHECK(target.ledger().count(QueryPurpose::training) == 20);
  CHECK(eval.ledger().count(QueryPurpose::evaluation) == 20);
}

TEST_CASE("private features fall in their class region") {
  const auto w = make_world(SyntheticParams{});
  for (std::size_t y : {0u, 5u, 9u}) {
    const Matrix f = synth_private_features(w, y, 50, 77);
    REQUIRE(f.rows == 50);
    for (std::size_t r = 0; r < f.rows; ++r) CHECK(argmax(synth_classify(w, f.row(r), ClassifierView::target)) == y);
    CHECK(synth_private_features(w, y, 50, 77) == f);
  }
  CHECK_THROWS_AS(synth_private_features(w, 10, 5, 1), InvalidInput);
}

TEST_CASE("confidence validation") {
  std::vector<Real> ok{0.25, 0.75};
  CHECK_FALSE(validate_confidences(ok, 1));
  CHECK(ok == std::vector<Real>{0.25, 0.75});
  std::vector<Real> near{0.25, 0.75 + 5e-7};
  CHECK_FALSE(validate_confidences(near, 1));
  std::vector<Real> off{1.0, 3.0};
  CHECK(validate_confidences(off, 1));
  CHECK(off == std::vector<Real>{0.25, 0.75});
  std::vector<Real> neg{-0.1, 1.1};
  CHECK_THROWS_AS(validate_confidences(neg, 4), ProtocolError);
  std::vector<Real> nan{std::nan(""), 1.0};
  CHECK_THROWS_AS(validate_confidences(nan, 4), ProtocolError);
  std::vector<Real> zero{0.0, 0.0};
  try {
    validate_confidences(zero, 9);
    FAIL("expected a protocol error");
  } catch (const ProtocolError& e) {
    CHECK(e.ordinal() == 9);
    CHECK(std::string(e.what()).find("query #9") != std::string::npos);
  }

  auto skewed = test::fixed_oracle(1, {2.0, 2.0});
  const auto r = skewed.query(std::vector<Real>{0}, QueryPurpose::training);
  CHECK(r.confidence == std::vector<Real>{0.5, 0.5});
  CHECK(skewed.ledger().snapshot().renormalizations == 1);
  auto wrong_len = test::fixed_oracle(1, {1.0});
  test::FunctionOracle short_oracle(1, 2, [](std::span<const Real>) { return std::vector<Real>{1.0}; });
  CHECK_THROWS_AS(short_oracle.query(std::vector<Real>{0}, QueryPurpose::training), ProtocolError);
  CHECK(short_oracle.ledger().total() == 1);
}

TEST_CASE("query ledger is monotone, partitioned and thread-safe") {
  QueryLedger ledger;
  CHECK(ledger.record(QueryPurpose::training) == 1);
  CHECK(ledger.record(QueryPurpose::warmup) == 2);
  CHECK(ledger.record(QueryPurpose::evaluation) == 3);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&ledger] {
      for (int i = 0; i < 10000; ++i) ledger.record(QueryPurpose::training);
    });
  }
  for (auto& t : threads) t.join();
  const auto snap = ledger.snapshot();
  CHECK(snap.total() == 40003);
  CHECK(snap.count(QueryPurpose::training) == 40001);
  CHECK(snap.count(QueryPurpose::warmup) == 1);
  QueryLedger other;
  other.restore(snap);
  CHECK(other.snapshot() == snap);
  CHECK(other.record(QueryPurpose::warmup) == 40004);
}
