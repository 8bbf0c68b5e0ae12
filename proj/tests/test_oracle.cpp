#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "doctest.h"
#include "rwdre/bruteforce.hpp"
#include "rwdre/env.hpp"
#include "rwdre/model.hpp"
#include "rwdre/oracle.hpp"

using namespace rwdre;

namespace {

ModelSpec m1() {
  ModelSpec spec;
  spec.d = 1;
  spec.alphabet_size = 2;
  spec.delta = {Vec{0}};
  spec.range = {Vec{-1}, Vec{1}};
  spec.kernel.rows = {{0.75, 0.25}, {0.25, 0.75}};
  spec.validate();
  return spec;
}

env::EnvironmentLaw torus_law(double q, int side) {
  env::EnvironmentLaw law;
  law.kind = env::LawKind::torus_markov;
  law.alphabet_size = 2;
  law.site_q = {{1.0 - q, q}, {q, 1.0 - q}};
  law.torus_side = side;
  law.dim = 1;
  law.validate();
  return law;
}

std::shared_ptr<const env::TorusModel> m2_model(double q = 0.3) {
  return std::make_shared<env::TorusModel>(torus_law(q, 3), m1());
}

}  // namespace

TEST_CASE("joint chain on the 3-torus has 8 states and a stationary law") {
  const auto chain = oracle::build_joint_chain(m2_model());
  REQUIRE(chain.n_states() == 8);
  for (const auto& row : chain.transition) {
    double total = 0.0;
    for (double p : row) {
      CHECK(p >= -1e-15);
      total += p;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Stationary law: normalized, with a negligible fixed-point residual. The
  // pattern-dependent re-centering skews it away from uniform, but flipping
  // every symbol and reflecting the torus maps the model to itself, so the
  // paired configurations carry equal weight.
  double mass = 0.0;
  for (double pi : chain.stationary) {
    CHECK(pi > 0.0);
    mass += pi;
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  const auto& model = *chain.model;
  for (int state = 0; state < 8; ++state) {
    std::vector<int> mirrored(3);
    for (int site = 0; site < 3; ++site)
      mirrored[(3 - site) % 3] = 1 - model.state_site(state, site);
    const int partner = model.state_of_sites(mirrored);
    CHECK(chain.stationary[state] ==
          doctest::Approx(chain.stationary[partner]).epsilon(1e-10));
  }
  for (int j = 0; j < 8; ++j) {
    double acc = 0.0;
    for (int i = 0; i < 8; ++i)
      acc += chain.stationary[i] * chain.transition[i][j];
    CHECK(std::abs(acc - chain.stationary[j]) < 1e-12);
  }
  CHECK(oracle::is_irreducible(chain));
  CHECK(oracle::is_aperiodic(chain));
}

TEST_CASE("exact speed vanishes by the 0/1 exchange symmetry") {
  const auto chain = oracle::build_joint_chain(m2_model());
  const auto v = oracle::exact_speed(chain);
  REQUIRE(v.size() == 1);
  CHECK(std::abs(v[0]) < 1e-12);
}

TEST_CASE("asymptotic variance is a quadratic form in theta") {
  const auto chain = oracle::build_joint_chain(m2_model());
  const double s1 = oracle::exact_asymptotic_variance(chain, {1.0});
  const double s2 = oracle::exact_asymptotic_variance(chain, {2.0});
  CHECK(s1 > 0.0);
  CHECK(s2 == doctest::Approx(4.0 * s1).epsilon(1e-10));
}

TEST_CASE("full refresh makes the steps iid with unit variance") {
  // q = 1/2 resamples every site uniformly each step, so the observed
  // pattern is uniform, each step is +-1 with probability 1/2, and
  // theta.X_n is a simple symmetric random walk.
  const auto chain = oracle::build_joint_chain(m2_model(0.5));
  const auto v = oracle::exact_speed(chain);
  CHECK(std::abs(v[0]) < 1e-12);
  CHECK(oracle::exact_asymptotic_variance(chain, {1.0}) ==
        doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("joint_advance preserves mass and fixes the stationary law") {
  const auto model = m2_model();
  const auto chain = oracle::build_joint_chain(model);
  auto w = chain.stationary;
  oracle::joint_advance(*model, w);
  double total = 0.0;
  for (int i = 0; i < 8; ++i) {
    CHECK(w[i] == doctest::Approx(chain.stationary[i]).epsilon(1e-12));
    total += w[i];
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("LEP window law matches brute-force enumeration") {
  const auto model = m2_model();
  const auto spec = m1();
  BackwardPath path({Vec{-1}, Vec{0}}, spec);
  ObservationEvent event(path, {2}, spec);
  const auto post = bruteforce::posterior(*model, event);
  for (std::int64_t t : {1, 2})
    for (int h : {1, 2}) {
      const auto exact = oracle::lep_window_law(*model, post, t, h);
      const auto brute = bruteforce::lep_window_law(*model, event, t, h);
      REQUIRE(exact.size() == brute.size());
      double total = 0.0;
      for (std::size_t i = 0; i < exact.size(); ++i) {
        CHECK(std::abs(exact[i] - brute[i]) < 1e-10);
        total += exact[i];
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("environment window law matches brute-force enumeration") {
  const auto model = m2_model();
  const auto spec = m1();
  ObservationEvent event(BackwardPath({Vec{-1}, Vec{0}}, spec), {1}, spec);
  const auto post = bruteforce::posterior(*model, event);
  for (std::int64_t t : {1, 2}) {
    const auto exact = oracle::env_window_law(*model, post, t, 2);
    const auto brute = bruteforce::env_window_law(*model, &event, t, 2);
    REQUIRE(exact.size() == brute.size());
    for (std::size_t i = 0; i < exact.size(); ++i)
      CHECK(std::abs(exact[i] - brute[i]) < 1e-10);
  }
}

TEST_CASE("total_variation basics") {
  CHECK(oracle::total_variation({0.5, 0.5}, {0.5, 0.5}) == doctest::Approx(0.0));
  CHECK(oracle::total_variation({1.0, 0.0}, {0.0, 1.0}) == doctest::Approx(1.0));
  CHECK(oracle::total_variation({0.7, 0.3}, {0.3, 0.7}) == doctest::Approx(0.4));
}

TEST_CASE("history enumeration produces valid, positive-probability events") {
  const auto model = m2_model();
  const auto histories = oracle::enumerate_histories(*model, 2);
  CHECK_FALSE(histories.empty());
  for (const auto& event : histories) {
    const auto post = bruteforce::posterior(*model, event);
    double mass = 0.0;
    for (double w : post) mass += w;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
  }
  // Depth 1: two possible increments times two observable patterns.
  const auto depth1 = oracle::enumerate_histories(*model, 1);
  CHECK(depth1.size() == 4);
}

TEST_CASE("exact phi_hat agrees with brute-force TV over history pairs") {
  const auto model = m2_model();
  const auto histories = oracle::enumerate_histories(*model, 1);
  double brute_max = 0.0;
  for (const auto& a0 : histories)
    for (const auto& a1 : histories) {
      const double exact = oracle::exact_phi_hat_torus(*model, a0, a1, 2, 2);
      const double brute = bruteforce::phi_hat(*model, a0, a1, 2, 2);
      CHECK(std::abs(exact - brute) < 1e-10);
      brute_max = std::max(brute_max, brute);
    }
  CHECK(std::abs(oracle::exact_phi_hat(*model, 2, 1, 2) - brute_max) < 1e-10);
}

TEST_CASE("exact phi_tilde agrees with brute force once the cone wraps") {
  // At t >= 2 the cone section covers all three torus sites, so comparing
  // whole configuration paths is exactly the cone quantity.
  const auto model = m2_model();
  const auto histories = oracle::enumerate_histories(*model, 1);
  for (std::int64_t t : {2, 3}) {
    double brute_max = 0.0;
    for (const auto& event : histories)
      brute_max = std::max(brute_max, bruteforce::phi_tilde(*model, event, t, 2));
    CHECK(std::abs(oracle::exact_phi_tilde(*model, t, 1, 2) - brute_max) < 1e-10);
  }
}

TEST_CASE("phi_tilde decays geometrically in t") {
  // Single-site flips with q = 0.3 forget at rate |1-2q| per step, so the
  // exact values at successive times shrink by that factor.
  const auto model = m2_model();
  const double p1 = oracle::exact_phi_tilde(*model, 1, 1, 1);
  const double p2 = oracle::exact_phi_tilde(*model, 2, 1, 1);
  const double p3 = oracle::exact_phi_tilde(*model, 3, 1, 1);
  CHECK(p1 > p2);
  CHECK(p2 > p3);
  CHECK(p2 / p1 == doctest::Approx(0.4).epsilon(1e-8));
  CHECK(p3 / p2 == doctest::Approx(0.4).epsilon(1e-8));
}
