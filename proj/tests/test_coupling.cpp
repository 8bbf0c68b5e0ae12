#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "doctest.h"
#include "rwdre/bruteforce.hpp"
#include "rwdre/coupling.hpp"
#include "rwdre/env.hpp"
#include "rwdre/model.hpp"
#include "rwdre/oracle.hpp"
#include "rwdre/rng.hpp"
#include "rwdre/walk.hpp"

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

env::EnvironmentLaw iid_law(double p_one) {
  env::EnvironmentLaw law;
  law.kind = env::LawKind::iid_field;
  law.alphabet_size = 2;
  law.p = {1.0 - p_one, p_one};
  law.validate();
  return law;
}

}  // namespace

TEST_CASE("epsilon decomposition reconstructs the kernel") {
  const auto spec = m1();
  const auto residual = coupling::epsilon_decomposition(spec, Vec{-1}, 0.25);
  // alpha(i, y) = eps 1_{y = z*} + (1 - eps) residual(i, y)
  CHECK(residual.rows[0][0] == doctest::Approx(2.0 / 3));
  CHECK(residual.rows[0][1] == doctest::Approx(1.0 / 3));
  CHECK(residual.rows[1][0] == doctest::Approx(0.0));
  CHECK(residual.rows[1][1] == doctest::Approx(1.0));

  rng::Stream gen{0xabcdULL, 0};
  for (int rep = 0; rep < 100; ++rep) {
    ModelSpec random = spec;
    for (auto& row : random.kernel.rows) {
      double total = 0.0;
      for (auto& p : row) {
        p = 0.05 + gen.next_unit();
        total += p;
      }
      for (auto& p : row) p /= total;
    }
    double min_minus = std::min(random.kernel.rows[0][0], random.kernel.rows[1][0]);
    const auto res = coupling::epsilon_decomposition(random, Vec{-1},
                                                     0.5 * min_minus);
    for (int i = 0; i < 2; ++i)
      for (int y = 0; y < 2; ++y) {
        const double rebuilt = 0.5 * min_minus * (y == 0 ? 1.0 : 0.0) +
                               (1.0 - 0.5 * min_minus) * res.rows[i][y];
        CHECK(std::abs(rebuilt - random.kernel.rows[i][y]) < 1e-12);
      }
  }
  CHECK_THROWS(coupling::epsilon_decomposition(spec, Vec{-1}, 0.3));
  CHECK_THROWS(coupling::epsilon_decomposition(spec, Vec{2}, 0.1));
}

TEST_CASE("tau_n finds the first all-small block") {
  const std::vector<double> u = {0.9, 0.01, 0.01, 0.9, 0.01};
  const auto t = coupling::tau_n(u, 0.05, 2);
  REQUIRE(t.has_value());
  CHECK(*t == 3);
  CHECK_FALSE(coupling::tau_n(u, 0.001, 2).has_value());
  const auto t1 = coupling::tau_n(u, 0.05, 1);
  REQUIRE(t1.has_value());
  CHECK(*t1 == 2);

  // Functional and span overloads agree.
  const auto fn = [&](std::int64_t i) { return u[i - 1]; };
  const auto tf = coupling::tau_n(fn, 0.05, 2, static_cast<std::int64_t>(u.size()));
  REQUIRE(tf.has_value());
  CHECK(*tf == 3);
}

TEST_CASE("tau_n_from_key matches scanning the same stream") {
  const std::uint64_t key = 0x1234ULL;
  std::vector<double> u(500);
  rng::fill_unit(key, 0, u);  // u_1 is drawn at counter 0
  for (double eps : {0.3, 0.5})
    for (std::int64_t n : {1, 2, 3}) {
      const auto a = coupling::tau_n_from_key(key, eps, n, 500);
      const auto b = coupling::tau_n(u, eps, n);
      CHECK(a == b);
    }
}

TEST_CASE("tau_n tail matches the geometric block bound in distribution") {
  const double eps = 0.5;
  const std::int64_t n = 2;
  int exceed = 0;
  const int runs = 20000, t0 = 10;
  for (int r = 0; r < runs; ++r) {
    const auto tau = coupling::tau_n_from_key(
        rng::hash_words({7, static_cast<std::uint64_t>(r)}), eps, n, 4000);
    REQUIRE(tau.has_value());
    if (*tau > t0) ++exceed;
  }
  const double bound = std::pow(1.0 - std::pow(eps, n), t0 / n);
  const double p_hat = exceed / static_cast<double>(runs);
  const double se = std::sqrt(bound * (1 - bound) / runs);
  CHECK(p_hat <= bound + 3 * se);
}

TEST_CASE("md_bound formula") {
  const auto phi = [](std::int64_t) { return 0.25; };
  const double c0 = std::log(4.0), c1 = 2.0 * std::log(4.0);
  const double t = 100.0;
  const double expected =
      0.25 + 2.0 * std::exp(-std::pow(t, 1.0 - c0 / c1) / (c1 * std::log(t)));
  CHECK(coupling::md_bound(t, c0, c1, phi) == doctest::Approx(expected));
}

TEST_CASE("default coin for the M1 kernel") {
  const auto coin = coupling::coin_for_condition_b(m1());
  CHECK(coin.eps == doctest::Approx(0.25));
  CHECK(coin.z_star == Vec{-1});
  CHECK(coin.c0 == doctest::Approx(std::log(4.0)));
  CHECK(coin.c1 == doctest::Approx(2.0 * std::log(4.0)));
}

TEST_CASE("coupled pair invariants on the torus") {
  const auto spec = m1();
  auto model = std::make_shared<env::TorusModel>(torus_law(0.3, 3), spec);
  const auto coin = coupling::coin_for_condition_b(spec);
  const auto histories = oracle::enumerate_histories(*model, 1);
  REQUIRE(histories.size() >= 2);
  const std::int64_t n = 2, T = 12;
  for (int r = 0; r < 200; ++r) {
    const auto run = coupling::coupled_pair_b(
        model, histories[0], histories[1], coin, n, T,
        rng::hash_words({99, static_cast<std::uint64_t>(r)}));
    REQUIRE(run.tau.has_value());
    CHECK(*run.tau == n);  // conditioned on the event {tau_n = n}
    REQUIRE(static_cast<std::int64_t>(run.lep0.size()) == T);
    REQUIRE(static_cast<std::int64_t>(run.lep1.size()) == T);
    for (std::int64_t t = 0; t < n; ++t) {
      // Coin steps: forced jump, environment unobserved.
      CHECK(run.lep0[t].jump == coin.z_star);
      CHECK(run.lep1[t].jump == coin.z_star);
      CHECK(run.lep0[t].pattern == 0);
      CHECK(run.lep1[t].pattern == 0);
    }
    if (run.first_disagreement_after.has_value()) {
      const std::int64_t f = *run.first_disagreement_after;
      CHECK(f >= n);
      for (std::int64_t t = n; t < f; ++t) {
        CHECK(run.lep0[t].pattern == run.lep1[t].pattern);
        CHECK(run.lep0[t].jump == run.lep1[t].jump);
      }
      CHECK_FALSE(run.env_coupled_ok);
    } else {
      CHECK(run.env_coupled_ok);
      for (std::int64_t t = n; t < T; ++t) {
        CHECK(run.lep0[t].pattern == run.lep1[t].pattern);
        CHECK(run.lep0[t].jump == run.lep1[t].jump);
      }
    }
  }
}

TEST_CASE("iid coupled pair never disagrees") {
  // Histories only constrain cells strictly before time 0, which are
  // independent of everything the coupled walks read.
  const auto spec = m1();
  const auto law = iid_law(0.7);
  const auto coin = coupling::coin_for_condition_b(spec);
  const auto a0 = coupling::sample_history(law, spec, 2, 11);
  const auto a1 = coupling::sample_history(law, spec, 2, 12);
  for (int r = 0; r < 100; ++r) {
    const auto run = coupling::coupled_pair_b_iid(
        law, spec, a0, a1, coin, 2, 10,
        rng::hash_words({13, static_cast<std::uint64_t>(r)}));
    CHECK(run.env_coupled_ok);
    CHECK_FALSE(run.first_disagreement_after.has_value());
  }
}

TEST_CASE("condition-a sampler reproduces the conditioned jump law") {
  const auto spec = m1();
  auto model = std::make_shared<env::TorusModel>(torus_law(0.3, 3), spec);
  coupling::CoinParams coin;
  coin.eps = 0.25;
  coin.c0 = std::log(4.0);
  coin.c1 = 2.0 * coin.c0;
  ObservationEvent event(BackwardPath({Vec{-1}, Vec{0}}, spec), {2}, spec);
  const int T = 3, runs = 60000;
  std::vector<double> freq(1 << T, 0.0);
  for (int r = 0; r < runs; ++r) {
    const auto jumps = coupling::run_condition_a(
        model, event, coin, 1, T,
        rng::hash_words({21, static_cast<std::uint64_t>(r)}));
    REQUIRE(static_cast<int>(jumps.size()) == T);
    int idx = 0;
    for (const auto& z : jumps) idx = 2 * idx + spec.range_column(z);
    freq[idx] += 1.0 / runs;
  }
  const auto exact = bruteforce::jump_sequence_law(*model, event, T);
  double tv = 0.0;
  for (int i = 0; i < (1 << T); ++i) tv += std::abs(freq[i] - exact[i]);
  CHECK(tv / 2.0 < 0.02);
}

TEST_CASE("sample_history yields valid events of the requested depth") {
  const auto spec = m1();
  const auto law = iid_law(0.7);
  for (int k : {1, 2, 3}) {
    const auto event = coupling::sample_history(
        law, spec, k, rng::hash_words({31, static_cast<std::uint64_t>(k)}));
    CHECK(static_cast<int>(event.patterns.size()) == k);
    CHECK(event.path.sites.back() == Vec{});
  }
}
