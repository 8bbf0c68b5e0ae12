#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "doctest.h"
#include "rwdre/bruteforce.hpp"
#include "rwdre/coupling.hpp"
#include "rwdre/env.hpp"
#include "rwdre/mixing.hpp"
#include "rwdre/model.hpp"
#include "rwdre/oracle.hpp"
#include "rwdre/stats.hpp"
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

env::EnvironmentLaw iid_law(double p_one) {
  env::EnvironmentLaw law;
  law.kind = env::LawKind::iid_field;
  law.alphabet_size = 2;
  law.p = {1.0 - p_one, p_one};
  law.validate();
  return law;
}

env::EnvironmentLaw chain_law(double q) {
  env::EnvironmentLaw law;
  law.kind = env::LawKind::independent_site_chain;
  law.alphabet_size = 2;
  law.site_q = {{1.0 - q, q}, {q, 1.0 - q}};
  law.validate();
  return law;
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

}  // namespace

TEST_CASE("phi_tilde is exactly zero for iid fields") {
  const auto e = mixing::estimate_phi_tilde(iid_law(0.7), m1(), 3, 2, 2, 10, 1);
  CHECK(e.mode == mixing::Mode::exact);
  CHECK(e.value == 0.0);
  CHECK(e.coefficient == "phi_tilde");
  CHECK(e.t == 3);
}

TEST_CASE("torus phi_tilde estimate matches brute-force enumeration") {
  const auto spec = m1();
  const auto law = torus_law(0.3, 3);
  env::TorusModel model(law, spec);
  const auto histories = oracle::enumerate_histories(model, 1);
  double brute_max = 0.0;
  for (const auto& event : histories)
    brute_max = std::max(brute_max, bruteforce::phi_tilde(model, event, 2, 2));
  const auto e = mixing::estimate_phi_tilde(law, spec, 2, 1, 2, 10, 1);
  CHECK(e.mode == mixing::Mode::exact);
  CHECK(std::abs(e.value - brute_max) < 1e-10);
}

TEST_CASE("analytic phi_tilde bound dominates the exact torus values") {
  const auto spec = m1();
  const auto law = torus_law(0.3, 3);
  env::TorusModel model(law, spec);
  for (std::int64_t t = 1; t <= 6; ++t) {
    const auto bound = mixing::analytic_phi_tilde_bound(law, spec, t);
    CHECK(bound.mode == mixing::Mode::analytic_upper_bound);
    const double expected =
        std::min(1.0, static_cast<double>(spec.delta.size()) *
                          std::pow(0.4, static_cast<double>(t)) / 0.6);
    CHECK(bound.value == doctest::Approx(expected).epsilon(1e-12));
    CHECK(oracle::exact_phi_tilde(model, t, 2, 2) <= bound.value + 1e-12);
  }
  const auto zero = mixing::analytic_phi_tilde_bound(iid_law(0.7), spec, 5);
  CHECK(zero.value == 0.0);
}

TEST_CASE("site-chain phi_tilde lower bound is monotone in the budget") {
  const auto spec = m1();
  const auto law = chain_law(0.3);
  const auto small = mixing::estimate_phi_tilde(law, spec, 2, 2, 2, 100, 5);
  const auto large = mixing::estimate_phi_tilde(law, spec, 2, 2, 2, 400, 5);
  CHECK(small.mode == mixing::Mode::mc_lower_bound);
  CHECK(large.mode == mixing::Mode::mc_lower_bound);
  // Budgets are keyed per history index, so 100 samples are a prefix of 400
  // and the max over histories can only grow.
  CHECK(large.value >= small.value);
  // It stays below the analytic ceiling.
  const auto bound = mixing::analytic_phi_tilde_bound(law, spec, 2);
  CHECK(large.value <= bound.value + 1e-12);
}

TEST_CASE("exact phi_hat is nonincreasing in t on the torus") {
  const auto spec = m1();
  const auto law = torus_law(0.3, 3);
  double prev = 1.0;
  for (std::int64_t t : {1, 2, 3, 4}) {
    const auto e = mixing::estimate_phi_hat(law, spec, t, 1, 2, 10, 1);
    CHECK(e.mode == mixing::Mode::exact);
    CHECK(e.value <= prev + 1e-12);
    prev = e.value;
  }
  const auto iid = mixing::estimate_phi_hat(iid_law(0.7), spec, 2, 1, 2, 10, 1);
  CHECK(iid.value == 0.0);
}

TEST_CASE("estimate JSON carries the mode and the standard error") {
  const auto spec = m1();
  const auto e = mixing::estimate_phi_tilde(chain_law(0.3), spec, 1, 1, 1, 50, 9);
  const auto text = mixing::estimate_to_json(e);
  CHECK(text.find("\"coefficient\"") != std::string::npos);
  CHECK(text.find("phi_tilde") != std::string::npos);
  CHECK(text.find(mixing::mode_name(e.mode)) != std::string::npos);
  CHECK(text.find("\"t\"") != std::string::npos);
}

TEST_CASE("verify_md_bound holds on both bundled laws") {
  const auto spec = m1();
  const auto coin = coupling::coin_for_condition_b(spec);
  const std::vector<std::int64_t> grid = {4, 16, 64};
  const auto iid = mixing::verify_md_bound(iid_law(0.7), spec, coin, grid, 2, 2,
                                           100, 17);
  CHECK(iid.ok);
  REQUIRE(iid.points.size() == grid.size());
  for (const auto& pt : iid.points) CHECK(pt.margin == pt.bound - pt.phi_hat);
  const auto torus = mixing::verify_md_bound(torus_law(0.3, 3), spec, coin,
                                             grid, 2, 2, 100, 17);
  CHECK(torus.ok);
}

TEST_CASE("Cesaro jump-window law on the iid field is the annealed law") {
  const auto spec = m1();
  const auto est = mixing::cesaro_nu(iid_law(0.7), spec, 1, 4, 50000, 23, 1);
  REQUIRE(est.window_counts.size() == 2);
  CHECK(est.window_len == 1);
  CHECK(est.samples > 0);
  const std::vector<double> annealed = {0.4, 0.6};
  CHECK(stats::chi_square_gof(est.window_counts, annealed).p > 0.01);
  CHECK(std::abs(est.mean_jump[0] - 0.2) <= 3.0 * est.mean_se[0]);
}

TEST_CASE("Cesaro mean jump matches the exact stationary LEP law on the torus") {
  const auto spec = m1();
  const auto law = torus_law(0.3, 3);
  auto model = std::make_shared<env::TorusModel>(law, spec);
  const auto chain = oracle::build_joint_chain(model);
  const auto lep = mixing::exact_lep_law(chain);
  double total = 0.0, mean = 0.0;
  const int n_range = static_cast<int>(spec.range.size());
  for (std::size_t i = 0; i < lep.size(); ++i) {
    total += lep[i];
    mean += lep[i] * spec.range[i % n_range][0];
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(mean == doctest::Approx(oracle::exact_speed(chain)[0]).epsilon(1e-10));

  const auto est = mixing::cesaro_nu(law, spec, 1, 4, 50000, 29, 1);
  CHECK(std::abs(est.mean_jump[0] - mean) <= 3.0 * est.mean_se[0]);
}
