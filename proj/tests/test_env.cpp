#include <cmath>
#include <map>
#include <memory>
#include <vector>

#include "doctest.h"
#include "rwdre/bruteforce.hpp"
#include "rwdre/env.hpp"
#include "rwdre/model.hpp"
#include "rwdre/rng.hpp"
#include "rwdre/stats.hpp"

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

env::EnvironmentLaw iid_law(std::vector<double> p) {
  env::EnvironmentLaw law;
  law.kind = env::LawKind::iid_field;
  law.alphabet_size = static_cast<int>(p.size());
  law.p = std::move(p);
  law.validate();
  return law;
}

env::EnvironmentLaw chain_law(std::vector<std::vector<double>> q) {
  env::EnvironmentLaw law;
  law.kind = env::LawKind::independent_site_chain;
  law.alphabet_size = static_cast<int>(q.size());
  law.site_q = std::move(q);
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

TEST_CASE("degenerate iid law always reads symbol 0") {
  env::EnvRealization real(iid_law({1.0, 0.0}), 7);
  for (int t = 0; t < 5; ++t)
    for (int x = -3; x <= 3; ++x)
      CHECK(real.read_cell(Cell{Vec{x}, t}) == 0);
}

TEST_CASE("read_cell is deterministic in (law, seed, cell)") {
  const auto law = iid_law({0.5, 0.5});
  env::EnvRealization a(law, 99), b(law, 99), c(law, 100);
  bool any_differs = false;
  for (int t = 0; t < 20; ++t)
    for (int x = -5; x <= 5; ++x) {
      const Cell cell{Vec{x}, t};
      CHECK(a.read_cell(cell) == b.read_cell(cell));
      CHECK(a.read_cell(cell) == a.read_cell(cell));  // re-read
      if (a.read_cell(cell) != c.read_cell(cell)) any_differs = true;
    }
  CHECK(any_differs);
}

TEST_CASE("frozen site chain repeats the same symbol forever") {
  env::EnvRealization real(chain_law({{1.0, 0.0}, {0.0, 1.0}}), 3);
  for (int x = -2; x <= 2; ++x) {
    const int first = real.read_cell(Cell{Vec{x}, 0});
    for (int t = 1; t < 30; ++t)
      CHECK(real.read_cell(Cell{Vec{x}, t}) == first);
  }
}

TEST_CASE("iid marginals pass a chi-square goodness-of-fit") {
  const auto law = iid_law({0.2, 0.5, 0.3});
  std::vector<std::int64_t> counts(3, 0);
  env::EnvRealization real(law, 11);
  for (int i = 0; i < 100000; ++i)
    ++counts[real.read_cell(Cell{Vec{i % 300 - 150}, i / 300})];
  const auto gof = stats::chi_square_gof(counts, law.p);
  CHECK(gof.p > 0.01);
}

TEST_CASE("site chain lag-1 autocorrelation matches 1 - 2q") {
  const double q = 0.3;
  const auto law = chain_law({{1.0 - q, q}, {q, 1.0 - q}});
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    env::EnvRealization real(law, rng::hash_words({5, static_cast<std::uint64_t>(i)}));
    const int a = real.read_cell(Cell{Vec{0}, 0});
    const int b = real.read_cell(Cell{Vec{0}, 1});
    sum += (2 * a - 1) * (2 * b - 1);
  }
  const double corr = sum / n;
  const double se = std::sqrt((1.0 - (1 - 2 * q) * (1 - 2 * q)) / n);
  CHECK(std::abs(corr - (1.0 - 2.0 * q)) <= 3.0 * se);
}

TEST_CASE("sample_window agrees with read_cell on the same seed") {
  const auto law = chain_law({{0.7, 0.3}, {0.4, 0.6}});
  std::vector<Cell> region;
  for (int t = 0; t < 4; ++t)
    for (int x = -2; x <= 2; ++x) region.push_back(Cell{Vec{x}, t});
  const auto window = env::sample_window(law, region, 77);
  env::EnvRealization real(law, 77);
  for (const auto& [cell, sym] : window)
    CHECK(real.read_cell(cell) == sym);
}

TEST_CASE("torus posterior matches brute-force conditioning") {
  const auto spec = m1();
  const auto law = torus_law(0.3, 3);
  env::TorusModel model(law, spec);

  BackwardPath path({Vec{-2}, Vec{-1}, Vec{0}}, spec);
  for (std::int64_t s1 : {1, 2})
    for (std::int64_t s2 : {1, 2}) {
      ObservationEvent event(path, {s1, s2}, spec);
      const auto filtered = env::posterior_after_history(model, event);
      const auto brute = bruteforce::posterior(model, event);
      REQUIRE(filtered.size() == brute.size());
      for (std::size_t i = 0; i < brute.size(); ++i)
        CHECK(filtered[i] == doctest::Approx(brute[i]).epsilon(1e-10));
    }
}

TEST_CASE("full observation with a frozen kernel pins the posterior") {
  // Delta covers the whole torus and the environment never changes, so one
  // observation determines the configuration.
  ModelSpec spec;
  spec.d = 1;
  spec.alphabet_size = 2;
  spec.delta = {Vec{0}, Vec{1}, Vec{2}};
  spec.range = {Vec{-1}, Vec{1}};
  spec.kernel.rows.assign(8, {0.5, 0.5});
  spec.validate();
  const auto law = torus_law(0.0, 3);
  auto model = std::make_shared<env::TorusModel>(law, spec);

  env::TorusFilter filter(model);
  filter.observe_pattern(5);
  int support = 0;
  for (double w : filter.weights())
    if (w > 1e-12) ++support;
  CHECK(support == 1);
}

TEST_CASE("exact conditional stays normalized over many updates") {
  const auto spec = m1();
  auto model = std::make_shared<env::TorusModel>(torus_law(0.3, 3), spec);
  env::ExactConditional cap(model);
  rng::Stream gen{0x5151ULL, 0};
  for (int step = 0; step < 1000; ++step) {
    const auto law = cap.observation_law();
    double total = 0.0;
    for (double v : law) total += v;
    CHECK(std::abs(total - 1.0) < 1e-10);
    const int pat = 1 + gen.next_index(law);
    cap.update(pat, gen.next_unit() < 0.5 ? Vec{-1} : Vec{1});
  }
}

TEST_CASE("iid conditional observation law is constant and equals p") {
  const auto spec = m1();
  const auto law = iid_law({0.3, 0.7});
  env::ExactConditional cap(law, spec);
  for (int step = 0; step < 10; ++step) {
    const auto obs = cap.observation_law();
    CHECK(obs[0] == doctest::Approx(0.3));
    CHECK(obs[1] == doctest::Approx(0.7));
    cap.update(1 + step % 2, Vec{1});
  }
}

TEST_CASE("law JSON round trip") {
  for (const auto& law :
       {iid_law({0.3, 0.7}), chain_law({{0.7, 0.3}, {0.4, 0.6}}),
        torus_law(0.3, 3)}) {
    const auto round = env::law_from_json(env::law_to_json(law));
    CHECK(round.kind == law.kind);
    CHECK(round.alphabet_size == law.alphabet_size);
    CHECK(round.p == law.p);
    CHECK(round.site_q == law.site_q);
    CHECK(round.torus_side == law.torus_side);
  }
}
