#include "rwdre/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rwdre::coupling {

namespace {

constexpr std::int64_t kRejectionBudget = 1000000;

int invcdf(std::span<const double> probs, double u) {
  double cum = 0.0;
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

// Column law of alpha(?, .) = K^{-1} sum_i alpha(i, .).
std::vector<double> question_row(const ModelSpec& spec) {
  std::vector<double> row(spec.range_size(), 0.0);
  for (const auto& r : spec.kernel.rows)
    for (int col = 0; col < spec.range_size(); ++col) row[col] += r[col];
  for (double& v : row) v /= static_cast<double>(spec.kernel.pattern_count());
  return row;
}

// Draws (s0, s1) from the maximal coupling of two distributions: equal with
// probability 1 - TV, otherwise independent draws from the disjoint
// residuals.
std::pair<int, int> maximal_coupling(const std::vector<double>& mu0,
                                     const std::vector<double>& mu1,
                                     rng::Stream& stream) {
  const std::size_t n = mu0.size();
  std::vector<double> overlap(n);
  double ov = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    overlap[i] = std::min(mu0[i], mu1[i]);
    ov += overlap[i];
  }
  const double u = stream.next_unit();
  if (u < ov) {
    // Inverse CDF on the unnormalized overlap with target u.
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      cum += overlap[i];
      if (u < cum) return {static_cast<int>(i), static_cast<int>(i)};
    }
    return {static_cast<int>(n) - 1, static_cast<int>(n) - 1};
  }
  std::vector<double> r0(n), r1(n);
  for (std::size_t i = 0; i < n; ++i) {
    r0[i] = (mu0[i] - overlap[i]) / (1.0 - ov);
    r1[i] = (mu1[i] - overlap[i]) / (1.0 - ov);
  }
  return {invcdf(r0, stream.next_unit()), invcdf(r1, stream.next_unit())};
}

// Rejection on the U stream alone for {tau_n = n}: redraw the first n coins
// until they all succeed. Environment-independent, hence unbiased.
std::vector<double> accept_coin_prefix(rng::Stream& u_stream, double eps,
                                       std::int64_t n, CoinRecord& coins) {
  for (std::int64_t attempt = 0; attempt < kRejectionBudget; ++attempt) {
    std::vector<double> prefix(n);
    bool ok = true;
    for (std::int64_t i = 0; i < n; ++i) {
      prefix[i] = u_stream.next_unit();
      ok = ok && prefix[i] <= eps;
    }
    if (ok) {
      coins.u = prefix;
      coins.tau = n;
      return prefix;
    }
  }
  throw std::runtime_error(
      "coupled pair: rejection budget exhausted for {tau_n = n}");
}

// One shared-noise step of two absolute torus configurations: the same
// per-site uniform drives both, so equal sites stay equal.
void shared_env_step(const env::TorusModel& model, int& c0, int& c1,
                     rng::Stream& noise) {
  const auto& q = model.law().site_q;
  std::vector<int> s0(model.n_sites()), s1(model.n_sites());
  for (int s = 0; s < model.n_sites(); ++s) {
    const double u = noise.next_unit();
    s0[s] = invcdf(q[model.state_site(c0, s)], u);
    s1[s] = invcdf(q[model.state_site(c1, s)], u);
  }
  c0 = model.state_of_sites(s0);
  c1 = model.state_of_sites(s1);
}

struct CoupledStreams {
  rng::Stream u, v, env, cpl;
};

CoupledStreams make_streams(std::uint64_t seed) {
  return CoupledStreams{
      {rng::hash_words({seed, 0x636f696eULL}), 0},   // coin
      {rng::hash_words({seed, 0x61757856ULL}), 0},   // auxiliary V
      {rng::hash_words({seed, 0x656e76ULL}), 0},     // environment noise
      {rng::hash_words({seed, 0x6370ULL}), 0}};      // coupling draw
}

void record_step(CoupledRun& run, std::int64_t t, walk::LepEntry e0,
                 walk::LepEntry e1) {
  run.lep0.push_back(e0);
  run.lep1.push_back(e1);
  if (t >= run.n && !run.first_disagreement_after &&
      (e0.pattern != e1.pattern || !(e0.jump == e1.jump)))
    run.first_disagreement_after = t;
}

}  // namespace

CoinParams coin_for_condition_b(const ModelSpec& spec, double c1_factor) {
  const auto report = walk::ellipticity_report(spec);
  if (report.eps_b <= 0.0)
    throw std::invalid_argument(
        "coin_for_condition_b: no range point has uniformly positive mass");
  CoinParams coin;
  coin.eps = report.eps_b;
  coin.z_star = report.argmax_z;
  coin.c0 = std::log(1.0 / coin.eps);
  coin.c1 = c1_factor * coin.c0;
  return coin;
}

JumpKernel epsilon_decomposition(const ModelSpec& spec, const Vec& z_star,
                                 double eps) {
  const int star_col = spec.range_column(z_star);
  if (star_col < 0)
    throw std::invalid_argument("epsilon_decomposition: z_star not in range");
  JumpKernel residual;
  residual.rows.reserve(spec.kernel.rows.size());
  for (const auto& row : spec.kernel.rows) {
    if (row[star_col] < eps - 1e-15)
      throw std::invalid_argument(
          "epsilon_decomposition: eps exceeds min_i alpha(i, z_star)");
    std::vector<double> res(row.size());
    if (eps == 1.0) {
      // Degenerate coin: every row must be the point mass at z_star and the
      // residual is never consulted; keep it a valid distribution.
      res[star_col] = 1.0;
    } else {
      for (std::size_t col = 0; col < row.size(); ++col) {
        const double num =
            row[col] - (static_cast<int>(col) == star_col ? eps : 0.0);
        res[col] = std::max(0.0, num) / (1.0 - eps);
      }
    }
    residual.rows.push_back(std::move(res));
  }
  return residual;
}

std::optional<std::int64_t> tau_n(
    const std::function<double(std::int64_t)>& u, double eps, std::int64_t n,
    std::int64_t cap) {
  if (n < 1) throw std::invalid_argument("tau_n: n must be >= 1");
  std::int64_t run = 0;
  for (std::int64_t t = 1; t <= cap; ++t) {
    run = u(t) <= eps ? run + 1 : 0;
    if (run >= n) return t;
  }
  return std::nullopt;
}

std::optional<std::int64_t> tau_n(std::span<const double> u, double eps,
                                  std::int64_t n) {
  return tau_n([&](std::int64_t t) { return u[t - 1]; }, eps, n,
               static_cast<std::int64_t>(u.size()));
}

std::optional<std::int64_t> tau_n_from_key(std::uint64_t key, double eps,
                                           std::int64_t n, std::int64_t cap) {
  if (n < 1) throw std::invalid_argument("tau_n: n must be >= 1");
  constexpr std::int64_t kBlock = 4096;
  std::vector<double> block(kBlock);
  std::int64_t run = 0;
  for (std::int64_t base = 0; base < cap; base += kBlock) {
    const std::int64_t len = std::min(kBlock, cap - base);
    block.resize(len);
    rng::fill_unit(key, static_cast<std::uint64_t>(base), block);
    for (std::int64_t i = 0; i < len; ++i) {
      run = block[i] <= eps ? run + 1 : 0;
      if (run >= n) return base + i + 1;
    }
  }
  return std::nullopt;
}

double md_bound(double t, double c0, double c1,
                const std::function<double(std::int64_t)>& phi_tilde) {
  if (!(c1 > c0) || !(c0 > 0.0) || t < 2.0)
    throw std::invalid_argument("md_bound: need c1 > c0 > 0 and t >= 2");
  // phi_tilde is nonincreasing, so the ceiling is the conservative choice.
  const auto l = static_cast<std::int64_t>(std::ceil(c1 * std::log(t)));
  const double tail =
      2.0 * std::exp(-std::pow(t, 1.0 - c0 / c1) / (c1 * std::log(t)));
  return phi_tilde(l) + tail;
}

CoupledRun coupled_pair_b(std::shared_ptr<const env::TorusModel> model,
                          const ObservationEvent& a0,
                          const ObservationEvent& a1, const CoinParams& coin,
                          std::int64_t n, std::int64_t T, std::uint64_t seed) {
  const auto& spec = model->spec();
  const JumpKernel residual =
      epsilon_decomposition(spec, coin.z_star, coin.eps);
  auto streams = make_streams(seed);

  CoupledRun run;
  run.n = n;
  run.tau = n;
  accept_coin_prefix(streams.u, coin.eps, n, run.coins);

  // Posteriors given the histories, propagated to time n as seen from the
  // walker at n * z_star (no observation happens on coin steps).
  auto mu0 = env::posterior_after_history(*model, a0);
  auto mu1 = env::posterior_after_history(*model, a1);
  for (std::int64_t s = 0; s < n; ++s) {
    model->advance_env(mu0);
    model->recenter(mu0, coin.z_star);
    model->advance_env(mu1);
    model->recenter(mu1, coin.z_star);
  }
  auto [c0state, c1state] = maximal_coupling(mu0, mu1, streams.cpl);
  run.env_coupled_ok = c0state == c1state;

  for (std::int64_t t = 0; t < std::min(n, T); ++t)
    record_step(run, t, {0, coin.z_star}, {0, coin.z_star});

  // Shared (U, V) mechanics from time n on; configurations evolve with
  // shared per-site noise, positions in the frame anchored at time n.
  Vec x0, x1;
  for (std::int64_t t = n; t < T; ++t) {
    const double u = streams.u.next_unit();
    run.coins.u.push_back(u);
    const auto pat0 = model->pattern_at(c0state, x0);
    const auto pat1 = model->pattern_at(c1state, x1);
    Vec z0, z1;
    if (u <= coin.eps) {
      z0 = z1 = coin.z_star;
    } else {
      const double v = streams.v.next_unit();
      run.coins.v.push_back(v);
      z0 = spec.range[invcdf(residual.rows[pat0 - 1], v)];
      z1 = spec.range[invcdf(residual.rows[pat1 - 1], v)];
    }
    record_step(run, t, {pat0, z0}, {pat1, z1});
    shared_env_step(*model, c0state, c1state, streams.env);
    x0 = x0 + z0;
    x1 = x1 + z1;
  }
  return run;
}

CoupledRun coupled_pair_b_iid(const env::EnvironmentLaw& law,
                              const ModelSpec& spec,
                              const ObservationEvent& a0,
                              const ObservationEvent& a1,
                              const CoinParams& coin, std::int64_t n,
                              std::int64_t T, std::uint64_t seed) {
  if (law.kind != env::LawKind::iid_field)
    throw std::invalid_argument("coupled_pair_b_iid: law must be iid_field");
  (void)a0;
  (void)a1;  // histories constrain only negative times; future laws coincide
  const JumpKernel residual =
      epsilon_decomposition(spec, coin.z_star, coin.eps);
  auto streams = make_streams(seed);

  CoupledRun run;
  run.n = n;
  run.tau = n;
  run.env_coupled_ok = true;
  accept_coin_prefix(streams.u, coin.eps, n, run.coins);

  env::EnvRealization real(law, rng::hash_words({seed, 0x69696421ULL}));
  std::vector<int> digits(spec.delta.size());
  Vec pos;
  for (std::int64_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < spec.delta.size(); ++j)
      digits[j] = real.read_cell(Cell{pos + spec.delta[j], t});
    const std::int64_t pat = pattern_index(digits, spec.alphabet_size);
    Vec z;
    if (t < n) {
      z = coin.z_star;
    } else {
      const double u = streams.u.next_unit();
      run.coins.u.push_back(u);
      if (u <= coin.eps) {
        z = coin.z_star;
      } else {
        const double v = streams.v.next_unit();
        run.coins.v.push_back(v);
        z = spec.range[invcdf(residual.rows[pat - 1], v)];
      }
    }
    record_step(run, t, {pat, z}, {pat, z});
    pos = pos + z;
  }
  return run;
}

CoupledRun coupled_pair_a(std::shared_ptr<const env::TorusModel> model,
                          const ObservationEvent& a0,
                          const ObservationEvent& a1, const CoinParams& coin,
                          std::int64_t n, std::int64_t T, std::uint64_t seed) {
  const auto& spec = model->spec();
  const auto qrow = question_row(spec);
  auto streams = make_streams(seed);

  CoupledRun run;
  run.n = n;
  run.tau = n;
  accept_coin_prefix(streams.u, coin.eps, n, run.coins);

  // tau_n = n means the scheme's iterative phase is empty: environments are
  // sampled at time 0 straight from the coupled posteriors given A0, A1.
  const auto mu0 = env::posterior_after_history(*model, a0);
  const auto mu1 = env::posterior_after_history(*model, a1);
  auto [c0state, c1state] = maximal_coupling(mu0, mu1, streams.cpl);
  run.env_coupled_ok = c0state == c1state;

  Vec x0, x1;
  for (std::int64_t t = 0; t < std::min(n, T); ++t) {
    const double v = streams.v.next_unit();
    run.coins.v.push_back(v);
    const Vec z = spec.range[invcdf(qrow, v)];
    record_step(run, t, {0, z}, {0, z});
    shared_env_step(*model, c0state, c1state, streams.env);
    x0 = x0 + z;
    x1 = x1 + z;
  }
  for (std::int64_t t = n; t < T; ++t) {
    const auto pat0 = model->pattern_at(c0state, x0);
    const auto pat1 = model->pattern_at(c1state, x1);
    const double v = streams.v.next_unit();
    run.coins.v.push_back(v);
    const Vec z0 = spec.range[invcdf(spec.kernel.rows[pat0 - 1], v)];
    const Vec z1 = spec.range[invcdf(spec.kernel.rows[pat1 - 1], v)];
    record_step(run, t, {pat0, z0}, {pat1, z1});
    shared_env_step(*model, c0state, c1state, streams.env);
    x0 = x0 + z0;
    x1 = x1 + z1;
  }
  return run;
}

std::vector<Vec> run_condition_a(std::shared_ptr<const env::TorusModel> model,
                                 const ObservationEvent& a,
                                 const CoinParams& coin, std::int64_t n,
                                 std::int64_t T, std::uint64_t seed) {
  const auto& spec = model->spec();
  const double k_pat = static_cast<double>(spec.pattern_count());
  const auto qrow = question_row(spec);
  auto streams = make_streams(seed);

  // The coin sequence is independent of everything else, so tau_n can be
  // scanned up front; u(t) drives step t-1.
  const auto tau = tau_n([&](std::int64_t t) {
    return rng::to_unit(rng::at(streams.u.key, static_cast<std::uint64_t>(t - 1)));
  }, coin.eps, n, kRejectionBudget);
  if (!tau) throw std::runtime_error("run_condition_a: tau_n scan exhausted");
  const std::int64_t m = *tau - n;  // length of the iterative phase

  env::TorusFilter filter(model);
  filter.set_weights(env::posterior_after_history(*model, a));
  std::vector<Vec> jumps;
  jumps.reserve(T);

  // Iterative phase: "?" with probability eps (jump by alpha(?, .), pattern
  // reconstructed into the filter), otherwise pattern from the tilted
  // conditional followed by its own jump law.
  for (std::int64_t t = 0; t < std::min(m, T); ++t) {
    const double u = streams.u.next_unit();
    if (u <= coin.eps) {
      const Vec z = spec.range[invcdf(qrow, streams.v.next_unit())];
      filter.reweight_by_jump(z);
      filter.advance();
      filter.recenter(z);
      jumps.push_back(z);
    } else {
      const auto p = filter.observation_law();
      std::vector<double> tilted(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) {
        tilted[i] = (p[i] - coin.eps / k_pat) / (1.0 - coin.eps);
        if (tilted[i] < -1e-9)
          throw std::runtime_error(
              "run_condition_a: Condition a violated (conditional pattern "
              "probability below eps/K)");
        tilted[i] = std::max(0.0, tilted[i]);
      }
      const std::int64_t pat = invcdf(tilted, streams.v.next_unit()) + 1;
      const Vec z =
          spec.range[invcdf(spec.kernel.rows[pat - 1], streams.v.next_unit())];
      filter.observe_pattern(pat);
      filter.advance();
      filter.recenter(z);
      jumps.push_back(z);
    }
  }
  if (static_cast<std::int64_t>(jumps.size()) == T) return jumps;

  // Environment sampled from the filtered posterior at time m, viewed from
  // the walker; the n coin steps reveal nothing about it.
  int config = invcdf(filter.weights(), streams.cpl.next_unit());
  Vec pos;
  for (std::int64_t t = m; t < std::min(*tau, T); ++t) {
    const Vec z = spec.range[invcdf(qrow, streams.v.next_unit())];
    jumps.push_back(z);
    config = model->step_state(config, streams.env);
    pos = pos + z;
  }
  for (std::int64_t t = *tau; t < T; ++t) {
    const auto pat = model->pattern_at(config, pos);
    const Vec z =
        spec.range[invcdf(spec.kernel.rows[pat - 1], streams.v.next_unit())];
    jumps.push_back(z);
    config = model->step_state(config, streams.env);
    pos = pos + z;
  }
  return jumps;
}

ObservationEvent sample_history(const env::EnvironmentLaw& law,
                                const ModelSpec& spec, int k,
                                std::uint64_t seed) {
  env::EnvRealization real(law, rng::hash_words({seed, 0x68697374ULL}));
  rng::Stream u{rng::hash_words({seed, 0x6877616cULL}), 0};
  std::vector<Vec> positions{Vec{}};
  std::vector<std::int64_t> observed;
  std::vector<int> digits(spec.delta.size());
  for (int t = 0; t < k; ++t) {
    for (std::size_t j = 0; j < spec.delta.size(); ++j)
      digits[j] = real.read_cell(Cell{positions.back() + spec.delta[j], t});
    const std::int64_t pat = pattern_index(digits, spec.alphabet_size);
    observed.push_back(pat);
    const Vec z = spec.range[invcdf(
        spec.kernel.rows[pat - 1], u.next_unit())];
    positions.push_back(positions.back() + z);
  }
  // Re-anchor at the endpoint: gamma_{-k+j} = X_j - X_k, sigma_{k-j} = the
  // pattern observed at time j.
  std::vector<Vec> sites(k + 1);
  for (int j = 0; j <= k; ++j) sites[j] = positions[j] - positions[k];
  std::vector<std::int64_t> sigma(k);
  for (int j = 0; j < k; ++j) sigma[k - 1 - j] = observed[j];
  return ObservationEvent(BackwardPath(std::move(sites), spec),
                          std::move(sigma), spec);
}

}  // namespace rwdre::coupling
