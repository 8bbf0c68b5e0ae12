#ifndef RWDRE_COUPLING_HPP_
#define RWDRE_COUPLING_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "rwdre/env.hpp"
#include "rwdre/model.hpp"
#include "rwdre/walk.hpp"

namespace rwdre::coupling {

// Parameters of the epsilon-coin: with probability eps the jump is the fixed
// z_star (Condition b) or the pattern is replaced by the "?" placeholder
// (Condition a). c0 = ln(1/eps); c1 > c0 tunes the bound of verify_md_bound.
struct CoinParams {
  double eps = 0.0;
  Vec z_star;
  double c0 = 0.0;
  double c1 = 0.0;
};

// Default Condition-b coin: eps = eps_b (the largest valid bias, which gives
// the smallest c0), z_star its argmax, c1 = c1_factor * c0.
CoinParams coin_for_condition_b(const ModelSpec& spec, double c1_factor = 2.0);

// Residual kernel of the decomposition
//   alpha(i, y) = eps * 1_{y = z_star} + (1 - eps) * residual(i, y).
// Throws if eps exceeds min_i alpha(i, z_star) or z_star is not in the range.
JumpKernel epsilon_decomposition(const ModelSpec& spec, const Vec& z_star,
                                 double eps);

// Noise consumed by a coupled run, kept for invariant checks.
struct CoinRecord {
  std::vector<double> u;
  std::vector<double> v;
  std::optional<std::int64_t> tau;
};

// First t >= n such that u(s) <= eps for all s in {t-n+1, ..., t}; u is
// 1-based and queried lazily. Absent once the cap is passed.
std::optional<std::int64_t> tau_n(const std::function<double(std::int64_t)>& u,
                                  double eps, std::int64_t n,
                                  std::int64_t cap);
// Same over a finite sequence (cap = u.size()).
std::optional<std::int64_t> tau_n(std::span<const double> u, double eps,
                                  std::int64_t n);
// Same over the counter-based stream `key`, scanned in batches.
std::optional<std::int64_t> tau_n_from_key(std::uint64_t key, double eps,
                                           std::int64_t n, std::int64_t cap);

// Right side of the quantitative mixing bound:
//   phi_tilde(ceil(c1 ln t)) + 2 exp(-t^{1-c0/c1} / (c1 ln t)).
double md_bound(double t, double c0, double c1,
                const std::function<double(std::int64_t)>& phi_tilde);

// A pair of walks conditioned on {tau_n = n}, driven by shared (U, V) noise
// on environments drawn from a TV-optimal coupling of the two conditioned
// laws. LEP entries on the first n (coin) steps of the torus constructions
// carry pattern 0: the environment is not observed there.
struct CoupledRun {
  std::int64_t n = 0;
  std::optional<std::int64_t> tau;
  std::vector<walk::LepEntry> lep0;  // xi^{A0}, steps 0..T-1
  std::vector<walk::LepEntry> lep1;  // xi^{A1}
  std::optional<std::int64_t> first_disagreement_after;  // earliest >= n
  bool env_coupled_ok = false;
  CoinRecord coins;
};

// Condition-b pair on a torus law: posteriors given the histories are
// propagated to time n, coupled maximally, and both walks then follow the
// coin + residual mechanics with shared noise. Conditioning on {tau_n = n}
// is by rejection on the U stream (budget 1e6 attempts).
CoupledRun coupled_pair_b(std::shared_ptr<const env::TorusModel> model,
                          const ObservationEvent& a0,
                          const ObservationEvent& a1, const CoinParams& coin,
                          std::int64_t n, std::int64_t T, std::uint64_t seed);

// Condition-b pair on an iid field: the histories constrain only cells at
// negative times, so the conditioned future laws coincide and the identical
// (per-cell maximal) coupling is optimal. Both walks share one realization.
CoupledRun coupled_pair_b_iid(const env::EnvironmentLaw& law,
                              const ModelSpec& spec,
                              const ObservationEvent& a0,
                              const ObservationEvent& a1,
                              const CoinParams& coin, std::int64_t n,
                              std::int64_t T, std::uint64_t seed);

// Condition-a pair conditioned on {tau_n = n}: environments sampled at time
// 0 from a TV-optimal coupling of the filtered posteriors, n "?" steps with
// jumps from alpha(?, .), then plain walk mechanics with shared noise.
CoupledRun coupled_pair_a(std::shared_ptr<const env::TorusModel> model,
                          const ObservationEvent& a0,
                          const ObservationEvent& a1, const CoinParams& coin,
                          std::int64_t n, std::int64_t T, std::uint64_t seed);

// Single-process Condition-a sampler (no conditioning): iterates the "?"
// scheme with the Bayes filter until tau_n - n, samples the environment from
// the filtered posterior, spends the n coin steps on alpha(?, .), and then
// walks on the sampled environment. Returns the jump sequence, whose law —
// averaged over the coin — equals the conditioned jump law.
std::vector<Vec> run_condition_a(std::shared_ptr<const env::TorusModel> model,
                                 const ObservationEvent& a,
                                 const CoinParams& coin, std::int64_t n,
                                 std::int64_t T, std::uint64_t seed);

// Observation event sampled with its natural weight: run a walk for k steps
// on a fresh realization and re-anchor its observations at the endpoint.
ObservationEvent sample_history(const env::EnvironmentLaw& law,
                                const ModelSpec& spec, int k,
                                std::uint64_t seed);

}  // namespace rwdre::coupling

#endif  // RWDRE_COUPLING_HPP_
