#ifndef RWDRE_MIXING_HPP_
#define RWDRE_MIXING_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rwdre/coupling.hpp"
#include "rwdre/env.hpp"
#include "rwdre/model.hpp"
#include "rwdre/oracle.hpp"

namespace rwdre::mixing {

enum class Mode { exact, mc_lower_bound, analytic_upper_bound };

const char* mode_name(Mode mode);

// The suprema defining the mixing coefficients range over infinite families;
// estimates replace them by finite nested ones and carry the mode honestly:
// exact enumeration, a Monte Carlo lower bound with its standard error, or a
// closed-form upper bound.
struct MixingEstimate {
  std::string coefficient;  // "phi_tilde" | "phi_hat" | "phi_nu"
  std::int64_t t = 0;
  double value = 0.0;
  Mode mode = Mode::exact;
  std::string families;
  std::optional<double> stderr_value;
  bool budget_exhausted = false;
};

std::string estimate_to_json(const MixingEstimate& e);

// phi_tilde(t): worst dependence of cone events (temporal depth h) on
// observation events of path depth <= k_max. Exact for iid fields (zero) and
// torus laws (enumeration); an exact-per-history lower bound maximized over
// `budget` sampled histories for independent site chains.
MixingEstimate estimate_phi_tilde(const env::EnvironmentLaw& law,
                                  const ModelSpec& spec, std::int64_t t,
                                  int k_max, int h, std::int64_t budget,
                                  std::uint64_t seed);

// Closed-form upper bound on phi_tilde(t): zero for iid fields; the
// geometric-decay bound |Delta| * |1-2q|^t / (2q) for symmetric two-state
// site chains (also valid for the torus law with the same site kernel).
MixingEstimate analytic_phi_tilde_bound(const env::EnvironmentLaw& law,
                                        const ModelSpec& spec, std::int64_t t);

// phi_hat(t): worst TV distance between the laws of the length-h LEP window
// starting at t under two conditionings. Exact for iid (zero) and torus
// laws; MC over paired conditioned ensembles for site chains.
MixingEstimate estimate_phi_hat(const env::EnvironmentLaw& law,
                                const ModelSpec& spec, std::int64_t t,
                                int k_max, int h, std::int64_t budget,
                                std::uint64_t seed);

struct MdPoint {
  std::int64_t t = 0;
  double phi_hat = 0.0;
  double phi_hat_stderr = 0.0;
  double bound = 0.0;
  double margin = 0.0;  // bound - phi_hat
};

struct MdReport {
  std::vector<MdPoint> points;
  bool ok = false;  // phi_hat <= bound + 3 stderr at every grid point
};

// Checks phi_hat(t) <= phi_tilde(ceil(c1 ln t)) + 2 exp(-t^{1-c0/c1}/(c1 ln t))
// on the grid, pairing a lower-bound-or-exact phi_hat with an
// exact-or-upper-bound phi_tilde so the comparison is sound.
MdReport verify_md_bound(const env::EnvironmentLaw& law, const ModelSpec& spec,
                         const coupling::CoinParams& coin,
                         std::span<const std::int64_t> t_grid, int k_max,
                         int h, std::int64_t budget, std::uint64_t seed);

// Cesaro average over burn-in lengths 1..k of the LEP jump-window law,
// estimated from n_runs independent walks; the mean jump is the speed.
struct CesaroEstimate {
  std::vector<double> mean_jump;  // per dimension
  std::vector<double> mean_se;
  std::vector<std::int64_t> window_counts;  // jump windows, mixed radix over
                                            // range columns, first step most
                                            // significant
  std::int64_t samples = 0;
  int window_len = 1;
};

CesaroEstimate cesaro_nu(const env::EnvironmentLaw& law, const ModelSpec& spec,
                         int window_len, std::int64_t k, std::int64_t n_runs,
                         std::uint64_t seed, int threads = 1);

// Exact stationary law of a single LEP step on a torus, indexed by
// (pattern - 1) * |R| + jump column.
std::vector<double> exact_lep_law(const oracle::JointChain& chain);

}  // namespace rwdre::mixing

#endif  // RWDRE_MIXING_HPP_
