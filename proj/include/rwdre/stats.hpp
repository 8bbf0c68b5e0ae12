#ifndef RWDRE_STATS_HPP_
#define RWDRE_STATS_HPP_

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "rwdre/env.hpp"
#include "rwdre/model.hpp"

namespace rwdre::stats {

// Checkpointed trajectory ensemble: positions of each run at the requested
// times only, so large horizons stay memory-bounded.
struct Ensemble {
  ModelSpec spec;
  std::vector<std::int64_t> times;          // ascending, last = horizon
  std::vector<std::vector<Vec>> positions;  // [run][checkpoint index]
};

Ensemble collect_ensemble(const env::EnvironmentLaw& law,
                          const ModelSpec& spec, std::int64_t n_runs,
                          std::span<const std::int64_t> checkpoints,
                          std::uint64_t master_seed, int threads = 1);

struct SpeedEstimate {
  std::vector<double> v;   // mean of X_T / T per dimension
  std::vector<double> se;
};

SpeedEstimate estimate_speed(const Ensemble& ensemble);

// Mean Euclidean deviation E|X_t/t - v| per checkpoint.
std::vector<std::pair<std::int64_t, double>> l1_curve(
    const Ensemble& ensemble, std::span<const double> v);

// Paired per-run difference |X_a/a - v| - |X_b/b - v| with its SE; a mean
// significantly above zero certifies the L1 decrease from a to b.
struct PairedDiff {
  double mean = 0.0;
  double se = 0.0;
};
PairedDiff l1_paired_difference(const Ensemble& ensemble, std::int64_t t_a,
                                std::int64_t t_b, std::span<const double> v);

// --------------------------------------------------------------------------
// Large-deviation tail fitting.

struct LdbPoint {
  std::int64_t t = 0;
  double p = 0.0;
  bool censored = false;  // empirical mass zero, floored at 1/(2 n_runs)
};

struct LdbFit {
  double log_c = 0.0;  // intercept log C
  double c = 0.0;      // decay rate
  double c_se = 0.0;
  std::vector<LdbPoint> points;
  int used = 0;
};

// Fits log p(t) = log C - c t over usable checkpoints of the empirical tail
// P(|X_t/t - v| > eps). Throws when fewer than 3 usable points remain.
LdbFit ldb_rate(const Ensemble& ensemble, double eps,
                std::span<const double> v);
// The same fitter on externally supplied tail points (oracle calibration).
LdbFit ldb_fit_points(std::span<const LdbPoint> points);

// Exact tail P(|X_t/t - v| > eps) of the i.i.d. +-1 walk with
// P(+1) = p_plus, via binomial log-probabilities.
double binom_walk_tail(std::int64_t t, double p_plus, double eps);

// --------------------------------------------------------------------------
// Distribution tests.

struct KsResult {
  double stat = 0.0;
  double p_value = 0.0;
};

// KS test of samples against the centered normal with the given variance.
// Samples on a lattice are compared against the normal discretized to that
// lattice (cells of width = smallest positive gap), removing the bias a
// plain KS test has on lattice data; p-value by the finite-sample
// Stephens transformation.
KsResult ks_normal(std::vector<double> samples, double variance);

struct FcltMarginal {
  double s = 0.0;
  double ks_stat = 0.0;
  double p_value = 0.0;
};

struct FcltReport {
  std::vector<FcltMarginal> marginals;
  bool marginals_ok = false;  // every p above the Bonferroni share of 1%
  std::vector<std::vector<double>> covariance;     // Cov(B_s, B_t)
  std::vector<std::vector<double>> covariance_se;
  bool covariance_ok = false;  // |cov - min(s,t)| <= 3 SE entrywise
};

// Marginal times s in {0.25, 0.5, 1} relative to the ensemble horizon n:
// B_s = (theta . X_{floor(ns)} - theta . v floor(ns)) / sqrt(n sigma2) is
// tested against N(0, s), and the empirical covariance of (B_s, B_t)
// against min(s, t). The required checkpoints must be in the ensemble.
FcltReport fclt_test(const Ensemble& ensemble, std::span<const double> v,
                     double sigma2, std::span<const double> theta);

struct VarianceGrowth {
  std::vector<std::pair<std::int64_t, double>> var_curve;  // (n, Var(theta.X_n))
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  bool chebyshev_ok = false;  // eps^2 P(|Y - mean| > eps) <= Var, per n
};

VarianceGrowth variance_growth(const Ensemble& ensemble,
                               std::span<const double> theta, double cheb_eps);

// Empirical covariance of X_T / sqrt(T) across runs.
std::vector<std::vector<double>> empirical_sigma(const Ensemble& ensemble);
// Smallest eigenvalue of a symmetric matrix (cyclic Jacobi), for PSD checks.
double min_eigenvalue(std::vector<std::vector<double>> m);

// --------------------------------------------------------------------------
// Primitives.

double normal_cdf(double x);
// Asymptotic Kolmogorov tail Q(lambda) = 2 sum (-1)^{j-1} exp(-2 j^2 lambda^2).
double kolmogorov_q(double lambda);
// Finite-sample KS p-value (Stephens' transformation of the statistic).
double ks_p_value(double d, std::int64_t n);
// Upper regularized incomplete gamma Q(a, x).
double regularized_gamma_q(double a, double x);
double chi_square_p(double stat, double dof);

struct ChiSquare {
  double stat = 0.0;
  double dof = 0.0;
  double p = 0.0;
};
ChiSquare chi_square_gof(std::span<const std::int64_t> counts,
                         std::span<const double> probs);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};
LineFit linear_fit(std::span<const double> x, std::span<const double> y);

}  // namespace rwdre::stats

#endif  // RWDRE_STATS_HPP_
