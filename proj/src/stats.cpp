#include "rwdre/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rwdre/parallel.hpp"
#include "rwdre/rng.hpp"
#include "rwdre/walk.hpp"

namespace rwdre::stats {

Ensemble collect_ensemble(const env::EnvironmentLaw& law,
                          const ModelSpec& spec, std::int64_t n_runs,
                          std::span<const std::int64_t> checkpoints,
                          std::uint64_t master_seed, int threads) {
  if (checkpoints.empty() ||
      !std::is_sorted(checkpoints.begin(), checkpoints.end()) ||
      checkpoints.front() < 1)
    throw std::invalid_argument(
        "collect_ensemble: checkpoints must be ascending and >= 1");
  Ensemble ensemble;
  ensemble.spec = spec;
  ensemble.times.assign(checkpoints.begin(), checkpoints.end());
  ensemble.positions.resize(n_runs);
  const std::int64_t horizon = checkpoints.back();

  parallel_for(n_runs, threads, [&](std::int64_t run) {
    const std::uint64_t rs = walk::run_seed(master_seed, run);
    env::EnvRealization real(law, walk::env_seed(rs));
    const std::uint64_t key =
        rng::hash_words({walk::walk_seed(rs), 0x77616c6bULL});

    constexpr std::int64_t kBlock = 512;
    std::vector<double> uniforms;
    std::vector<int> digits(spec.delta.size());
    std::vector<Vec> marks;
    marks.reserve(checkpoints.size());
    Vec pos;
    std::size_t next_mark = 0;
    for (std::int64_t t = 0; t < horizon; ++t) {
      const std::int64_t slot = t % kBlock;
      if (slot == 0) {
        uniforms.resize(
            static_cast<std::size_t>(std::min(kBlock, horizon - t)));
        rng::fill_unit(key, static_cast<std::uint64_t>(t), uniforms);
      }
      for (std::size_t j = 0; j < spec.delta.size(); ++j)
        digits[j] = real.read_cell(Cell{pos + spec.delta[j], t});
      pos = pos + walk::step(spec, pattern_index(digits, spec.alphabet_size),
                             uniforms[slot]);
      while (next_mark < checkpoints.size() &&
             checkpoints[next_mark] == t + 1) {
        marks.push_back(pos);
        ++next_mark;
      }
    }
    ensemble.positions[run] = std::move(marks);
  });
  return ensemble;
}

namespace {

std::size_t checkpoint_index(const Ensemble& ensemble, std::int64_t t) {
  for (std::size_t i = 0; i < ensemble.times.size(); ++i)
    if (ensemble.times[i] == t) return i;
  throw std::invalid_argument("ensemble: requested time is not a checkpoint");
}

double dot(std::span<const double> theta, const Vec& x, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += theta[i] * x[i];
  return s;
}

double deviation_norm(const Vec& x, std::int64_t t, std::span<const double> v,
                      int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    const double diff = static_cast<double>(x[i]) / t - v[i];
    s += diff * diff;
  }
  return std::sqrt(s);
}

}  // namespace

SpeedEstimate estimate_speed(const Ensemble& ensemble) {
  const std::size_t last = ensemble.times.size() - 1;
  const auto horizon = static_cast<double>(ensemble.times[last]);
  const auto n = static_cast<std::int64_t>(ensemble.positions.size());
  if (n < 2) throw std::invalid_argument("estimate_speed: need >= 2 runs");
  const int d = ensemble.spec.d;
  SpeedEstimate est;
  est.v.assign(d, 0.0);
  est.se.assign(d, 0.0);
  for (const auto& run : ensemble.positions)
    for (int i = 0; i < d; ++i) est.v[i] += run[last][i] / horizon;
  for (int i = 0; i < d; ++i) est.v[i] /= n;
  for (const auto& run : ensemble.positions)
    for (int i = 0; i < d; ++i) {
      const double diff = run[last][i] / horizon - est.v[i];
      est.se[i] += diff * diff;
    }
  for (int i = 0; i < d; ++i)
    est.se[i] = std::sqrt(est.se[i] / (n - 1) / n);
  return est;
}

std::vector<std::pair<std::int64_t, double>> l1_curve(
    const Ensemble& ensemble, std::span<const double> v) {
  const int d = ensemble.spec.d;
  std::vector<std::pair<std::int64_t, double>> curve;
  for (std::size_t i = 0; i < ensemble.times.size(); ++i) {
    double sum = 0.0;
    for (const auto& run : ensemble.positions)
      sum += deviation_norm(run[i], ensemble.times[i], v, d);
    curve.emplace_back(ensemble.times[i],
                       sum / static_cast<double>(ensemble.positions.size()));
  }
  return curve;
}

PairedDiff l1_paired_difference(const Ensemble& ensemble, std::int64_t t_a,
                                std::int64_t t_b, std::span<const double> v) {
  const std::size_t ia = checkpoint_index(ensemble, t_a);
  const std::size_t ib = checkpoint_index(ensemble, t_b);
  const int d = ensemble.spec.d;
  const auto n = static_cast<std::int64_t>(ensemble.positions.size());
  double mean = 0.0, sq = 0.0;
  for (const auto& run : ensemble.positions) {
    const double diff = deviation_norm(run[ia], t_a, v, d) -
                        deviation_norm(run[ib], t_b, v, d);
    mean += diff;
    sq += diff * diff;
  }
  mean /= n;
  const double var = (sq - n * mean * mean) / std::max<std::int64_t>(1, n - 1);
  return PairedDiff{mean, std::sqrt(std::max(0.0, var) / n)};
}

LdbFit ldb_fit_points(std::span<const LdbPoint> points) {
  std::vector<double> xs, ys;
  LdbFit fit;
  fit.points.assign(points.begin(), points.end());
  for (const auto& pt : points) {
    if (pt.p <= 0.0 || pt.p >= 1.0) continue;
    xs.push_back(static_cast<double>(pt.t));
    ys.push_back(std::log(pt.p));
  }
  fit.used = static_cast<int>(xs.size());
  if (fit.used < 3)
    throw std::invalid_argument(
        "ldb fit: need >= 3 usable (noncensored-to-one) tail points");
  const auto line = linear_fit(xs, ys);
  fit.log_c = line.intercept;
  fit.c = -line.slope;
  fit.c_se = line.slope_se;
  return fit;
}

LdbFit ldb_rate(const Ensemble& ensemble, double eps,
                std::span<const double> v) {
  const int d = ensemble.spec.d;
  const auto n = static_cast<std::int64_t>(ensemble.positions.size());
  std::vector<LdbPoint> points;
  for (std::size_t i = 0; i < ensemble.times.size(); ++i) {
    std::int64_t hits = 0;
    for (const auto& run : ensemble.positions)
      if (deviation_norm(run[i], ensemble.times[i], v, d) > eps) ++hits;
    LdbPoint pt;
    pt.t = ensemble.times[i];
    if (hits == 0) {
      pt.p = 1.0 / (2.0 * static_cast<double>(n));
      pt.censored = true;
    } else {
      pt.p = static_cast<double>(hits) / static_cast<double>(n);
    }
    points.push_back(pt);
  }
  return ldb_fit_points(points);
}

double binom_walk_tail(std::int64_t t, double p_plus, double eps) {
  // X_t = 2 B - t with B ~ Bin(t, p): the tail is |B - t p| > t eps / 2.
  const double cutoff = static_cast<double>(t) * eps / 2.0;
  const double mean = static_cast<double>(t) * p_plus;
  double tail = 0.0;
  for (std::int64_t b = 0; b <= t; ++b) {
    if (std::abs(static_cast<double>(b) - mean) <= cutoff) continue;
    const double logp = std::lgamma(t + 1.0) - std::lgamma(b + 1.0) -
                        std::lgamma(t - b + 1.0) + b * std::log(p_plus) +
                        (t - b) * std::log1p(-p_plus);
    tail += std::exp(logp);
  }
  return tail;
}

KsResult ks_normal(std::vector<double> samples, double variance) {
  if (samples.size() < 8 || variance <= 0.0)
    throw std::invalid_argument("ks_normal: need samples and variance > 0");
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<std::int64_t>(samples.size());
  const double sd = std::sqrt(variance);

  // Lattice cell width: smallest positive gap (0 means effectively
  // continuous data and no correction).
  double delta = 0.0;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const double gap = samples[i] - samples[i - 1];
    if (gap > 1e-12 && (delta == 0.0 || gap < delta)) delta = gap;
  }

  // Each atom x represents the cell (x - delta/2, x + delta/2]; the null CDF
  // at the cell edges is what the empirical CDF estimates.
  double d_stat = 0.0;
  std::int64_t seen = 0;
  std::size_t i = 0;
  while (i < samples.size()) {
    std::size_t j = i;
    while (j < samples.size() && samples[j] - samples[i] <= 1e-12) ++j;
    const double x = samples[i];
    const double f_before = static_cast<double>(seen) / n;
    seen += static_cast<std::int64_t>(j - i);
    const double f_after = static_cast<double>(seen) / n;
    const double lo = normal_cdf((x - delta / 2.0) / sd);
    const double hi = normal_cdf((x + delta / 2.0) / sd);
    d_stat = std::max({d_stat, std::abs(f_before - lo), std::abs(f_after - hi)});
    i = j;
  }
  return KsResult{d_stat, ks_p_value(d_stat, n)};
}

FcltReport fclt_test(const Ensemble& ensemble, std::span<const double> v,
                     double sigma2, std::span<const double> theta) {
  if (sigma2 <= 0.0)
    throw std::invalid_argument("fclt_test: sigma2 must be positive");
  const int d = ensemble.spec.d;
  const auto n_time = static_cast<double>(ensemble.times.back());
  const auto n_runs = static_cast<std::int64_t>(ensemble.positions.size());
  const double marks[3] = {0.25, 0.5, 1.0};

  FcltReport report;
  std::vector<std::vector<double>> b(3);
  for (int mi = 0; mi < 3; ++mi) {
    const auto t =
        static_cast<std::int64_t>(std::floor(n_time * marks[mi]) + 0.5);
    const std::size_t idx = checkpoint_index(ensemble, t);
    std::vector<double> samples;
    samples.reserve(n_runs);
    for (const auto& run : ensemble.positions) {
      double drift = 0.0;
      for (int k = 0; k < d; ++k) drift += theta[k] * v[k] * t;
      samples.push_back((dot(theta, run[idx], d) - drift) /
                        std::sqrt(n_time * sigma2));
    }
    const auto ks = ks_normal(samples, marks[mi]);
    report.marginals.push_back(FcltMarginal{marks[mi], ks.stat, ks.p_value});
    b[mi] = std::move(samples);
  }
  report.marginals_ok = true;
  for (const auto& m : report.marginals)
    if (m.p_value <= 0.01 / 3.0) report.marginals_ok = false;

  report.covariance.assign(3, std::vector<double>(3, 0.0));
  report.covariance_se.assign(3, std::vector<double>(3, 0.0));
  report.covariance_ok = true;
  for (int a = 0; a < 3; ++a) {
    double mean_a = 0.0;
    for (double x : b[a]) mean_a += x;
    mean_a /= n_runs;
    for (int c = 0; c < 3; ++c) {
      double mean_c = 0.0;
      for (double x : b[c]) mean_c += x;
      mean_c /= n_runs;
      double cov = 0.0, sq = 0.0;
      for (std::int64_t r = 0; r < n_runs; ++r) {
        const double prod = (b[a][r] - mean_a) * (b[c][r] - mean_c);
        cov += prod;
        sq += prod * prod;
      }
      cov /= n_runs;
      const double var = sq / n_runs - cov * cov;
      const double se = std::sqrt(std::max(0.0, var) / n_runs);
      report.covariance[a][c] = cov;
      report.covariance_se[a][c] = se;
      const double target = std::min(marks[a], marks[c]);
      if (std::abs(cov - target) > 3.0 * se) report.covariance_ok = false;
    }
  }
  return report;
}

VarianceGrowth variance_growth(const Ensemble& ensemble,
                               std::span<const double> theta,
                               double cheb_eps) {
  const int d = ensemble.spec.d;
  const auto n_runs = static_cast<std::int64_t>(ensemble.positions.size());
  if (ensemble.times.size() < 3)
    throw std::invalid_argument("variance_growth: need >= 3 checkpoints");
  VarianceGrowth out;
  out.chebyshev_ok = true;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < ensemble.times.size(); ++i) {
    double mean = 0.0;
    for (const auto& run : ensemble.positions) mean += dot(theta, run[i], d);
    mean /= n_runs;
    double var = 0.0;
    std::int64_t exceed = 0;
    for (const auto& run : ensemble.positions) {
      const double y = dot(theta, run[i], d) - mean;
      var += y * y;
      if (std::abs(y) > cheb_eps) ++exceed;
    }
    var /= n_runs;  // population form keeps the Chebyshev identity exact
    out.var_curve.emplace_back(ensemble.times[i], var);
    xs.push_back(static_cast<double>(ensemble.times[i]));
    ys.push_back(var);
    if (cheb_eps * cheb_eps * exceed / static_cast<double>(n_runs) >
        var + 1e-12)
      out.chebyshev_ok = false;
  }
  const auto line = linear_fit(xs, ys);
  out.slope = line.slope;
  out.intercept = line.intercept;
  out.slope_se = line.slope_se;
  return out;
}

std::vector<std::vector<double>> empirical_sigma(const Ensemble& ensemble) {
  const int d = ensemble.spec.d;
  const std::size_t last = ensemble.times.size() - 1;
  const double scale = std::sqrt(static_cast<double>(ensemble.times[last]));
  const auto n_runs = static_cast<std::int64_t>(ensemble.positions.size());
  std::vector<double> mean(d, 0.0);
  for (const auto& run : ensemble.positions)
    for (int i = 0; i < d; ++i) mean[i] += run[last][i] / scale;
  for (int i = 0; i < d; ++i) mean[i] /= n_runs;
  std::vector<std::vector<double>> sigma(d, std::vector<double>(d, 0.0));
  for (const auto& run : ensemble.positions)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        sigma[i][j] += (run[last][i] / scale - mean[i]) *
                       (run[last][j] / scale - mean[j]);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) sigma[i][j] /= std::max<std::int64_t>(1, n_runs - 1);
  return sigma;
}

double min_eigenvalue(std::vector<std::vector<double>> m) {
  const auto n = static_cast<int>(m.size());
  // Cyclic Jacobi rotations; n is tiny (<= kMaxDim).
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += m[p][q] * m[p][q];
    if (off < 1e-24) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(m[p][q]) < 1e-18) continue;
        const double phi = 0.5 * std::atan2(2.0 * m[p][q], m[q][q] - m[p][p]);
        const double c = std::cos(phi), s = std::sin(phi);
        for (int k = 0; k < n; ++k) {
          const double mkp = m[k][p], mkq = m[k][q];
          m[k][p] = c * mkp - s * mkq;
          m[k][q] = s * mkp + c * mkq;
        }
        for (int k = 0; k < n; ++k) {
          const double mpk = m[p][k], mqk = m[q][k];
          m[p][k] = c * mpk - s * mqk;
          m[q][k] = s * mpk + c * mqk;
        }
      }
  }
  double lo = m[0][0];
  for (int i = 1; i < n; ++i) lo = std::min(lo, m[i][i]);
  return lo;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double kolmogorov_q(double lambda) {
  if (lambda < 1e-8) return 1.0;
  if (lambda < 1.18) {
    // Dual theta-function series; the direct one converges too slowly here.
    const double pi = 3.141592653589793;
    double cdf = 0.0;
    for (int j = 1; j <= 100; ++j) {
      const double m = 2.0 * j - 1.0;
      const double term = std::exp(-m * m * pi * pi / (8.0 * lambda * lambda));
      cdf += term;
      if (term < 1e-300) break;
    }
    cdf *= std::sqrt(2.0 * pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_p_value(double d, std::int64_t n) {
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  return kolmogorov_q((sqrt_n + 0.12 + 0.11 / sqrt_n) * d);
}

double regularized_gamma_q(double a, double x) {
  if (a <= 0.0 || x < 0.0)
    throw std::invalid_argument("regularized_gamma_q: need a > 0, x >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) {
    // Lower series, returned as 1 - P.
    double term = 1.0 / a, sum = term, ai = a;
    for (int k = 0; k < 1000; ++k) {
      ai += 1.0;
      term *= x / ai;
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-15) break;
    }
    return 1.0 - sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  // Continued fraction (modified Lentz).
  double b = x + 1.0 - a, c = 1e300, dd = 1.0 / b, h = dd;
  for (int k = 1; k <= 1000; ++k) {
    const double an = -static_cast<double>(k) * (k - a);
    b += 2.0;
    dd = an * dd + b;
    if (std::abs(dd) < 1e-300) dd = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    dd = 1.0 / dd;
    const double delta = dd * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-15) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double chi_square_p(double stat, double dof) {
  return regularized_gamma_q(dof / 2.0, stat / 2.0);
}

ChiSquare chi_square_gof(std::span<const std::int64_t> counts,
                         std::span<const double> probs) {
  if (counts.size() != probs.size())
    throw std::invalid_argument("chi_square_gof: size mismatch");
  std::int64_t total = 0;
  for (auto c : counts) total += c;
  ChiSquare result;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double expected = probs[i] * static_cast<double>(total);
    if (expected <= 0.0) {
      if (counts[i] != 0)
        throw std::invalid_argument(
            "chi_square_gof: observed mass on a zero-probability cell");
      continue;
    }
    const double diff = static_cast<double>(counts[i]) - expected;
    result.stat += diff * diff / expected;
    result.dof += 1.0;
  }
  result.dof -= 1.0;
  if (result.dof < 1.0)
    throw std::invalid_argument("chi_square_gof: needs >= 2 support cells");
  result.p = chi_square_p(result.stat, result.dof);
  return result;
}

LineFit linear_fit(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<std::int64_t>(x.size());
  if (n < 2 || x.size() != y.size())
    throw std::invalid_argument("linear_fit: need >= 2 matched points");
  double mx = 0.0, my = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("linear_fit: degenerate x");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    rss += r * r;
  }
  fit.slope_se = n > 2 ? std::sqrt(rss / (n - 2) / sxx) : 0.0;
  return fit;
}

}  // namespace rwdre::stats
