#include "rwdre/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace rwdre::oracle {

namespace {

double vector_sum(const std::vector<double>& w) {
  return std::accumulate(w.begin(), w.end(), 0.0);
}

void normalize(std::vector<double>& w, const char* what) {
  const double mass = vector_sum(w);
  if (mass <= 0.0)
    throw std::runtime_error(std::string(what) + ": zero-mass distribution");
  for (double& v : w) v /= mass;
}

}  // namespace

void joint_advance(const env::TorusModel& model, std::vector<double>& w) {
  const auto& spec = model.spec();
  const int n = model.n_states();
  std::vector<double> out(n, 0.0);
  std::vector<double> masked(n);
  std::vector<double> scaled(n);
  for (std::int64_t i = 1; i <= spec.pattern_count(); ++i) {
    bool any = false;
    for (int st = 0; st < n; ++st) {
      masked[st] = (model.pattern_of_state(st) == i) ? w[st] : 0.0;
      any = any || masked[st] != 0.0;
    }
    if (!any) continue;
    model.advance_env(masked);
    for (std::size_t col = 0; col < spec.range.size(); ++col) {
      const double a = spec.kernel.prob(static_cast<int>(i),
                                        static_cast<int>(col));
      if (a <= 0.0) continue;
      for (int st = 0; st < n; ++st) scaled[st] = masked[st] * a;
      model.recenter(scaled, spec.range[col]);
      for (int st = 0; st < n; ++st) out[st] += scaled[st];
    }
  }
  w.swap(out);
}

JointChain build_joint_chain(std::shared_ptr<const env::TorusModel> model,
                             int state_cap) {
  JointChain chain;
  chain.model = model;
  const int n = model->n_states();
  if (n > state_cap)
    throw std::invalid_argument("build_joint_chain: state space exceeds cap");
  chain.transition.assign(n, std::vector<double>(n, 0.0));
  std::vector<double> row(n);
  for (int st = 0; st < n; ++st) {
    std::fill(row.begin(), row.end(), 0.0);
    row[st] = 1.0;
    joint_advance(*model, row);
    chain.transition[st] = row;
  }

  // Stationary vector by power iteration; the two-iterate average damps the
  // oscillation of periodic chains.
  std::vector<double> pi(n, 1.0 / n), next(n), avg(n);
  double residual = 1.0;
  for (int iter = 0; iter < 200000 && residual > 1e-13; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int s = 0; s < n; ++s) {
      const double ps = pi[s];
      if (ps == 0.0) continue;
      const auto& trow = chain.transition[s];
      for (int s2 = 0; s2 < n; ++s2) next[s2] += ps * trow[s2];
    }
    for (int s = 0; s < n; ++s) avg[s] = 0.5 * (pi[s] + next[s]);
    normalize(avg, "build_joint_chain");
    residual = 0.0;
    for (int s = 0; s < n; ++s) residual += std::abs(avg[s] - pi[s]);
    pi.swap(avg);
  }
  if (residual > 1e-10)
    throw std::runtime_error("build_joint_chain: stationary iteration stalled");
  chain.stationary = std::move(pi);
  return chain;
}

std::vector<double> exact_speed(const JointChain& chain) {
  const auto& spec = chain.model->spec();
  std::vector<double> v(spec.d, 0.0);
  for (int st = 0; st < chain.n_states(); ++st) {
    const auto i = static_cast<int>(chain.model->pattern_of_state(st));
    for (std::size_t col = 0; col < spec.range.size(); ++col) {
      const double w = chain.stationary[st] *
                       spec.kernel.prob(i, static_cast<int>(col));
      for (int dim = 0; dim < spec.d; ++dim)
        v[dim] += w * spec.range[col][dim];
    }
  }
  return v;
}

namespace {

// Breadth-first levels on the positive-transition digraph; empty if some
// state is unreachable from the start.
std::vector<int> bfs_levels(const std::vector<std::vector<double>>& t,
                            bool reverse) {
  const int n = static_cast<int>(t.size());
  std::vector<int> level(n, -1);
  std::vector<int> queue{0};
  level[0] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int u = queue[head];
    for (int v = 0; v < n; ++v) {
      const double p = reverse ? t[v][u] : t[u][v];
      if (p > 0.0 && level[v] < 0) {
        level[v] = level[u] + 1;
        queue.push_back(v);
      }
    }
  }
  if (static_cast<int>(queue.size()) != n) level.clear();
  return level;
}

}  // namespace

bool is_irreducible(const JointChain& chain) {
  return !bfs_levels(chain.transition, false).empty() &&
         !bfs_levels(chain.transition, true).empty();
}

bool is_aperiodic(const JointChain& chain) {
  const auto level = bfs_levels(chain.transition, false);
  if (level.empty()) return false;
  const int n = chain.n_states();
  std::int64_t g = 0;
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v)
      if (chain.transition[u][v] > 0.0)
        g = std::gcd(g, static_cast<std::int64_t>(level[u]) + 1 - level[v]);
  return g == 1;
}

double exact_asymptotic_variance(const JointChain& chain,
                                 const std::vector<double>& theta) {
  const auto& model = *chain.model;
  const auto& spec = model.spec();
  const int n = chain.n_states();
  if (static_cast<int>(theta.size()) != spec.d)
    throw std::invalid_argument("exact_asymptotic_variance: theta dimension");
  if (!is_irreducible(chain) || !is_aperiodic(chain))
    throw std::invalid_argument(
        "exact_asymptotic_variance: chain must be irreducible and aperiodic");

  const auto& pi = chain.stationary;
  auto dot_z = [&](std::size_t col) {
    double s = 0.0;
    for (int dim = 0; dim < spec.d; ++dim)
      s += theta[dim] * spec.range[col][dim];
    return s;
  };

  // One-step drift g and its stationary mean v.
  std::vector<double> g(n, 0.0);
  for (int st = 0; st < n; ++st) {
    const auto i = static_cast<int>(model.pattern_of_state(st));
    for (std::size_t col = 0; col < spec.range.size(); ++col)
      g[st] += spec.kernel.prob(i, static_cast<int>(col)) * dot_z(col);
  }
  double v = 0.0;
  for (int st = 0; st < n; ++st) v += pi[st] * g[st];

  // Poisson equation (I - T) u = g - v. The rank-one correction 1 pi^T makes
  // the system nonsingular without changing the centered solution.
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c)
      a[r][c] = (r == c ? 1.0 : 0.0) - chain.transition[r][c] + pi[c];
    a[r][n] = g[r] - v;
  }
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) < 1e-13)
      throw std::runtime_error("exact_asymptotic_variance: singular system");
    std::swap(a[col], a[pivot]);
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (int c = col; c <= n; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<double> u(n);
  for (int r = 0; r < n; ++r) u[r] = a[r][n] / a[r][r];

  // sigma^2 = E_pi[(increment - v + u(next) - u(cur))^2] over the joint move
  // (jump, environment step, re-centering).
  double sigma2 = 0.0;
  std::vector<double> adv(n), shifted(n);
  for (int st = 0; st < n; ++st) {
    if (pi[st] == 0.0) continue;
    const auto i = static_cast<int>(model.pattern_of_state(st));
    std::fill(adv.begin(), adv.end(), 0.0);
    adv[st] = 1.0;
    model.advance_env(adv);
    for (std::size_t col = 0; col < spec.range.size(); ++col) {
      const double alpha = spec.kernel.prob(i, static_cast<int>(col));
      if (alpha <= 0.0) continue;
      shifted = adv;
      model.recenter(shifted, spec.range[col]);
      const double base = dot_z(col) - v - u[st];
      for (int st2 = 0; st2 < n; ++st2) {
        if (shifted[st2] == 0.0) continue;
        const double m = base + u[st2];
        sigma2 += pi[st] * alpha * shifted[st2] * m * m;
      }
    }
  }
  return sigma2;
}

std::vector<double> lep_window_law(const env::TorusModel& model,
                                   std::vector<double> posterior,
                                   std::int64_t t, int h) {
  const auto& spec = model.spec();
  const std::int64_t k_pat = spec.pattern_count();
  const std::int64_t m = k_pat * spec.range_size();
  std::int64_t size = 1;
  for (int j = 0; j < h; ++j) size *= m;
  std::vector<double> out(size, 0.0);
  normalize(posterior, "lep_window_law");
  for (std::int64_t s = 0; s < t; ++s) joint_advance(model, posterior);
  if (h == 0) {
    out[0] = 1.0;
    return out;
  }

  const int n = model.n_states();
  // DFS over (pattern, jump) prefixes; vector mass = prefix probability.
  // Window index is mixed radix, first step most significant.
  auto dfs = [&](auto&& self, const std::vector<double>& w, int depth,
                 std::int64_t prefix) -> void {
    if (depth == h) {
      out[prefix] += vector_sum(w);
      return;
    }
    std::vector<double> masked(n), scaled(n);
    for (std::int64_t i = 1; i <= k_pat; ++i) {
      bool any = false;
      for (int st = 0; st < n; ++st) {
        masked[st] = (model.pattern_of_state(st) == i) ? w[st] : 0.0;
        any = any || masked[st] != 0.0;
      }
      if (!any) continue;
      model.advance_env(masked);
      for (std::size_t col = 0; col < spec.range.size(); ++col) {
        const double a = spec.kernel.prob(static_cast<int>(i),
                                          static_cast<int>(col));
        if (a <= 0.0) continue;
        for (int st = 0; st < n; ++st) scaled[st] = masked[st] * a;
        model.recenter(scaled, spec.range[col]);
        const std::int64_t vid = (i - 1) * spec.range_size() +
                                 static_cast<std::int64_t>(col);
        self(self, scaled, depth + 1, prefix * m + vid);
      }
    }
  };
  dfs(dfs, posterior, 0, 0);
  return out;
}

std::vector<double> env_window_law(const env::TorusModel& model,
                                   std::vector<double> posterior,
                                   std::int64_t t, int h) {
  const int n = model.n_states();
  std::int64_t size = 1;
  for (int j = 0; j < h; ++j) size *= n;
  std::vector<double> out(size, 0.0);
  normalize(posterior, "env_window_law");
  for (std::int64_t s = 0; s < t; ++s) model.advance_env(posterior);
  if (h == 0) {
    out[0] = 1.0;
    return out;
  }

  // One-step rows of the configuration kernel, materialized once.
  std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
  for (int st = 0; st < n; ++st) {
    rows[st][st] = 1.0;
    model.advance_env(rows[st]);
  }
  auto dfs = [&](auto&& self, const std::vector<double>& w, int depth,
                 std::int64_t prefix) -> void {
    for (int c = 0; c < n; ++c) {
      if (w[c] == 0.0) continue;
      const std::int64_t idx = prefix * n + c;
      if (depth + 1 == h) {
        out[idx] += w[c];
        continue;
      }
      std::vector<double> next(n);
      for (int c2 = 0; c2 < n; ++c2) next[c2] = w[c] * rows[c][c2];
      self(self, next, depth + 1, idx);
    }
  };
  dfs(dfs, posterior, 0, 0);
  return out;
}

double total_variation(const std::vector<double>& p,
                       const std::vector<double>& q) {
  if (p.size() != q.size())
    throw std::invalid_argument("total_variation: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

double exact_phi_hat_torus(const env::TorusModel& model,
                           const ObservationEvent& a0,
                           const ObservationEvent& a1, std::int64_t t, int h) {
  const auto p0 = env::posterior_after_history(model, a0);
  const auto p1 = env::posterior_after_history(model, a1);
  return total_variation(lep_window_law(model, p0, t, h),
                         lep_window_law(model, p1, t, h));
}

std::vector<ObservationEvent> enumerate_histories(const env::TorusModel& model,
                                                  int k_max) {
  const auto& spec = model.spec();
  std::vector<ObservationEvent> events;
  for (int k = 1; k <= k_max; ++k) {
    // Increment sequences in R^k and pattern sequences in K^k.
    std::vector<std::size_t> inc(k, 0);
    while (true) {
      std::vector<Vec> sites(k + 1);
      for (int i = k - 1; i >= 0; --i)
        sites[i] = sites[i + 1] - spec.range[inc[i]];
      std::vector<std::int64_t> sigma(k, 1);
      while (true) {
        try {
          ObservationEvent ev(BackwardPath(sites, spec), sigma, spec);
          env::posterior_after_history(model, ev);  // probe positivity
          events.push_back(std::move(ev));
        } catch (const std::runtime_error&) {
          // zero-probability history: skip
        }
        int j = k - 1;
        while (j >= 0 && sigma[j] == spec.pattern_count()) sigma[j--] = 1;
        if (j < 0) break;
        ++sigma[j];
      }
      int j = k - 1;
      while (j >= 0 && inc[j] + 1 == spec.range.size()) inc[j--] = 0;
      if (j < 0) break;
      ++inc[j];
    }
  }
  return events;
}

double exact_phi_hat(const env::TorusModel& model, std::int64_t t, int k_max,
                     int h) {
  const auto events = enumerate_histories(model, k_max);
  std::vector<std::vector<double>> laws;
  laws.reserve(events.size());
  for (const auto& ev : events)
    laws.push_back(lep_window_law(
        model, env::posterior_after_history(model, ev), t, h));
  double best = 0.0;
  for (std::size_t a = 0; a < laws.size(); ++a)
    for (std::size_t b = a + 1; b < laws.size(); ++b)
      best = std::max(best, total_variation(laws[a], laws[b]));
  return best;
}

namespace {

// Torus sites of the cone section R_s + Delta; all_sites flags a wrap-around
// of the whole torus, in which case no projection is needed at that level.
struct ConeLevel {
  std::vector<int> sites;
  bool full = false;
};

ConeLevel cone_level(const env::TorusModel& model, std::int64_t s) {
  const auto& spec = model.spec();
  std::vector<bool> seen(model.n_sites(), false);
  const int L = model.law().torus_side;
  for (const Vec& r : reachable_set(spec, s)) {
    for (const Vec& d : spec.delta) {
      const Vec x = r + d;
      int idx = 0, stride = 1;
      for (int i = 0; i < spec.d; ++i) {
        idx += (((x[i] % L) + L) % L) * stride;
        stride *= L;
      }
      seen[idx] = true;
    }
  }
  ConeLevel level;
  for (int i = 0; i < model.n_sites(); ++i)
    if (seen[i]) level.sites.push_back(i);
  level.full = static_cast<int>(level.sites.size()) == model.n_sites();
  return level;
}

// Project a configuration-path law onto the cone cells.
std::vector<double> project_to_cone(const env::TorusModel& model,
                                    const std::vector<double>& path_law,
                                    const std::vector<ConeLevel>& levels) {
  const int n = model.n_states();
  const int e = model.law().alphabet_size;
  std::int64_t size = 1;
  for (const auto& lvl : levels)
    for (std::size_t j = 0; j < lvl.sites.size(); ++j) size *= e;
  std::vector<double> out(size, 0.0);
  const int h = static_cast<int>(levels.size());
  for (std::size_t idx = 0; idx < path_law.size(); ++idx) {
    if (path_law[idx] == 0.0) continue;
    // Path index is mixed radix base n, first level most significant.
    std::int64_t key = 0;
    std::int64_t rem = static_cast<std::int64_t>(idx);
    std::int64_t div = 1;
    for (int j = 1; j < h; ++j) div *= n;
    for (int j = 0; j < h; ++j) {
      const int c = static_cast<int>(rem / div);
      rem %= div;
      if (j + 1 < h) div /= n;
      for (int site : levels[j].sites)
        key = key * e + model.state_site(c, site);
    }
    out[key] += path_law[idx];
  }
  return out;
}

}  // namespace

double exact_phi_tilde(const env::TorusModel& model, std::int64_t t, int k_max,
                       int h) {
  std::vector<ConeLevel> levels;
  bool all_full = true;
  for (int j = 0; j < h; ++j) {
    levels.push_back(cone_level(model, t + j));
    all_full = all_full && levels.back().full;
  }

  auto window = [&](std::vector<double> posterior) {
    auto law = env_window_law(model, std::move(posterior), t, h);
    if (all_full) return law;
    return project_to_cone(model, law, levels);
  };

  const auto base = window(model.stationary());
  double best = 0.0;
  for (const auto& ev : enumerate_histories(model, k_max))
    best = std::max(best, total_variation(
                              window(env::posterior_after_history(model, ev)),
                              base));
  return best;
}

}  // namespace rwdre::oracle
