#include "rwdre/bruteforce.hpp"

#include <cmath>
#include <stdexcept>

namespace rwdre::bruteforce {

namespace {

// P(c -> c') of the configuration kernel: independent per-site moves.
double config_step_prob(const env::TorusModel& model, int c, int c2) {
  const auto& q = model.law().site_q;
  double p = 1.0;
  for (int s = 0; s < model.n_sites(); ++s)
    p *= q[model.state_site(c, s)][model.state_site(c2, s)];
  return p;
}

// Walks the history segment of a path enumeration: visits every
// configuration path (c_{-k}, ..., c_0) consistent with the event, calling
// sink(c_0, weight) with weight = pi(c_{-k}) * transition products.
template <typename Sink>
void enumerate_history(const env::TorusModel& model,
                       const ObservationEvent& event, Sink&& sink) {
  const int n = model.n_states();
  const int k = event.depth();
  const auto& sites = event.path.sites;

  auto dfs = [&](auto&& self, int step, int c, double weight) -> void {
    // step j is time -k + j at position sites[j], observing sigma_{k-j}.
    if (step == k) {
      sink(c, weight);
      return;
    }
    if (model.pattern_at(c, sites[step]) != event.patterns[k - 1 - step])
      return;
    for (int c2 = 0; c2 < n; ++c2) {
      const double p = config_step_prob(model, c, c2);
      if (p > 0.0) self(self, step + 1, c2, weight * p);
    }
  };
  for (int c = 0; c < n; ++c) {
    const double w = model.stationary()[c];
    if (w > 0.0) dfs(dfs, 0, c, w);
  }
}

void normalize_or_throw(std::vector<double>& w, const char* what) {
  double mass = 0.0;
  for (double v : w) mass += v;
  if (mass <= 0.0)
    throw std::runtime_error(std::string(what) + ": zero-probability event");
  for (double& v : w) v /= mass;
}

}  // namespace

std::vector<double> posterior(const env::TorusModel& model,
                              const ObservationEvent& event) {
  std::vector<double> out(model.n_states(), 0.0);
  enumerate_history(model, event,
                    [&](int c, double w) { out[c] += w; });
  normalize_or_throw(out, "bruteforce::posterior");
  return out;
}

std::vector<double> lep_window_law(const env::TorusModel& model,
                                   const ObservationEvent& event,
                                   std::int64_t t, int h) {
  const auto& spec = model.spec();
  const int n = model.n_states();
  const std::int64_t m =
      spec.pattern_count() * static_cast<std::int64_t>(spec.range_size());
  std::int64_t size = 1;
  for (int j = 0; j < h; ++j) size *= m;
  std::vector<double> out(size, 0.0);

  // From time 0 on, branch over both the configuration step and the jump.
  auto walk_dfs = [&](auto&& self, std::int64_t s, int c, Vec pos,
                      double weight, std::int64_t prefix) -> void {
    if (s == t + h) {
      out[prefix] += weight;
      return;
    }
    const std::int64_t pat = model.pattern_at(c, pos);
    for (std::size_t col = 0; col < spec.range.size(); ++col) {
      const double a = spec.kernel.prob(static_cast<int>(pat),
                                        static_cast<int>(col));
      if (a <= 0.0) continue;
      const std::int64_t next_prefix =
          s >= t ? prefix * m + (pat - 1) * spec.range_size() +
                       static_cast<std::int64_t>(col)
                 : prefix;
      const Vec next_pos = pos + spec.range[col];
      for (int c2 = 0; c2 < n; ++c2) {
        const double p = config_step_prob(model, c, c2);
        if (p > 0.0)
          self(self, s + 1, c2, next_pos, weight * a * p, next_prefix);
      }
    }
  };
  enumerate_history(model, event, [&](int c0, double w) {
    walk_dfs(walk_dfs, 0, c0, Vec{}, w, 0);
  });
  normalize_or_throw(out, "bruteforce::lep_window_law");
  return out;
}

double phi_hat(const env::TorusModel& model, const ObservationEvent& a0,
               const ObservationEvent& a1, std::int64_t t, int h) {
  const auto p = lep_window_law(model, a0, t, h);
  const auto q = lep_window_law(model, a1, t, h);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

std::vector<double> env_window_law(const env::TorusModel& model,
                                   const ObservationEvent* event,
                                   std::int64_t t, int h) {
  const int n = model.n_states();
  std::int64_t size = 1;
  for (int j = 0; j < h; ++j) size *= n;
  std::vector<double> out(size, 0.0);
  if (h == 0) {
    out[0] = 1.0;
    return out;
  }

  auto env_dfs = [&](auto&& self, std::int64_t s, int c, double weight,
                     std::int64_t prefix) -> void {
    const std::int64_t next_prefix = s >= t ? prefix * n + c : prefix;
    if (s + 1 == t + h) {
      out[next_prefix] += weight;
      return;
    }
    for (int c2 = 0; c2 < n; ++c2) {
      const double p = config_step_prob(model, c, c2);
      if (p > 0.0) self(self, s + 1, c2, weight * p, next_prefix);
    }
  };
  if (event) {
    enumerate_history(model, *event, [&](int c0, double w) {
      env_dfs(env_dfs, 0, c0, w, 0);
    });
  } else {
    for (int c = 0; c < n; ++c) {
      const double w = model.stationary()[c];
      if (w > 0.0) env_dfs(env_dfs, 0, c, w, 0);
    }
  }
  normalize_or_throw(out, "bruteforce::env_window_law");
  return out;
}

double phi_tilde(const env::TorusModel& model, const ObservationEvent& event,
                 std::int64_t t, int h) {
  const auto p = env_window_law(model, &event, t, h);
  const auto q = env_window_law(model, nullptr, t, h);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

std::vector<double> jump_sequence_law(const env::TorusModel& model,
                                      const ObservationEvent& event, int T) {
  const auto& spec = model.spec();
  const int n = model.n_states();
  std::int64_t size = 1;
  for (int j = 0; j < T; ++j) size *= spec.range_size();
  std::vector<double> out(size, 0.0);

  auto walk_dfs = [&](auto&& self, int s, int c, Vec pos, double weight,
                      std::int64_t prefix) -> void {
    if (s == T) {
      out[prefix] += weight;
      return;
    }
    const std::int64_t pat = model.pattern_at(c, pos);
    for (std::size_t col = 0; col < spec.range.size(); ++col) {
      const double a = spec.kernel.prob(static_cast<int>(pat),
                                        static_cast<int>(col));
      if (a <= 0.0) continue;
      const std::int64_t next_prefix =
          prefix * spec.range_size() + static_cast<std::int64_t>(col);
      const Vec next_pos = pos + spec.range[col];
      for (int c2 = 0; c2 < n; ++c2) {
        const double p = config_step_prob(model, c, c2);
        if (p > 0.0)
          self(self, s + 1, c2, next_pos, weight * a * p, next_prefix);
      }
    }
  };
  enumerate_history(model, event, [&](int c0, double w) {
    walk_dfs(walk_dfs, 0, c0, Vec{}, w, 0);
  });
  normalize_or_throw(out, "bruteforce::jump_sequence_law");
  return out;
}

}  // namespace rwdre::bruteforce
