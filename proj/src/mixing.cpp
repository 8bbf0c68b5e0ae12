#include "rwdre/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "rwdre/parallel.hpp"
#include "rwdre/rng.hpp"
#include "rwdre/walk.hpp"

namespace rwdre::mixing {

const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::exact: return "exact";
    case Mode::mc_lower_bound: return "mc_lower_bound";
    case Mode::analytic_upper_bound: return "analytic_upper_bound";
  }
  return "unknown";
}

std::string estimate_to_json(const MixingEstimate& e) {
  nlohmann::json j;
  j["coefficient"] = e.coefficient;
  j["t"] = e.t;
  j["value"] = e.value;
  j["mode"] = mode_name(e.mode);
  j["families"] = e.families;
  if (e.stderr_value)
    j["stderr"] = *e.stderr_value;
  else
    j["stderr"] = nullptr;
  j["budget_exhausted"] = e.budget_exhausted;
  return j.dump();
}

namespace {

int invcdf(std::span<const double> probs, double u) {
  double cum = 0.0;
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

// Latest observation per environment site implied by an observation event.
struct SiteObs {
  std::int64_t t_obs = 0;
  int value = 0;
};

std::unordered_map<Vec, SiteObs, VecHash> observed_sites(
    const ModelSpec& spec, const ObservationEvent& event) {
  std::unordered_map<Vec, SiteObs, VecHash> obs;
  const int k = event.depth();
  for (int j = 0; j < k; ++j) {
    const std::int64_t time = -k + j;
    const auto symbols = pattern_of_index(event.patterns[k - 1 - j],
                                          spec.alphabet_size,
                                          spec.window_size());
    for (std::size_t slot = 0; slot < spec.delta.size(); ++slot) {
      const Vec site = event.path.sites[j] + spec.delta[slot];
      auto it = obs.find(site);
      if (it == obs.end() || it->second.t_obs < time)
        obs[site] = SiteObs{time, symbols[slot]};
    }
  }
  return obs;
}

// Powers of the site transition matrix, extended on demand.
class ChainPowers {
 public:
  explicit ChainPowers(const std::vector<std::vector<double>>& q) : q_(q) {
    const std::size_t e = q.size();
    std::vector<std::vector<double>> id(e, std::vector<double>(e, 0.0));
    for (std::size_t i = 0; i < e; ++i) id[i][i] = 1.0;
    powers_.push_back(std::move(id));
  }

  double prob(std::int64_t steps, int from, int to) {
    while (static_cast<std::int64_t>(powers_.size()) <= steps) {
      const auto& prev = powers_.back();
      const std::size_t e = q_.size();
      std::vector<std::vector<double>> next(e, std::vector<double>(e, 0.0));
      for (std::size_t a = 0; a < e; ++a)
        for (std::size_t b = 0; b < e; ++b)
          for (std::size_t c = 0; c < e; ++c)
            next[a][c] += prev[a][b] * q_[b][c];
      powers_.push_back(std::move(next));
    }
    return powers_[steps][from][to];
  }

 private:
  const std::vector<std::vector<double>>& q_;
  std::vector<std::vector<std::vector<double>>> powers_;
};

// Exact TV between the conditional and unconditional laws of the cone cells
// in [t, t+h) for an independent-site-chain law: only sites the event
// observed contribute (the field is a product over sites), and each such
// site is a Markov chain pinned at its latest observation.
double site_chain_phi_tilde_term(const env::EnvironmentLaw& law,
                                 const ModelSpec& spec,
                                 const ObservationEvent& event, std::int64_t t,
                                 int h, bool& skipped) {
  const int e = law.alphabet_size;
  const auto pi = law.site_stationary();
  ChainPowers powers(law.site_q);

  struct SiteCells {
    SiteObs obs;
    std::vector<std::int64_t> times;  // cone cells of this site in [t, t+h)
  };
  std::vector<SiteCells> sites;
  double log_size = 0.0;
  for (const auto& [site, obs] : observed_sites(spec, event)) {
    SiteCells sc{obs, {}};
    for (std::int64_t s = t; s < t + h; ++s)
      if (in_cone(spec, Cell{site, s}, t)) sc.times.push_back(s);
    if (sc.times.empty()) continue;
    log_size += sc.times.size() * std::log(static_cast<double>(e));
    sites.push_back(std::move(sc));
  }
  if (sites.empty()) return 0.0;
  if (log_size > 20.0 * std::log(2.0)) {
    // Joint enumeration too large; drop the stalest observations. The value
    // stays a valid lower bound (TV over a sub-family).
    std::sort(sites.begin(), sites.end(), [](const auto& a, const auto& b) {
      return a.obs.t_obs > b.obs.t_obs;
    });
    while (log_size > 20.0 * std::log(2.0) && sites.size() > 1) {
      log_size -= sites.back().times.size() * std::log(static_cast<double>(e));
      sites.pop_back();
      skipped = true;
    }
  }

  // Per site: (conditional, unconditional) probability of each value tuple.
  std::vector<std::vector<std::pair<double, double>>> tuples;
  for (const auto& sc : sites) {
    const auto m = static_cast<int>(sc.times.size());
    std::int64_t count = 1;
    for (int j = 0; j < m; ++j) count *= e;
    std::vector<std::pair<double, double>> tp(count);
    std::vector<int> vals(m, 0);
    for (std::int64_t idx = 0; idx < count; ++idx) {
      std::int64_t rem = idx;
      for (int j = m - 1; j >= 0; --j) {
        vals[j] = static_cast<int>(rem % e);
        rem /= e;
      }
      double cond = powers.prob(sc.times[0] - sc.obs.t_obs, sc.obs.value,
                                vals[0]);
      double uncond = pi[vals[0]];
      for (int j = 1; j < m; ++j) {
        const double step =
            powers.prob(sc.times[j] - sc.times[j - 1], vals[j - 1], vals[j]);
        cond *= step;
        uncond *= step;
      }
      tp[idx] = {cond, uncond};
    }
    tuples.push_back(std::move(tp));
  }

  double tv = 0.0;
  auto cross = [&](auto&& self, std::size_t site, double cond,
                   double uncond) -> void {
    if (site == tuples.size()) {
      tv += std::abs(cond - uncond);
      return;
    }
    for (const auto& [c, u] : tuples[site])
      self(self, site + 1, cond * c, uncond * u);
  };
  cross(cross, 0, 1.0, 1.0);
  return 0.5 * tv;
}

// Lazily materialized site-chain field conditioned on an observation event:
// observed sites start from their latest observed value, the rest from
// stationarity at first read. Reads must be forward in time per site.
class ConditionedSiteField {
 public:
  ConditionedSiteField(const env::EnvironmentLaw& law, const ModelSpec& spec,
                       const ObservationEvent* event, std::uint64_t seed)
      : law_(&law), seed_(seed), stat_(law.site_stationary()) {
    if (event) observed_ = observed_sites(spec, *event);
  }

  int read(const Vec& x, std::int64_t t) {
    auto it = states_.find(x);
    if (it == states_.end()) {
      State st;
      st.stream.key = rng::hash_words(
          {seed_, 0x73697465ULL, static_cast<std::uint64_t>(x[0]),
           static_cast<std::uint64_t>(x[1]), static_cast<std::uint64_t>(x[2]),
           static_cast<std::uint64_t>(x[3])});
      auto ob = observed_.find(x);
      if (ob != observed_.end()) {
        st.t = ob->second.t_obs;
        st.value = ob->second.value;
      } else {
        st.t = t;
        st.value = st.stream.next_index(stat_);
      }
      it = states_.emplace(x, st).first;
    }
    State& st = it->second;
    if (t < st.t)
      throw std::logic_error("ConditionedSiteField: backward read");
    while (st.t < t) {
      st.value = st.stream.next_index(law_->site_q[st.value]);
      ++st.t;
    }
    return st.value;
  }

 private:
  struct State {
    std::int64_t t = 0;
    int value = 0;
    rng::Stream stream;
  };
  const env::EnvironmentLaw* law_;
  std::uint64_t seed_;
  std::vector<double> stat_;
  std::unordered_map<Vec, SiteObs, VecHash> observed_;
  std::unordered_map<Vec, State, VecHash> states_;
};

// One walk on a conditioned field; returns the LEP window id over steps
// [t, t+h), mixed radix (pattern-1)*|R| + column, first step most
// significant.
std::int64_t sample_window_id(const env::EnvironmentLaw& law,
                              const ModelSpec& spec,
                              const ObservationEvent& event, std::int64_t t,
                              int h, std::uint64_t seed) {
  ConditionedSiteField field(law, spec, &event, seed);
  rng::Stream u{rng::hash_words({seed, 0x77616c6bULL}), 0};
  const std::int64_t m =
      spec.pattern_count() * static_cast<std::int64_t>(spec.range_size());
  Vec pos;
  std::vector<int> digits(spec.delta.size());
  std::int64_t id = 0;
  for (std::int64_t s = 0; s < t + h; ++s) {
    for (std::size_t j = 0; j < spec.delta.size(); ++j)
      digits[j] = field.read(pos + spec.delta[j], s);
    const std::int64_t pat = pattern_index(digits, spec.alphabet_size);
    const int col = invcdf(spec.kernel.rows[pat - 1], u.next_unit());
    if (s >= t) id = id * m + (pat - 1) * spec.range_size() + col;
    pos = pos + spec.range[col];
  }
  return id;
}

std::shared_ptr<const env::TorusModel> make_torus(
    const env::EnvironmentLaw& law, const ModelSpec& spec) {
  return std::make_shared<env::TorusModel>(law, spec);
}

}  // namespace

MixingEstimate estimate_phi_tilde(const env::EnvironmentLaw& law,
                                  const ModelSpec& spec, std::int64_t t,
                                  int k_max, int h, std::int64_t budget,
                                  std::uint64_t seed) {
  if (t < 1) throw std::invalid_argument("estimate_phi_tilde: t must be >= 1");
  MixingEstimate est;
  est.coefficient = "phi_tilde";
  est.t = t;
  switch (law.kind) {
    case env::LawKind::iid_field:
      est.mode = Mode::exact;
      est.value = 0.0;
      est.families =
          "all events (product field: conditioning and cone cells disjoint)";
      return est;
    case env::LawKind::torus_markov: {
      est.mode = Mode::exact;
      est.value = oracle::exact_phi_tilde(*make_torus(law, spec), t, k_max, h);
      est.families = "exact enumeration: histories of depth <= " +
                     std::to_string(k_max) + ", cone windows of depth " +
                     std::to_string(h);
      return est;
    }
    case env::LawKind::independent_site_chain: {
      est.mode = Mode::mc_lower_bound;
      est.families = std::to_string(budget) +
                     " sampled histories (depth <= " + std::to_string(k_max) +
                     "), exact conditional TV on cone windows of depth " +
                     std::to_string(h);
      est.stderr_value = 0.0;  // each per-history TV is exact
      double best = 0.0;
      bool skipped = false;
      for (std::int64_t r = 0; r < budget; ++r) {
        const int k = 1 + static_cast<int>(r % k_max);
        const auto event = coupling::sample_history(
            law, spec, k, rng::hash_words({seed, 0x70687474ULL,
                                           static_cast<std::uint64_t>(r)}));
        best = std::max(best, site_chain_phi_tilde_term(law, spec, event, t, h,
                                                        skipped));
      }
      est.value = best;
      est.budget_exhausted = skipped;
      return est;
    }
  }
  throw std::logic_error("estimate_phi_tilde: unknown law kind");
}

MixingEstimate analytic_phi_tilde_bound(const env::EnvironmentLaw& law,
                                        const ModelSpec& spec,
                                        std::int64_t t) {
  MixingEstimate est;
  est.coefficient = "phi_tilde";
  est.t = t;
  est.mode = Mode::analytic_upper_bound;
  if (law.kind == env::LawKind::iid_field) {
    est.value = 0.0;
    est.families = "all events (product field)";
    return est;
  }
  if (law.alphabet_size != 2 ||
      std::abs(law.site_q[0][1] - law.site_q[1][0]) > 1e-12)
    throw std::invalid_argument(
        "analytic_phi_tilde_bound: closed form requires a symmetric "
        "two-state site chain");
  const double q = law.site_q[0][1];
  if (q <= 0.0) {
    est.value = 1.0;  // frozen chain never mixes
  } else {
    est.value = std::min(
        1.0, spec.window_size() * std::pow(std::abs(1.0 - 2.0 * q),
                                           static_cast<double>(t)) /
                 (2.0 * q));
  }
  est.families = "all events (geometric per-site decay, union over Delta)";
  return est;
}

MixingEstimate estimate_phi_hat(const env::EnvironmentLaw& law,
                                const ModelSpec& spec, std::int64_t t,
                                int k_max, int h, std::int64_t budget,
                                std::uint64_t seed) {
  if (t < 0) throw std::invalid_argument("estimate_phi_hat: t must be >= 0");
  MixingEstimate est;
  est.coefficient = "phi_hat";
  est.t = t;
  switch (law.kind) {
    case env::LawKind::iid_field:
      est.mode = Mode::exact;
      est.value = 0.0;
      est.families = "all history pairs (posteriors over the future agree)";
      return est;
    case env::LawKind::torus_markov: {
      est.mode = Mode::exact;
      est.value = oracle::exact_phi_hat(*make_torus(law, spec), t, k_max, h);
      est.families = "exact enumeration: history pairs of depth <= " +
                     std::to_string(k_max) + ", LEP windows of depth " +
                     std::to_string(h);
      return est;
    }
    case env::LawKind::independent_site_chain: {
      est.mode = Mode::mc_lower_bound;
      constexpr int kPairs = 4;
      const std::int64_t n_samples =
          std::max<std::int64_t>(100, budget / (2 * kPairs));
      std::int64_t window_count = 1;
      for (int j = 0; j < h; ++j)
        window_count *= spec.pattern_count() * spec.range_size();
      double best = 0.0, best_se = 0.0;
      for (int pair = 0; pair < kPairs; ++pair) {
        const int k = 1 + pair % k_max;
        const auto a0 = coupling::sample_history(
            law, spec, k,
            rng::hash_words({seed, 0x70686130ULL,
                             static_cast<std::uint64_t>(pair)}));
        const auto a1 = coupling::sample_history(
            law, spec, k,
            rng::hash_words({seed, 0x70686131ULL,
                             static_cast<std::uint64_t>(pair)}));
        std::vector<double> p(window_count, 0.0), q(window_count, 0.0);
        for (std::int64_t i = 0; i < n_samples; ++i) {
          const std::uint64_t base = rng::hash_words(
              {seed, 0x70686832ULL, static_cast<std::uint64_t>(pair),
               static_cast<std::uint64_t>(i)});
          p[sample_window_id(law, spec, a0, t, h,
                             rng::hash_words({base, 0}))] += 1.0;
          q[sample_window_id(law, spec, a1, t, h,
                             rng::hash_words({base, 1}))] += 1.0;
        }
        double tv = 0.0, var = 0.0;
        for (std::int64_t w = 0; w < window_count; ++w) {
          const double pw = p[w] / n_samples, qw = q[w] / n_samples;
          tv += std::abs(pw - qw);
          var += pw * (1.0 - pw) + qw * (1.0 - qw);
        }
        tv *= 0.5;
        const double se = 0.5 * std::sqrt(var / n_samples);
        if (tv > best) {
          best = tv;
          best_se = se;
        }
      }
      est.value = best;
      est.stderr_value = best_se;
      est.families = std::to_string(kPairs) + " sampled history pairs, " +
                     std::to_string(n_samples) +
                     " conditioned trajectories each, window depth " +
                     std::to_string(h);
      return est;
    }
  }
  throw std::logic_error("estimate_phi_hat: unknown law kind");
}

MdReport verify_md_bound(const env::EnvironmentLaw& law, const ModelSpec& spec,
                         const coupling::CoinParams& coin,
                         std::span<const std::int64_t> t_grid, int k_max,
                         int h, std::int64_t budget, std::uint64_t seed) {
  // Sound pairing: phi_hat from below (exact or MC lower bound), phi_tilde
  // from above (exact or analytic).
  auto phi_tilde_upper = [&](std::int64_t l) -> double {
    switch (law.kind) {
      case env::LawKind::iid_field:
        return 0.0;
      case env::LawKind::torus_markov:
        return estimate_phi_tilde(law, spec, l, k_max, h, budget, seed).value;
      case env::LawKind::independent_site_chain:
        return analytic_phi_tilde_bound(law, spec, l).value;
    }
    return 1.0;
  };

  MdReport report;
  report.ok = true;
  for (std::int64_t t : t_grid) {
    const auto est = estimate_phi_hat(
        law, spec, t, k_max, h, budget,
        rng::hash_words({seed, 0x6d64ULL, static_cast<std::uint64_t>(t)}));
    MdPoint point;
    point.t = t;
    point.phi_hat = est.value;
    point.phi_hat_stderr = est.stderr_value.value_or(0.0);
    point.bound = coupling::md_bound(static_cast<double>(t), coin.c0, coin.c1,
                                     phi_tilde_upper);
    point.margin = point.bound - point.phi_hat;
    if (point.phi_hat > point.bound + 3.0 * point.phi_hat_stderr)
      report.ok = false;
    report.points.push_back(point);
  }
  return report;
}

CesaroEstimate cesaro_nu(const env::EnvironmentLaw& law, const ModelSpec& spec,
                         int window_len, std::int64_t k, std::int64_t n_runs,
                         std::uint64_t seed, int threads) {
  if (window_len < 1 || k < 1 || n_runs < 1)
    throw std::invalid_argument("cesaro_nu: window_len, k, n_runs >= 1");
  CesaroEstimate est;
  est.window_len = window_len;
  std::int64_t window_count = 1;
  for (int j = 0; j < window_len; ++j) window_count *= spec.range_size();
  est.window_counts.assign(window_count, 0);
  est.samples = n_runs * k;

  const auto batch =
      walk::run_batch(law, spec, n_runs, k + window_len, seed, threads);

  // Burn-in lengths i = 1..k: the window starts at step i; its first jump is
  // the P_{-i} sample whose Cesaro average has mean v.
  std::vector<double> mean(spec.d, 0.0), sq(spec.d, 0.0);
  for (const auto& traj : batch) {
    std::vector<double> run_mean(spec.d, 0.0);
    for (std::int64_t i = 1; i <= k; ++i) {
      std::int64_t id = 0;
      for (int j = 0; j < window_len; ++j) {
        const int col = spec.range_column(traj.lep[i + j].jump);
        id = id * spec.range_size() + col;
      }
      ++est.window_counts[id];
      for (int dim = 0; dim < spec.d; ++dim)
        run_mean[dim] += traj.lep[i].jump[dim];
    }
    for (int dim = 0; dim < spec.d; ++dim) {
      run_mean[dim] /= static_cast<double>(k);
      mean[dim] += run_mean[dim];
      sq[dim] += run_mean[dim] * run_mean[dim];
    }
  }
  est.mean_jump.resize(spec.d);
  est.mean_se.resize(spec.d);
  for (int dim = 0; dim < spec.d; ++dim) {
    est.mean_jump[dim] = mean[dim] / n_runs;
    const double var =
        (sq[dim] - n_runs * est.mean_jump[dim] * est.mean_jump[dim]) /
        std::max<std::int64_t>(1, n_runs - 1);
    est.mean_se[dim] = std::sqrt(std::max(0.0, var) / n_runs);
  }
  return est;
}

std::vector<double> exact_lep_law(const oracle::JointChain& chain) {
  const auto& spec = chain.model->spec();
  std::vector<double> law(spec.pattern_count() * spec.range_size(), 0.0);
  for (int st = 0; st < chain.n_states(); ++st) {
    const auto pat = chain.model->pattern_of_state(st);
    for (int col = 0; col < spec.range_size(); ++col)
      law[(pat - 1) * spec.range_size() + col] +=
          chain.stationary[st] * spec.kernel.prob(static_cast<int>(pat), col);
  }
  return law;
}

}  // namespace rwdre::mixing
