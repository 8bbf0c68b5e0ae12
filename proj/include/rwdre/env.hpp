#ifndef RWDRE_ENV_HPP_
#define RWDRE_ENV_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "rwdre/lattice.hpp"
#include "rwdre/model.hpp"
#include "rwdre/rng.hpp"

namespace rwdre::env {

enum class LawKind { iid_field, independent_site_chain, torus_markov };

// Translation-invariant environment laws. The three kinds are a closed
// enumeration: each one carries the exactness obligations the estimators
// rely on (product structure, per-site chains started at stationarity, or a
// finite torus chain with enumerable states).
struct EnvironmentLaw {
  LawKind kind = LawKind::iid_field;
  int alphabet_size = 2;
  std::vector<double> p;                   // iid_field: symbol distribution
  std::vector<std::vector<double>> site_q; // site chain / torus: per-site transition
  int torus_side = 0;                      // torus_markov: L
  int dim = 1;                             // torus_markov: lattice dimension

  // Stationary vector of site_q (power iteration, 1e-14 residual).
  std::vector<double> site_stationary() const;
  void validate() const;
};

std::string law_to_json(const EnvironmentLaw& law);
EnvironmentLaw law_from_json(const std::string& text);

// Lazily materialized realization of the space-time field. Reads are
// deterministic in (law, seed, time_floor, cell) and independent of read
// order. Markov-in-time kinds start at stationarity at time_floor.
class EnvRealization {
 public:
  EnvRealization(EnvironmentLaw law, std::uint64_t seed,
                 std::int64_t time_floor = 0);

  int read_cell(const Cell& cell);
  const EnvironmentLaw& law() const { return law_; }
  std::int64_t time_floor() const { return time_floor_; }

  // Instrumentation hook for reading-discipline tests.
  std::function<void(const Cell&)> on_read;

 private:
  EnvironmentLaw law_;
  std::uint64_t seed_;
  std::int64_t time_floor_;
  std::vector<double> stat_;  // site stationary (markov kinds)
  // independent_site_chain: per-site symbol paths from time_floor
  std::unordered_map<Vec, std::vector<std::uint8_t>, VecHash> site_paths_;
  // torus_markov: full config paths from time_floor
  std::vector<std::vector<std::uint8_t>> torus_configs_;
  rng::Stream torus_stream_;

  int site_index(const Vec& x) const;
};

// Joint sample of a finite window, consistent with read_cell on the same
// seed (the realization started at the window's earliest time).
std::map<Cell, int> sample_window(const EnvironmentLaw& law,
                                  const std::vector<Cell>& region,
                                  std::uint64_t seed);

// ---------------------------------------------------------------------------
// Torus machinery: enumerable configuration space E^{L^d} with independent
// per-site updates. Backbone of all exact computations.

class TorusModel {
 public:
  TorusModel(EnvironmentLaw law, ModelSpec spec, int state_cap = 4096);

  const EnvironmentLaw& law() const { return law_; }
  const ModelSpec& spec() const { return spec_; }
  int n_sites() const { return n_sites_; }
  int n_states() const { return n_states_; }
  int state_site(int state, int site) const;
  int state_of_sites(const std::vector<int>& symbols) const;
  // 1-based pattern id observed by a walker at `pos` in configuration `state`.
  std::int64_t pattern_at(int state, const Vec& pos) const;
  std::int64_t pattern_of_state(int state) const { return pattern_[state]; }

  const std::vector<double>& stationary() const { return stationary_; }

  // One step of the environment kernel applied to a distribution over
  // configurations (per-site tensor sweeps; no dense matrix).
  void advance_env(std::vector<double>& w) const;
  // Distribution of configurations as seen after the walker jumps by z.
  void recenter(std::vector<double>& w, const Vec& z) const;
  // Deterministic shift of a single configuration.
  int shift_state(int state, const Vec& z) const;
  // One env-kernel step of a single configuration, noise from `stream`.
  int step_state(int state, rng::Stream& stream) const;

 private:
  EnvironmentLaw law_;
  ModelSpec spec_;
  int n_sites_ = 0;
  int n_states_ = 0;
  std::vector<int> site_radix_;             // powers of |E| per site
  std::vector<std::int64_t> pattern_;       // pattern at origin per state
  std::vector<double> stationary_;
  std::unordered_map<Vec, std::vector<int>, VecHash> shift_perm_;
  std::vector<int> delta_sites_;            // torus site of each Delta point

  int torus_site(const Vec& x) const;
  const std::vector<int>& shift_permutation(const Vec& z) const;
  friend class TorusFilter;
};

// Bayes filter over torus configurations, in the walker frame.
class TorusFilter {
 public:
  explicit TorusFilter(std::shared_ptr<const TorusModel> model);

  const std::vector<double>& weights() const { return w_; }
  void set_weights(std::vector<double> w);

  // Keep only configurations whose Delta-pattern equals sigma; renormalize.
  // Throws std::runtime_error on a zero-probability observation.
  void observe_pattern(std::int64_t sigma);
  // Reweight by alpha(pattern(state), z): reconstruction step for unobserved
  // ("?") patterns whose jump was taken with the true kernel.
  void reweight_by_jump(const Vec& z);
  void advance();                // environment kernel step
  void recenter(const Vec& z);   // walker jumps by z
  // Law of the next observed pattern, indexed 1..K.
  std::vector<double> observation_law() const;
  double total_mass() const;

  const TorusModel& model() const { return *model_; }
  std::shared_ptr<const TorusModel> model_ptr() const { return model_; }

 private:
  std::shared_ptr<const TorusModel> model_;
  std::vector<double> w_;
  std::vector<double> scratch_;
};

// Filtered posterior for laws that admit exact conditionals. For iid_field
// the posterior is trivial; for torus_markov it is a TorusFilter.
class ExactConditional {
 public:
  // iid_field capability
  ExactConditional(EnvironmentLaw law, ModelSpec spec);
  // torus capability
  explicit ExactConditional(std::shared_ptr<const TorusModel> model);

  ExactConditional(const ExactConditional& other);
  ExactConditional& operator=(const ExactConditional& other);
  ExactConditional(ExactConditional&&) = default;
  ExactConditional& operator=(ExactConditional&&) = default;

  bool trivial() const { return filter_ == nullptr; }
  // Bayes update: condition on the observed pattern, advance one step,
  // re-center by the walker displacement.
  void update(std::int64_t observed_pattern, const Vec& displacement);
  // Exact law of the next observed pattern given the history, 1..K.
  std::vector<double> observation_law() const;
  TorusFilter* filter() { return filter_.get(); }
  const TorusFilter* filter() const { return filter_.get(); }

 private:
  EnvironmentLaw law_;
  ModelSpec spec_;
  std::unique_ptr<TorusFilter> filter_;
  std::vector<double> iid_pattern_law_;
};

// Posterior over configurations at time 0 given an observation event along
// a backward path, computed by filtering from stationarity. Throws on a
// zero-probability history.
std::vector<double> posterior_after_history(const TorusModel& model,
                                            const ObservationEvent& event);

}  // namespace rwdre::env

#endif  // RWDRE_ENV_HPP_
