#ifndef RWDRE_ORACLE_HPP_
#define RWDRE_ORACLE_HPP_

#include <cstdint>
#include <memory>
#include <vector>

#include "rwdre/env.hpp"
#include "rwdre/model.hpp"

namespace rwdre::oracle {

// Finite Markov chain on torus configurations as seen from the walker.
// One step = observe the Delta-pattern, jump, advance the environment,
// re-center by the jump.
struct JointChain {
  std::shared_ptr<const env::TorusModel> model;
  std::vector<std::vector<double>> transition;
  std::vector<double> stationary;

  int n_states() const { return static_cast<int>(transition.size()); }
};

JointChain build_joint_chain(std::shared_ptr<const env::TorusModel> model,
                             int state_cap = 4096);

// One step of the environment-as-seen-from-the-walker chain applied to a
// distribution, without materializing the transition matrix.
void joint_advance(const env::TorusModel& model, std::vector<double>& w);

// v = sum_sigma pi(sigma) * E[jump | pattern(sigma)], exact.
std::vector<double> exact_speed(const JointChain& chain);

// Asymptotic variance of theta . X_n via the Poisson equation and the
// martingale decomposition. Throws on reducible or periodic chains.
double exact_asymptotic_variance(const JointChain& chain,
                                 const std::vector<double>& theta);

bool is_irreducible(const JointChain& chain);
bool is_aperiodic(const JointChain& chain);

// Law of the local-environment window (xi_t, ..., xi_{t+h-1}) given a
// posterior over configurations at time 0 in the walker frame. Window
// values are indexed step-by-step as (pattern-1)*|R| + jump column, most
// recent step least significant.
std::vector<double> lep_window_law(const env::TorusModel& model,
                                   std::vector<double> posterior,
                                   std::int64_t t, int h);

// Law of the configuration path (c_t, ..., c_{t+h-1}) given a posterior over
// configurations at time 0 (pure environment, no walk).
std::vector<double> env_window_law(const env::TorusModel& model,
                                   std::vector<double> posterior,
                                   std::int64_t t, int h);

double total_variation(const std::vector<double>& p,
                       const std::vector<double>& q);

// Exact TV distance between the laws of the length-h LEP window starting at
// t under the two conditionings.
double exact_phi_hat_torus(const env::TorusModel& model,
                           const ObservationEvent& a0,
                           const ObservationEvent& a1, std::int64_t t, int h);

// All positive-probability observation events with path depth in [1, k_max].
std::vector<ObservationEvent> enumerate_histories(const env::TorusModel& model,
                                                  int k_max);

// sup over enumerated history pairs of the LEP window TV (phi_hat) and over
// single histories of the conditional-vs-unconditional cone window TV
// (phi_tilde), both exact.
double exact_phi_hat(const env::TorusModel& model, std::int64_t t, int k_max,
                     int h);
double exact_phi_tilde(const env::TorusModel& model, std::int64_t t, int k_max,
                       int h);

}  // namespace rwdre::oracle

#endif  // RWDRE_ORACLE_HPP_
