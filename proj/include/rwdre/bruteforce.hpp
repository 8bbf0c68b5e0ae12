#ifndef RWDRE_BRUTEFORCE_HPP_
#define RWDRE_BRUTEFORCE_HPP_

#include <cstdint>
#include <vector>

#include "rwdre/env.hpp"
#include "rwdre/model.hpp"

namespace rwdre::bruteforce {

// Exhaustive-enumeration counterparts of the exact torus computations. Every
// quantity here is a plain sum over configuration paths (and jump sequences
// where the walk is involved), with no filtering, recursion over posteriors,
// or chain algebra. Costs are exponential in the enumerated horizon; callers
// keep k + t + h small.

// Posterior over configurations at time 0 given the observation event.
std::vector<double> posterior(const env::TorusModel& model,
                              const ObservationEvent& event);

// Conditional law of the LEP window (xi_t, ..., xi_{t+h-1}). Indexing matches
// oracle::lep_window_law: (pattern-1)*|R| + jump column per step, first step
// most significant.
std::vector<double> lep_window_law(const env::TorusModel& model,
                                   const ObservationEvent& event,
                                   std::int64_t t, int h);

double phi_hat(const env::TorusModel& model, const ObservationEvent& a0,
               const ObservationEvent& a1, std::int64_t t, int h);

// Conditional law of the configuration path (c_t, ..., c_{t+h-1}); event may
// be null for the unconditional law. Indexing matches oracle::env_window_law.
std::vector<double> env_window_law(const env::TorusModel& model,
                                   const ObservationEvent* event,
                                   std::int64_t t, int h);

// TV between conditional and unconditional configuration-path laws. Compares
// whole configurations, so it matches the cone quantity whenever the cone
// section at time t already wraps the torus.
double phi_tilde(const env::TorusModel& model, const ObservationEvent& event,
                 std::int64_t t, int h);

// Law of the jump sequence (z_0, ..., z_{T-1}) given the event, indexed in
// mixed radix over range columns, first step most significant.
std::vector<double> jump_sequence_law(const env::TorusModel& model,
                                      const ObservationEvent& event, int T);

}  // namespace rwdre::bruteforce

#endif  // RWDRE_BRUTEFORCE_HPP_
