#ifndef RWDRE_WALK_HPP_
#define RWDRE_WALK_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "rwdre/env.hpp"
#include "rwdre/lattice.hpp"
#include "rwdre/model.hpp"

namespace rwdre::walk {

// One step of the local environment process: observed pattern and jump.
struct LepEntry {
  std::int64_t pattern = 0;  // 1..K
  Vec jump;
};

struct Trajectory {
  std::vector<Vec> positions;  // X_0..X_T
  std::vector<LepEntry> lep;   // xi_0..xi_{T-1}
  std::uint64_t seed = 0;
};

// Inverse-CDF sampling over the ordered range: the first range element whose
// cumulative row-i probability strictly exceeds u.
Vec step(const ModelSpec& spec, std::int64_t pattern, double u);

// Quenched walk from the origin: at each t read the Delta-pattern at X_t,
// draw from the walk's own uniform stream, jump.
Trajectory run_quenched(env::EnvRealization& real, const ModelSpec& spec,
                        std::int64_t horizon, std::uint64_t seed);

struct EllipticityReport {
  double eps_b = 0.0;        // max_z min_i alpha(i, z)
  Vec argmax_z;              // lexicographically smallest maximizer
  double eps_bprime = 0.0;   // min_z min_i alpha(i, z)
  std::optional<double> eps_a;  // inf conditional pattern probability
};

// Exact maximin / minimin over the kernel. eps_a is an exhaustive minimum of
// conditional observation probabilities over histories up to history_depth,
// present only when an exact-conditional capability is supplied.
EllipticityReport ellipticity_report(const ModelSpec& spec,
                                     const env::ExactConditional* cap = nullptr,
                                     int history_depth = 3);

// Seed hierarchy: per-run seed and the independent env/walk/coin streams.
std::uint64_t run_seed(std::uint64_t master_seed, std::int64_t run_id);
std::uint64_t env_seed(std::uint64_t run_seed);
std::uint64_t walk_seed(std::uint64_t run_seed);
std::uint64_t coin_seed(std::uint64_t run_seed);

// Trajectory batch, one independent realization per run.
std::vector<Trajectory> run_batch(const env::EnvironmentLaw& law,
                                  const ModelSpec& spec, std::int64_t n_runs,
                                  std::int64_t horizon,
                                  std::uint64_t master_seed, int threads = 1);

// CSV: run_id,t,x_1..x_d,pattern_index,jump_1..jump_d with one row per step.
void write_trajectories_csv(std::ostream& os,
                            std::span<const Trajectory> batch,
                            const ModelSpec& spec);
std::vector<Trajectory> read_trajectories_csv(std::istream& is,
                                              const ModelSpec& spec);

}  // namespace rwdre::walk

#endif  // RWDRE_WALK_HPP_
