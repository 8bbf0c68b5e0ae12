#include "rwdre/walk.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "rwdre/parallel.hpp"

namespace rwdre::walk {

Vec step(const ModelSpec& spec, std::int64_t pattern, double u) {
  if (pattern < 1 || pattern > spec.pattern_count())
    throw std::invalid_argument("step: pattern index out of range");
  const auto& row = spec.kernel.rows[pattern - 1];
  double cum = 0.0;
  for (std::size_t col = 0; col + 1 < row.size(); ++col) {
    cum += row[col];
    if (u < cum) return spec.range[col];
  }
  return spec.range.back();
}

Trajectory run_quenched(env::EnvRealization& real, const ModelSpec& spec,
                        std::int64_t horizon, std::uint64_t seed) {
  Trajectory traj;
  traj.seed = seed;
  traj.positions.reserve(horizon + 1);
  traj.lep.reserve(horizon);
  Vec pos;
  traj.positions.push_back(pos);

  const std::uint64_t key = rng::hash_words({seed, 0x77616c6bULL});
  constexpr std::int64_t kBlock = 512;
  std::vector<double> uniforms(std::min(horizon, kBlock));
  std::vector<int> digits(spec.delta.size());

  for (std::int64_t t = 0; t < horizon; ++t) {
    const std::int64_t slot = t % kBlock;
    if (slot == 0) {
      std::size_t n = static_cast<std::size_t>(std::min(kBlock, horizon - t));
      uniforms.resize(n);
      rng::fill_unit(key, static_cast<std::uint64_t>(t), uniforms);
    }
    for (std::size_t j = 0; j < spec.delta.size(); ++j)
      digits[j] = real.read_cell(Cell{pos + spec.delta[j], t});
    const std::int64_t pat = pattern_index(digits, spec.alphabet_size);
    const Vec z = step(spec, pat, uniforms[slot]);
    traj.lep.push_back(LepEntry{pat, z});
    pos = pos + z;
    traj.positions.push_back(pos);
  }
  return traj;
}

namespace {

// Depth-first minimization of conditional pattern probabilities over all
// positive-probability observation histories.
void min_conditional(const ModelSpec& spec, const env::ExactConditional& cap,
                     int depth, double& best) {
  const auto law = cap.observation_law();
  for (double v : law) best = std::min(best, v);
  if (depth == 0) return;
  for (std::int64_t i = 1; i <= spec.pattern_count(); ++i) {
    if (law[i - 1] <= 0.0) continue;
    for (std::size_t col = 0; col < spec.range.size(); ++col) {
      if (spec.kernel.prob(static_cast<int>(i), static_cast<int>(col)) <= 0.0)
        continue;
      env::ExactConditional child = cap;
      child.update(i, spec.range[col]);
      min_conditional(spec, child, depth - 1, best);
    }
  }
}

}  // namespace

EllipticityReport ellipticity_report(const ModelSpec& spec,
                                     const env::ExactConditional* cap,
                                     int history_depth) {
  EllipticityReport report;
  report.eps_bprime = 1.0;
  report.eps_b = -1.0;
  // Columns scanned in lexicographic z order so ties break to the smallest z.
  std::vector<std::size_t> order(spec.range.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return spec.range[a] < spec.range[b];
  });
  for (std::size_t col : order) {
    double col_min = 1.0;
    for (const auto& row : spec.kernel.rows) col_min = std::min(col_min, row[col]);
    report.eps_bprime = std::min(report.eps_bprime, col_min);
    if (col_min > report.eps_b) {
      report.eps_b = col_min;
      report.argmax_z = spec.range[col];
    }
  }
  if (cap) {
    double best = 1.0;
    min_conditional(spec, *cap, history_depth, best);
    report.eps_a = best;
  }
  return report;
}

std::uint64_t run_seed(std::uint64_t master_seed, std::int64_t run_id) {
  return rng::hash_words({master_seed, 0x72756eULL,
                          static_cast<std::uint64_t>(run_id)});
}
std::uint64_t env_seed(std::uint64_t run_seed) {
  return rng::hash_words({run_seed, 0x656e76ULL});
}
std::uint64_t walk_seed(std::uint64_t run_seed) {
  return rng::hash_words({run_seed, 0x776bULL});
}
std::uint64_t coin_seed(std::uint64_t run_seed) {
  return rng::hash_words({run_seed, 0x636f696eULL});
}

std::vector<Trajectory> run_batch(const env::EnvironmentLaw& law,
                                  const ModelSpec& spec, std::int64_t n_runs,
                                  std::int64_t horizon,
                                  std::uint64_t master_seed, int threads) {
  std::vector<Trajectory> out(n_runs);
  parallel_for(n_runs, threads, [&](std::int64_t run) {
    const std::uint64_t rs = run_seed(master_seed, run);
    env::EnvRealization real(law, env_seed(rs));
    out[run] = run_quenched(real, spec, horizon, walk_seed(rs));
  });
  return out;
}

void write_trajectories_csv(std::ostream& os,
                            std::span<const Trajectory> batch,
                            const ModelSpec& spec) {
  os << "run_id,t";
  for (int i = 1; i <= spec.d; ++i) os << ",x_" << i;
  os << ",pattern_index";
  for (int i = 1; i <= spec.d; ++i) os << ",jump_" << i;
  os << "\n";
  for (std::size_t run = 0; run < batch.size(); ++run) {
    const auto& traj = batch[run];
    for (std::size_t t = 0; t < traj.lep.size(); ++t) {
      os << run << ',' << t;
      for (int i = 0; i < spec.d; ++i) os << ',' << traj.positions[t][i];
      os << ',' << traj.lep[t].pattern;
      for (int i = 0; i < spec.d; ++i) os << ',' << traj.lep[t].jump[i];
      os << '\n';
    }
  }
}

std::vector<Trajectory> read_trajectories_csv(std::istream& is,
                                              const ModelSpec& spec) {
  std::vector<Trajectory> batch;
  std::string line;
  if (!std::getline(is, line))
    throw std::invalid_argument("trajectory CSV: missing header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    auto next_int = [&]() -> std::int64_t {
      if (!std::getline(ss, field, ','))
        throw std::invalid_argument("trajectory CSV: short row");
      return std::stoll(field);
    };
    const std::size_t run = static_cast<std::size_t>(next_int());
    const std::int64_t t = next_int();
    Vec pos;
    for (int i = 0; i < spec.d; ++i) pos[i] = static_cast<std::int32_t>(next_int());
    LepEntry lep;
    lep.pattern = next_int();
    for (int i = 0; i < spec.d; ++i)
      lep.jump[i] = static_cast<std::int32_t>(next_int());
    if (run >= batch.size()) batch.resize(run + 1);
    auto& traj = batch[run];
    if (t == 0) traj.positions.assign(1, pos);
    if (static_cast<std::int64_t>(traj.lep.size()) != t)
      throw std::invalid_argument("trajectory CSV: rows out of order");
    traj.lep.push_back(lep);
    traj.positions.push_back(pos + lep.jump);
  }
  return batch;
}

}  // namespace rwdre::walk
