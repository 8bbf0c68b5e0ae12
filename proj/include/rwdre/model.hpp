#ifndef RWDRE_MODEL_HPP_
#define RWDRE_MODEL_HPP_

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "rwdre/lattice.hpp"

namespace rwdre {

// Jump distributions alpha(i, .), one row per local pattern, columns in the
// stored order of the model's range.
struct JumpKernel {
  std::vector<std::vector<double>> rows;

  int pattern_count() const { return static_cast<int>(rows.size()); }
  int range_size() const { return rows.empty() ? 0 : static_cast<int>(rows[0].size()); }
  // alpha(i, z) with 1-based pattern index i and 0-based range column.
  double prob(int i, int col) const { return rows[i - 1][col]; }
};

struct ModelSpec {
  int d = 1;
  int alphabet_size = 2;
  std::vector<Vec> delta;   // observation window, stored order fixes pattern enumeration
  std::vector<Vec> range;   // jump range, stored order fixes kernel columns
  JumpKernel kernel;

  int window_size() const { return static_cast<int>(delta.size()); }
  int range_size() const { return static_cast<int>(range.size()); }
  // K = |E|^|Delta|
  std::int64_t pattern_count() const;

  int range_column(const Vec& z) const;  // -1 if z not in range

  // Throws std::invalid_argument on any violated invariant.
  void validate() const;
};

// JSON serialization. The document layout is
//   {"d":, "alphabet_size":, "delta":[[..]], "range":[[..]], "kernel":[[..]]}
// with kernel row order following pattern_index.
std::string model_to_json(const ModelSpec& spec);
ModelSpec model_from_json(const std::string& text);

// Exact t-fold sumset of the range; t = 0 gives {origin}.
std::vector<Vec> reachable_set(const ModelSpec& spec, std::int64_t t);

// True iff t >= l and x lies in R_t + Delta.
bool in_cone(const ModelSpec& spec, const Cell& cell, std::int64_t l);

// Memoized cone membership for instrumented runs.
class ConeChecker {
 public:
  explicit ConeChecker(const ModelSpec& spec) : spec_(&spec) {}
  bool contains(const Cell& cell, std::int64_t l);

 private:
  const ModelSpec* spec_;
  std::vector<std::set<Vec>> dilated_;  // R_t + Delta per t
  void extend(std::int64_t t);
};

// Backward walk path (gamma_{-k}, ..., gamma_0) with gamma_0 = origin and
// increments in the model range.
struct BackwardPath {
  std::vector<Vec> sites;

  BackwardPath(std::vector<Vec> s, const ModelSpec& spec);
  int length() const { return static_cast<int>(sites.size()) - 1; }  // k
};

// Observation event A(gamma, sigma): pattern sigma_{-i} seen at (gamma_i, i).
struct ObservationEvent {
  BackwardPath path;
  std::vector<std::int64_t> patterns;  // sigma_1..sigma_k, 1-based pattern ids

  ObservationEvent(BackwardPath p, std::vector<std::int64_t> sigma,
                   const ModelSpec& spec);
  int depth() const { return static_cast<int>(patterns.size()); }
};

}  // namespace rwdre

#endif  // RWDRE_MODEL_HPP_
