#include "rwdre/model.hpp"

#include <cmath>
#include <unordered_set>

#include <json.hpp>

namespace rwdre {

namespace {

constexpr double kRowSumTol = 1e-12;

void check_no_duplicates(const std::vector<Vec>& pts, const char* what) {
  std::unordered_set<Vec, VecHash> seen;
  for (const auto& p : pts) {
    if (!seen.insert(p).second)
      throw std::invalid_argument(std::string(what) + " contains duplicates");
  }
}

}  // namespace

std::int64_t ModelSpec::pattern_count() const {
  std::int64_t k = 1;
  for (std::size_t i = 0; i < delta.size(); ++i) {
    k *= alphabet_size;
    if (k > (1LL << 40)) throw std::invalid_argument("pattern count overflow");
  }
  return k;
}

int ModelSpec::range_column(const Vec& z) const {
  for (std::size_t i = 0; i < range.size(); ++i)
    if (range[i] == z) return static_cast<int>(i);
  return -1;
}

void ModelSpec::validate() const {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("d out of range");
  if (alphabet_size < 1) throw std::invalid_argument("alphabet_size < 1");
  if (range.empty()) throw std::invalid_argument("range is empty");
  check_no_duplicates(delta, "delta");
  check_no_duplicates(range, "range");
  for (const auto& p : delta)
    for (int i = d; i < kMaxDim; ++i)
      if (p[i] != 0) throw std::invalid_argument("delta point exceeds dimension d");
  for (const auto& p : range)
    for (int i = d; i < kMaxDim; ++i)
      if (p[i] != 0) throw std::invalid_argument("range point exceeds dimension d");

  const std::int64_t K = pattern_count();
  if (kernel.pattern_count() != K)
    throw std::invalid_argument("kernel row count != |E|^|Delta|");
  for (const auto& row : kernel.rows) {
    if (row.size() != range.size())
      throw std::invalid_argument("kernel row width != |range|");
    double sum = 0.0;
    for (double p : row) {
      if (p < 0.0) throw std::invalid_argument("negative kernel entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTol)
      throw std::invalid_argument("kernel row does not sum to 1");
  }
  // The stored range must be exactly the support of the kernel.
  for (std::size_t col = 0; col < range.size(); ++col) {
    bool used = false;
    for (const auto& row : kernel.rows)
      if (row[col] > 0.0) { used = true; break; }
    if (!used)
      throw std::invalid_argument("range point with zero mass in every row");
  }
}

std::string model_to_json(const ModelSpec& spec) {
  nlohmann::json j;
  j["d"] = spec.d;
  j["alphabet_size"] = spec.alphabet_size;
  auto points = [&](const std::vector<Vec>& pts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : pts) {
      nlohmann::json q = nlohmann::json::array();
      for (int i = 0; i < spec.d; ++i) q.push_back(p[i]);
      arr.push_back(q);
    }
    return arr;
  };
  j["delta"] = points(spec.delta);
  j["range"] = points(spec.range);
  j["kernel"] = spec.kernel.rows;
  return j.dump(2);
}

ModelSpec model_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ModelSpec spec;
  spec.d = j.at("d").get<int>();
  spec.alphabet_size = j.at("alphabet_size").get<int>();
  auto points = [&](const nlohmann::json& arr) {
    std::vector<Vec> pts;
    for (const auto& q : arr) {
      std::vector<std::int32_t> xs = q.get<std::vector<std::int32_t>>();
      if (static_cast<int>(xs.size()) != spec.d)
        throw std::invalid_argument("lattice point has wrong dimension");
      pts.push_back(Vec::from(xs));
    }
    return pts;
  };
  spec.delta = points(j.at("delta"));
  spec.range = points(j.at("range"));
  spec.kernel.rows = j.at("kernel").get<std::vector<std::vector<double>>>();
  spec.validate();
  return spec;
}

std::vector<Vec> reachable_set(const ModelSpec& spec, std::int64_t t) {
  if (t < 0) throw std::invalid_argument("reachable_set: t < 0");
  std::set<Vec> cur = {Vec{}};
  for (std::int64_t s = 0; s < t; ++s) {
    std::set<Vec> next;
    for (const auto& x : cur)
      for (const auto& z : spec.range) next.insert(x + z);
    cur.swap(next);
  }
  return {cur.begin(), cur.end()};
}

bool in_cone(const ModelSpec& spec, const Cell& cell, std::int64_t l) {
  if (cell.t < l || cell.t < 0) return false;
  for (const auto& r : reachable_set(spec, cell.t))
    for (const auto& dlt : spec.delta)
      if (r + dlt == cell.x) return true;
  return false;
}

void ConeChecker::extend(std::int64_t t) {
  while (static_cast<std::int64_t>(dilated_.size()) <= t) {
    std::int64_t s = static_cast<std::int64_t>(dilated_.size());
    std::set<Vec> layer;
    if (s == 0) {
      for (const auto& dlt : spec_->delta) layer.insert(dlt);
    } else {
      // (R_s + Delta) = (R_{s-1} + Delta) + R
      for (const auto& x : dilated_[s - 1])
        for (const auto& z : spec_->range) layer.insert(x + z);
    }
    dilated_.push_back(std::move(layer));
  }
}

bool ConeChecker::contains(const Cell& cell, std::int64_t l) {
  if (cell.t < l || cell.t < 0) return false;
  extend(cell.t);
  return dilated_[cell.t].count(cell.x) > 0;
}

BackwardPath::BackwardPath(std::vector<Vec> s, const ModelSpec& spec)
    : sites(std::move(s)) {
  if (sites.empty()) throw std::invalid_argument("BackwardPath: empty");
  if (!(sites.back() == Vec{}))
    throw std::invalid_argument("BackwardPath: gamma_0 != origin");
  for (std::size_t i = 1; i < sites.size(); ++i) {
    if (spec.range_column(sites[i] - sites[i - 1]) < 0)
      throw std::invalid_argument("BackwardPath: increment not in range");
  }
}

ObservationEvent::ObservationEvent(BackwardPath p, std::vector<std::int64_t> sigma,
                                   const ModelSpec& spec)
    : path(std::move(p)), patterns(std::move(sigma)) {
  if (static_cast<int>(patterns.size()) != path.length())
    throw std::invalid_argument("ObservationEvent: |patterns| != |path| - 1");
  const std::int64_t K = spec.pattern_count();
  for (auto s : patterns)
    if (s < 1 || s > K)
      throw std::invalid_argument("ObservationEvent: pattern index out of range");
}

}  // namespace rwdre
