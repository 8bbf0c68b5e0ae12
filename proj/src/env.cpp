#include "rwdre/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace rwdre::env {

namespace {

constexpr double kProbTol = 1e-12;

void check_stochastic_rows(const std::vector<std::vector<double>>& q, int n) {
  if (static_cast<int>(q.size()) != n)
    throw std::invalid_argument("site transition matrix has wrong size");
  for (const auto& row : q) {
    if (static_cast<int>(row.size()) != n)
      throw std::invalid_argument("site transition matrix is not square");
    double sum = 0.0;
    for (double v : row) {
      if (v < 0.0) throw std::invalid_argument("negative transition probability");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kProbTol)
      throw std::invalid_argument("transition row does not sum to 1");
  }
}

}  // namespace

std::vector<double> EnvironmentLaw::site_stationary() const {
  const int n = alphabet_size;
  std::vector<double> pi(n, 1.0 / n), next(n);
  for (int iter = 0; iter < 200000; ++iter) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += pi[i] * site_q[i][j];
      next[j] = s;
    }
    // average two consecutive iterates to tame periodic chains
    double diff = 0.0;
    for (int j = 0; j < n; ++j) {
      double avg = 0.5 * (pi[j] + next[j]);
      diff += std::abs(avg - pi[j]);
      pi[j] = avg;
    }
    if (diff < 1e-15) break;
  }
  return pi;
}

void EnvironmentLaw::validate() const {
  if (alphabet_size < 1) throw std::invalid_argument("alphabet_size < 1");
  switch (kind) {
    case LawKind::iid_field: {
      if (static_cast<int>(p.size()) != alphabet_size)
        throw std::invalid_argument("iid_field: |p| != alphabet_size");
      double sum = 0.0;
      for (double v : p) {
        if (v < 0.0) throw std::invalid_argument("iid_field: negative probability");
        sum += v;
      }
      if (std::abs(sum - 1.0) > kProbTol)
        throw std::invalid_argument("iid_field: p does not sum to 1");
      break;
    }
    case LawKind::independent_site_chain:
      check_stochastic_rows(site_q, alphabet_size);
      break;
    case LawKind::torus_markov:
      check_stochastic_rows(site_q, alphabet_size);
      if (torus_side < 1) throw std::invalid_argument("torus_markov: L < 1");
      if (dim < 1 || dim > kMaxDim)
        throw std::invalid_argument("torus_markov: dimension out of range");
      break;
  }
}

std::string law_to_json(const EnvironmentLaw& law) {
  nlohmann::json j;
  switch (law.kind) {
    case LawKind::iid_field:
      j["kind"] = "iid_field";
      j["p"] = law.p;
      break;
    case LawKind::independent_site_chain:
      j["kind"] = "independent_site_chain";
      j["Q"] = law.site_q;
      break;
    case LawKind::torus_markov:
      j["kind"] = "torus_markov";
      j["Q"] = law.site_q;
      j["L"] = law.torus_side;
      j["d"] = law.dim;
      break;
  }
  j["alphabet_size"] = law.alphabet_size;
  return j.dump(2);
}

EnvironmentLaw law_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  EnvironmentLaw law;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "iid_field") {
    law.kind = LawKind::iid_field;
    law.p = j.at("p").get<std::vector<double>>();
    law.alphabet_size = static_cast<int>(law.p.size());
  } else if (kind == "independent_site_chain") {
    law.kind = LawKind::independent_site_chain;
    law.site_q = j.at("Q").get<std::vector<std::vector<double>>>();
    law.alphabet_size = static_cast<int>(law.site_q.size());
  } else if (kind == "torus_markov") {
    law.kind = LawKind::torus_markov;
    law.site_q = j.at("Q").get<std::vector<std::vector<double>>>();
    law.alphabet_size = static_cast<int>(law.site_q.size());
    law.torus_side = j.at("L").get<int>();
    law.dim = j.value("d", 1);
  } else {
    throw std::invalid_argument("unknown environment kind: " + kind);
  }
  if (j.contains("alphabet_size") &&
      j.at("alphabet_size").get<int>() != law.alphabet_size)
    throw std::invalid_argument("alphabet_size inconsistent with parameters");
  law.validate();
  return law;
}

// ---------------------------------------------------------------------------
// EnvRealization

EnvRealization::EnvRealization(EnvironmentLaw law, std::uint64_t seed,
                               std::int64_t time_floor)
    : law_(std::move(law)), seed_(seed), time_floor_(time_floor) {
  law_.validate();
  if (law_.kind != LawKind::iid_field) stat_ = law_.site_stationary();
  if (law_.kind == LawKind::torus_markov)
    torus_stream_ = rng::Stream{rng::hash_words({seed_, 0x746f7275ULL})};
}

int EnvRealization::site_index(const Vec& x) const {
  const int L = law_.torus_side;
  std::int64_t idx = 0, stride = 1;
  for (int i = 0; i < law_.dim; ++i) {
    int m = ((x[i] % L) + L) % L;
    idx += m * stride;
    stride *= L;
  }
  return static_cast<int>(idx);
}

int EnvRealization::read_cell(const Cell& cell) {
  if (on_read) on_read(cell);
  switch (law_.kind) {
    case LawKind::iid_field: {
      std::uint64_t h = rng::hash_words(
          {seed_, 0x63656c6cULL, static_cast<std::uint64_t>(cell.x[0]),
           static_cast<std::uint64_t>(cell.x[1]),
           static_cast<std::uint64_t>(cell.x[2]),
           static_cast<std::uint64_t>(cell.x[3]),
           static_cast<std::uint64_t>(cell.t)});
      double u = rng::to_unit(h);
      double cum = 0.0;
      for (std::size_t i = 0; i + 1 < law_.p.size(); ++i) {
        cum += law_.p[i];
        if (u < cum) return static_cast<int>(i);
      }
      return law_.alphabet_size - 1;
    }
    case LawKind::independent_site_chain: {
      if (cell.t < time_floor_)
        throw std::out_of_range("read_cell: time before time_floor");
      auto [it, inserted] = site_paths_.try_emplace(cell.x);
      auto& path = it->second;
      if (inserted) path.reserve(64);
      rng::Stream stream{rng::hash_words(
          {seed_, 0x73697465ULL, static_cast<std::uint64_t>(cell.x[0]),
           static_cast<std::uint64_t>(cell.x[1]),
           static_cast<std::uint64_t>(cell.x[2]),
           static_cast<std::uint64_t>(cell.x[3])})};
      stream.counter = path.size();  // resume the per-site stream
      const std::size_t need = static_cast<std::size_t>(cell.t - time_floor_) + 1;
      while (path.size() < need) {
        int sym;
        if (path.empty()) {
          sym = stream.next_index(stat_);
        } else {
          sym = stream.next_index(law_.site_q[path.back()]);
        }
        path.push_back(static_cast<std::uint8_t>(sym));
      }
      return path[need - 1];
    }
    case LawKind::torus_markov: {
      if (cell.t < time_floor_)
        throw std::out_of_range("read_cell: time before time_floor");
      const int L = law_.torus_side;
      std::int64_t n_sites = 1;
      for (int i = 0; i < law_.dim; ++i) n_sites *= L;
      const std::size_t need = static_cast<std::size_t>(cell.t - time_floor_) + 1;
      while (torus_configs_.size() < need) {
        std::vector<std::uint8_t> cfg(n_sites);
        if (torus_configs_.empty()) {
          for (auto& s : cfg) s = static_cast<std::uint8_t>(torus_stream_.next_index(stat_));
        } else {
          const auto& prev = torus_configs_.back();
          for (std::int64_t i = 0; i < n_sites; ++i)
            cfg[i] = static_cast<std::uint8_t>(
                torus_stream_.next_index(law_.site_q[prev[i]]));
        }
        torus_configs_.push_back(std::move(cfg));
      }
      return torus_configs_[need - 1][site_index(cell.x)];
    }
  }
  throw std::logic_error("unreachable");
}

std::map<Cell, int> sample_window(const EnvironmentLaw& law,
                                  const std::vector<Cell>& region,
                                  std::uint64_t seed) {
  std::map<Cell, int> out;
  if (region.empty()) return out;
  std::int64_t floor = region.front().t;
  for (const auto& c : region) floor = std::min(floor, c.t);
  EnvRealization real(law, seed, floor);
  for (const auto& c : region) out[c] = real.read_cell(c);
  return out;
}

// ---------------------------------------------------------------------------
// TorusModel

TorusModel::TorusModel(EnvironmentLaw law, ModelSpec spec, int state_cap)
    : law_(std::move(law)), spec_(std::move(spec)) {
  law_.validate();
  spec_.validate();
  if (law_.kind != LawKind::torus_markov)
    throw std::invalid_argument("TorusModel requires a torus_markov law");
  if (law_.alphabet_size != spec_.alphabet_size)
    throw std::invalid_argument("law and model alphabets differ");
  if (law_.dim != spec_.d)
    throw std::invalid_argument("law and model dimensions differ");

  const int L = law_.torus_side;
  n_sites_ = 1;
  for (int i = 0; i < spec_.d; ++i) n_sites_ *= L;
  double states = std::pow(static_cast<double>(law_.alphabet_size), n_sites_);
  if (states > static_cast<double>(state_cap))
    throw std::invalid_argument("torus state space exceeds cap");
  n_states_ = static_cast<int>(std::lround(states));

  site_radix_.resize(n_sites_);
  int r = 1;
  for (int s = 0; s < n_sites_; ++s) {
    site_radix_[s] = r;
    r *= law_.alphabet_size;
  }

  // Delta must map to distinct torus sites or pattern reads degenerate.
  delta_sites_.reserve(spec_.delta.size());
  std::set<int> distinct;
  for (const auto& dlt : spec_.delta) {
    int s = torus_site(dlt);
    if (!distinct.insert(s).second)
      throw std::invalid_argument("torus too small: Delta wraps onto itself");
    delta_sites_.push_back(s);
  }

  pattern_.resize(n_states_);
  std::vector<int> digits(spec_.delta.size());
  for (int st = 0; st < n_states_; ++st) {
    for (std::size_t j = 0; j < delta_sites_.size(); ++j)
      digits[j] = state_site(st, delta_sites_[j]);
    pattern_[st] = pattern_index(digits, law_.alphabet_size);
  }

  std::vector<double> pi = law_.site_stationary();
  stationary_.resize(n_states_);
  for (int st = 0; st < n_states_; ++st) {
    double w = 1.0;
    for (int s = 0; s < n_sites_; ++s) w *= pi[state_site(st, s)];
    stationary_[st] = w;
  }
}

int TorusModel::torus_site(const Vec& x) const {
  const int L = law_.torus_side;
  int idx = 0, stride = 1;
  for (int i = 0; i < spec_.d; ++i) {
    int m = ((x[i] % L) + L) % L;
    idx += m * stride;
    stride *= L;
  }
  return idx;
}

int TorusModel::state_site(int state, int site) const {
  return (state / site_radix_[site]) % law_.alphabet_size;
}

int TorusModel::state_of_sites(const std::vector<int>& symbols) const {
  int st = 0;
  for (int s = 0; s < n_sites_; ++s) st += symbols[s] * site_radix_[s];
  return st;
}

std::int64_t TorusModel::pattern_at(int state, const Vec& pos) const {
  std::vector<int> digits(spec_.delta.size());
  for (std::size_t j = 0; j < spec_.delta.size(); ++j)
    digits[j] = state_site(state, torus_site(pos + spec_.delta[j]));
  return pattern_index(digits, law_.alphabet_size);
}

void TorusModel::advance_env(std::vector<double>& w) const {
  const int E = law_.alphabet_size;
  std::vector<double> vals(E);
  for (int s = 0; s < n_sites_; ++s) {
    const int stride = site_radix_[s];
    const int block = stride * E;
    for (int base = 0; base < n_states_; base += block) {
      for (int off = 0; off < stride; ++off) {
        for (int e = 0; e < E; ++e) vals[e] = w[base + off + e * stride];
        for (int e2 = 0; e2 < E; ++e2) {
          double acc = 0.0;
          for (int e = 0; e < E; ++e) acc += vals[e] * law_.site_q[e][e2];
          w[base + off + e2 * stride] = acc;
        }
      }
    }
  }
}

const std::vector<int>& TorusModel::shift_permutation(const Vec& z) const {
  auto it = shift_perm_.find(z);
  if (it != shift_perm_.end()) return it->second;
  std::vector<int> perm(n_states_);
  std::vector<int> symbols(n_sites_);
  // new config c'(y) = c(y + z)
  const int L = law_.torus_side;
  std::vector<int> site_map(n_sites_);
  for (int s = 0; s < n_sites_; ++s) {
    int rem = s;
    Vec y;
    for (int i = 0; i < spec_.d; ++i) {
      y[i] = rem % L;
      rem /= L;
    }
    site_map[s] = torus_site(y + z);
  }
  for (int st = 0; st < n_states_; ++st) {
    for (int s = 0; s < n_sites_; ++s) symbols[s] = state_site(st, site_map[s]);
    perm[st] = state_of_sites(symbols);
  }
  auto* self = const_cast<TorusModel*>(this);
  return self->shift_perm_.emplace(z, std::move(perm)).first->second;
}

void TorusModel::recenter(std::vector<double>& w, const Vec& z) const {
  const auto& perm = shift_permutation(z);
  std::vector<double> out(n_states_, 0.0);
  for (int st = 0; st < n_states_; ++st) out[perm[st]] += w[st];
  w.swap(out);
}

int TorusModel::shift_state(int state, const Vec& z) const {
  return shift_permutation(z)[state];
}

int TorusModel::step_state(int state, rng::Stream& stream) const {
  std::vector<int> symbols(n_sites_);
  for (int s = 0; s < n_sites_; ++s)
    symbols[s] = stream.next_index(law_.site_q[state_site(state, s)]);
  return state_of_sites(symbols);
}

// ---------------------------------------------------------------------------
// TorusFilter

TorusFilter::TorusFilter(std::shared_ptr<const TorusModel> model)
    : model_(std::move(model)), w_(model_->stationary()) {}

void TorusFilter::set_weights(std::vector<double> w) {
  if (static_cast<int>(w.size()) != model_->n_states())
    throw std::invalid_argument("TorusFilter: weight vector size mismatch");
  w_ = std::move(w);
}

double TorusFilter::total_mass() const {
  double m = 0.0;
  for (double v : w_) m += v;
  return m;
}

void TorusFilter::observe_pattern(std::int64_t sigma) {
  double mass = 0.0;
  for (int st = 0; st < model_->n_states(); ++st) {
    if (model_->pattern_of_state(st) != sigma) w_[st] = 0.0;
    mass += w_[st];
  }
  if (mass <= 0.0)
    throw std::runtime_error("TorusFilter: zero-probability observation");
  for (auto& v : w_) v /= mass;
}

void TorusFilter::reweight_by_jump(const Vec& z) {
  int col = model_->spec().range_column(z);
  if (col < 0) throw std::invalid_argument("reweight_by_jump: z not in range");
  double mass = 0.0;
  for (int st = 0; st < model_->n_states(); ++st) {
    w_[st] *= model_->spec().kernel.prob(
        static_cast<int>(model_->pattern_of_state(st)), col);
    mass += w_[st];
  }
  if (mass <= 0.0)
    throw std::runtime_error("TorusFilter: zero-probability jump");
  for (auto& v : w_) v /= mass;
}

void TorusFilter::advance() { model_->advance_env(w_); }

void TorusFilter::recenter(const Vec& z) { model_->recenter(w_, z); }

std::vector<double> TorusFilter::observation_law() const {
  std::vector<double> law(model_->spec().pattern_count(), 0.0);
  for (int st = 0; st < model_->n_states(); ++st)
    law[model_->pattern_of_state(st) - 1] += w_[st];
  return law;
}

// ---------------------------------------------------------------------------
// ExactConditional

ExactConditional::ExactConditional(EnvironmentLaw law, ModelSpec spec)
    : law_(std::move(law)), spec_(std::move(spec)) {
  if (law_.kind != LawKind::iid_field)
    throw std::invalid_argument(
        "ExactConditional(law, spec) supports iid_field; use the TorusModel "
        "constructor for torus laws");
  const std::int64_t K = spec_.pattern_count();
  iid_pattern_law_.resize(K);
  for (std::int64_t i = 1; i <= K; ++i) {
    auto digits = pattern_of_index(i, spec_.alphabet_size, spec_.window_size());
    double prob = 1.0;
    for (int sym : digits) prob *= law_.p[sym];
    iid_pattern_law_[i - 1] = prob;
  }
}

ExactConditional::ExactConditional(std::shared_ptr<const TorusModel> model)
    : filter_(std::make_unique<TorusFilter>(std::move(model))) {}

ExactConditional::ExactConditional(const ExactConditional& other)
    : law_(other.law_),
      spec_(other.spec_),
      filter_(other.filter_ ? std::make_unique<TorusFilter>(*other.filter_)
                            : nullptr),
      iid_pattern_law_(other.iid_pattern_law_) {}

ExactConditional& ExactConditional::operator=(const ExactConditional& other) {
  if (this != &other) *this = ExactConditional(other);
  return *this;
}

void ExactConditional::update(std::int64_t observed_pattern,
                              const Vec& displacement) {
  if (trivial()) {
    if (iid_pattern_law_[observed_pattern - 1] <= 0.0)
      throw std::runtime_error("zero-probability observation");
    return;  // product law: the posterior never moves
  }
  filter_->observe_pattern(observed_pattern);
  filter_->advance();
  filter_->recenter(displacement);
}

std::vector<double> ExactConditional::observation_law() const {
  if (trivial()) return iid_pattern_law_;
  return filter_->observation_law();
}

// ---------------------------------------------------------------------------

std::vector<double> posterior_after_history(const TorusModel& model,
                                            const ObservationEvent& event) {
  // Shared-ownership shim: the filter only reads through the pointer and the
  // model outlives this call.
  std::shared_ptr<const TorusModel> alias(&model, [](const TorusModel*) {});
  TorusFilter filter(alias);
  const auto& sites = event.path.sites;
  const int k = event.depth();
  for (int step = 0; step < k; ++step) {
    // time i = -k + step; pattern sigma_{-i} = patterns[k - 1 - step]
    filter.observe_pattern(event.patterns[k - 1 - step]);
    filter.advance();
    filter.recenter(sites[step + 1] - sites[step]);
  }
  return filter.weights();
}

}  // namespace rwdre::env
