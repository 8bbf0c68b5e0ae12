#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "acceptance.hpp"
#include "rwdre/coupling.hpp"
#include "rwdre/env.hpp"
#include "rwdre/mixing.hpp"
#include "rwdre/model.hpp"
#include "rwdre/oracle.hpp"
#include "rwdre/parallel.hpp"
#include "rwdre/rng.hpp"
#include "rwdre/stats.hpp"
#include "rwdre/walk.hpp"

namespace {

using nlohmann::json;
using namespace rwdre;

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitAcceptance = 3;

struct ExperimentConfig {
  ModelSpec model;
  env::EnvironmentLaw environment;
  std::string kind;
  std::int64_t trajectories = 1000;
  std::int64_t horizon = 1000;
  std::uint64_t seed = 0;
  std::int64_t n = 2;
  std::vector<std::int64_t> t_grid = {1, 2, 3, 4};
  double eps = 0.2;
  std::vector<double> theta;
  int k_max = 2;
  int h = 3;
  std::int64_t budget = 1000;
  std::string input;  // stats: trajectory CSV path
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Line/column of a byte offset, for parse diagnostics.
std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
  int line = 1, column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, column] = line_column(text, e.byte);
    throw ConfigError(path + ":" + std::to_string(line) + ":" +
                      std::to_string(column) + ": " + e.what());
  }

  ExperimentConfig cfg;
  try {
    if (!doc.contains("model") || !doc.contains("environment") ||
        !doc.contains("experiment"))
      throw ConfigError(
          "config requires top-level keys: model, environment, experiment");
    cfg.model = model_from_json(doc["model"].dump());
    cfg.environment = env::law_from_json(doc["environment"].dump());
    cfg.environment.validate();

    const json& exp = doc["experiment"];
    cfg.kind = exp.at("kind").get<std::string>();
    const std::vector<std::string> kinds = {"simulate", "couple", "mixing",
                                            "oracle",   "stats",  "verify"};
    if (std::find(kinds.begin(), kinds.end(), cfg.kind) == kinds.end())
      throw ConfigError("experiment.kind must be one of simulate, couple, "
                        "mixing, oracle, stats, verify");
    if (!exp.contains("seed")) throw ConfigError("experiment.seed is required");
    cfg.seed = exp["seed"].get<std::uint64_t>();
    cfg.trajectories = exp.value("trajectories", cfg.trajectories);
    cfg.horizon = exp.value("horizon", cfg.horizon);
    cfg.n = exp.value("n", cfg.n);
    if (exp.contains("t_grid"))
      cfg.t_grid = exp["t_grid"].get<std::vector<std::int64_t>>();
    cfg.eps = exp.value("eps", cfg.eps);
    if (exp.contains("theta"))
      cfg.theta = exp["theta"].get<std::vector<double>>();
    cfg.k_max = exp.value("k_max", cfg.k_max);
    cfg.h = exp.value("h", cfg.h);
    cfg.budget = exp.value("budget", cfg.budget);
    cfg.input = exp.value("input", cfg.input);

    if (cfg.trajectories < 1 || cfg.horizon < 1 || cfg.n < 1 ||
        cfg.k_max < 1 || cfg.h < 0 || cfg.budget < 1 || cfg.eps <= 0.0)
      throw ConfigError("experiment knobs out of range");
    if (cfg.theta.empty()) {
      cfg.theta.assign(cfg.model.d, 0.0);
      cfg.theta[0] = 1.0;
    }
    if (static_cast<int>(cfg.theta.size()) != cfg.model.d)
      throw ConfigError("theta must have model.d entries");
    if (cfg.model.alphabet_size != cfg.environment.alphabet_size)
      throw ConfigError("model and environment alphabet sizes differ");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return cfg;
}

std::filesystem::path prepare_out(const std::string& out) {
  std::filesystem::path dir(out);
  std::filesystem::create_directories(dir);
  return dir;
}

int cmd_simulate(const ExperimentConfig& cfg, const std::string& out,
                 int threads) {
  const auto batch = walk::run_batch(cfg.environment, cfg.model,
                                     cfg.trajectories, cfg.horizon, cfg.seed,
                                     threads);
  std::ofstream os(prepare_out(out) / "trajectories.csv", std::ios::binary);
  walk::write_trajectories_csv(os, batch, cfg.model);
  return 0;
}

int cmd_couple(const ExperimentConfig& cfg, const std::string& out,
               int threads) {
  const auto coin = coupling::coin_for_condition_b(cfg.model);
  struct Row {
    std::optional<std::int64_t> tau;
    std::optional<std::int64_t> first_disagreement_after;
    bool env_coupled_ok = false;
  };
  std::vector<Row> rows(cfg.trajectories);

  std::shared_ptr<const env::TorusModel> torus;
  if (cfg.environment.kind == env::LawKind::torus_markov)
    torus = std::make_shared<env::TorusModel>(cfg.environment, cfg.model);

  parallel_for(cfg.trajectories, threads, [&](std::int64_t r) {
    const std::uint64_t base =
        rng::hash_words({cfg.seed, 0x636f7570ULL,
                         static_cast<std::uint64_t>(r)});
    const auto a0 = coupling::sample_history(cfg.environment, cfg.model,
                                             cfg.k_max,
                                             rng::hash_words({base, 0}));
    const auto a1 = coupling::sample_history(cfg.environment, cfg.model,
                                             cfg.k_max,
                                             rng::hash_words({base, 1}));
    const auto run =
        torus ? coupling::coupled_pair_b(torus, a0, a1, coin, cfg.n,
                                         cfg.horizon, rng::hash_words({base, 2}))
              : coupling::coupled_pair_b_iid(cfg.environment, cfg.model, a0,
                                             a1, coin, cfg.n, cfg.horizon,
                                             rng::hash_words({base, 2}));
    rows[r] = Row{run.tau, run.first_disagreement_after, run.env_coupled_ok};
  });

  std::ofstream os(prepare_out(out) / "couple.csv", std::ios::binary);
  os << "run_id,n,tau_n,first_disagreement_after,env_coupled_ok\n";
  for (std::int64_t r = 0; r < cfg.trajectories; ++r) {
    os << r << "," << cfg.n << ",";
    if (rows[r].tau) os << *rows[r].tau;
    os << ",";
    if (rows[r].first_disagreement_after)
      os << *rows[r].first_disagreement_after;
    os << "," << (rows[r].env_coupled_ok ? 1 : 0) << "\n";
  }
  return 0;
}

int cmd_mixing(const ExperimentConfig& cfg, const std::string& out,
               int /*threads*/) {
  json estimates = json::array();
  for (std::int64_t t : cfg.t_grid) {
    const auto tilde = mixing::estimate_phi_tilde(
        cfg.environment, cfg.model, t, cfg.k_max, cfg.h, cfg.budget,
        rng::hash_words({cfg.seed, 0x7074ULL, static_cast<std::uint64_t>(t)}));
    const auto hat = mixing::estimate_phi_hat(
        cfg.environment, cfg.model, t, cfg.k_max, cfg.h, cfg.budget,
        rng::hash_words({cfg.seed, 0x7068ULL, static_cast<std::uint64_t>(t)}));
    estimates.push_back(json::parse(mixing::estimate_to_json(tilde)));
    estimates.push_back(json::parse(mixing::estimate_to_json(hat)));
  }
  std::ofstream os(prepare_out(out) / "mixing.json", std::ios::binary);
  os << estimates.dump(2) << "\n";
  return 0;
}

int cmd_oracle(const ExperimentConfig& cfg, const std::string& out,
               int /*threads*/) {
  auto torus = std::make_shared<env::TorusModel>(cfg.environment, cfg.model);
  const auto chain = oracle::build_joint_chain(torus);
  const auto v = oracle::exact_speed(chain);
  const double sigma2 = oracle::exact_asymptotic_variance(chain, cfg.theta);
  const std::int64_t t = cfg.t_grid.empty() ? 1 : cfg.t_grid.front();
  const double phi_hat = oracle::exact_phi_hat(*torus, t, cfg.k_max, cfg.h);

  json doc;
  doc["states"] = chain.n_states();
  doc["v"] = v;
  doc["sigma2"] = sigma2;
  doc["phi_hat"] = {{"t", t}, {"value", phi_hat}};
  std::ofstream os(prepare_out(out) / "oracle.json", std::ios::binary);
  os << doc.dump(2) << "\n";
  return 0;
}

int cmd_stats(const ExperimentConfig& cfg, const std::string& out,
              int /*threads*/) {
  if (cfg.input.empty())
    throw ConfigError("stats requires an input trajectory CSV "
                      "(experiment.input or --in)");
  std::ifstream is(cfg.input);
  if (!is) throw std::runtime_error("cannot open " + cfg.input);
  const auto batch = walk::read_trajectories_csv(is, cfg.model);
  if (batch.empty()) throw std::runtime_error("empty trajectory file");

  const auto horizon =
      static_cast<std::int64_t>(batch[0].positions.size()) - 1;
  std::vector<std::int64_t> times;
  for (std::int64_t t : {horizon / 8, horizon / 4, horizon / 2, horizon})
    if (t >= 1 && (times.empty() || t > times.back())) times.push_back(t);

  stats::Ensemble ens;
  ens.spec = cfg.model;
  ens.times = times;
  for (const auto& traj : batch) {
    if (static_cast<std::int64_t>(traj.positions.size()) - 1 != horizon)
      throw std::runtime_error("trajectories have unequal horizons");
    std::vector<Vec> marks;
    for (std::int64_t t : times) marks.push_back(traj.positions[t]);
    ens.positions.push_back(std::move(marks));
  }

  const auto speed = stats::estimate_speed(ens);
  const auto l1 = stats::l1_curve(ens, speed.v);

  json doc;
  doc["n_runs"] = ens.positions.size();
  doc["horizon"] = horizon;
  doc["v_hat"] = speed.v;
  doc["v_se"] = speed.se;
  doc["l1_curve"] = json::array();
  for (const auto& [t, val] : l1)
    doc["l1_curve"].push_back({{"t", t}, {"value", val}});

  // Tail points for the configured eps; zero-count tails censored at half
  // the ensemble resolution.
  const auto n_runs = static_cast<std::int64_t>(ens.positions.size());
  json ldb = json::array();
  std::vector<stats::LdbPoint> points;
  for (std::size_t i = 0; i < ens.times.size(); ++i) {
    std::int64_t hits = 0;
    for (const auto& run : ens.positions) {
      double dev = 0.0;
      for (int k = 0; k < cfg.model.d; ++k) {
        const double diff =
            static_cast<double>(run[i][k]) / ens.times[i] - speed.v[k];
        dev += diff * diff;
      }
      if (std::sqrt(dev) > cfg.eps) ++hits;
    }
    stats::LdbPoint pt;
    pt.t = ens.times[i];
    pt.censored = hits == 0;
    pt.p = hits == 0 ? 1.0 / (2.0 * n_runs)
                     : static_cast<double>(hits) / n_runs;
    points.push_back(pt);
    ldb.push_back({{"t", pt.t}, {"p", pt.p}, {"censored", pt.censored}});
  }
  doc["ldb_points"] = ldb;
  doc["eps"] = cfg.eps;
  try {
    const auto fit = stats::ldb_fit_points(points);
    doc["ldb_fit"] = {{"c", fit.c}, {"c_se", fit.c_se}, {"log_c", fit.log_c}};
  } catch (const std::invalid_argument&) {
    doc["ldb_fit"] = nullptr;
  }

  json var_json = json::array();
  double slope = 0.0;
  if (ens.times.size() >= 3) {
    const auto growth = stats::variance_growth(
        ens, cfg.theta, cfg.eps * static_cast<double>(horizon));
    for (const auto& [n, var] : growth.var_curve)
      var_json.push_back({{"n", n}, {"var", var}});
    slope = growth.slope;
    doc["var_slope"] = growth.slope;
    doc["chebyshev_ok"] = growth.chebyshev_ok;
  }
  doc["var_curve"] = var_json;

  bool have_marginals = true;
  for (double s : {0.25, 0.5, 1.0}) {
    const auto t = static_cast<std::int64_t>(
        std::floor(static_cast<double>(horizon) * s) + 0.5);
    if (std::find(ens.times.begin(), ens.times.end(), t) == ens.times.end())
      have_marginals = false;
  }
  if (slope > 0.0 && have_marginals) {
    const auto fclt = stats::fclt_test(ens, speed.v, slope, cfg.theta);
    json marg = json::array();
    for (const auto& m : fclt.marginals)
      marg.push_back(
          {{"s", m.s}, {"ks_stat", m.ks_stat}, {"p_value", m.p_value}});
    doc["fclt"] = {{"marginals", marg},
                   {"marginals_ok", fclt.marginals_ok},
                   {"covariance_ok", fclt.covariance_ok}};
  } else {
    doc["fclt"] = nullptr;
  }

  const auto sigma = stats::empirical_sigma(ens);
  doc["covariance"] = sigma;
  doc["covariance_min_eigenvalue"] = stats::min_eigenvalue(sigma);

  std::ofstream os(prepare_out(out) / "summary.json", std::ios::binary);
  os << doc.dump(2) << "\n";
  return 0;
}

int cmd_verify(const ExperimentConfig& /*cfg*/, const std::string& /*out*/,
               int threads) {
  const int failures = acceptance::run_all(std::cout, threads);
  if (failures > 0) {
    std::cout << failures << " acceptance criteria failed\n";
    return kExitAcceptance;
  }
  std::cout << "all acceptance criteria passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RWDRE simulation and verification laboratory"};
  app.require_subcommand(1);

  std::string config_path, out = ".", input;
  std::optional<std::uint64_t> seed_override;
  int threads = 1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (JSON)")
        ->required();
    sub->add_option("--seed", seed_override, "override experiment.seed");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--threads", threads, "worker count")
        ->check(CLI::Range(1, 64));
  };

  auto* simulate = app.add_subcommand("simulate", "generate trajectory CSV");
  auto* couple = app.add_subcommand("couple", "run coupled pairs");
  auto* mixing_cmd = app.add_subcommand("mixing", "mixing estimates");
  auto* oracle_cmd = app.add_subcommand("oracle", "exact torus report");
  auto* stats_cmd = app.add_subcommand("stats", "summarize trajectory CSV");
  auto* verify = app.add_subcommand("verify", "run the acceptance suite");
  for (auto* sub :
       {simulate, couple, mixing_cmd, oracle_cmd, stats_cmd, verify})
    add_common(sub);
  stats_cmd->add_option("--in", input, "trajectory CSV to summarize");

  CLI11_PARSE(app, argc, argv);

  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
    if (seed_override) cfg.seed = *seed_override;
    if (!input.empty()) cfg.input = input;
    if (oracle_cmd->parsed() &&
        cfg.environment.kind != env::LawKind::torus_markov)
      throw ConfigError("oracle requires a torus_markov environment");
    if (couple->parsed() &&
        cfg.environment.kind == env::LawKind::independent_site_chain)
      throw ConfigError(
          "couple supports iid_field and torus_markov environments");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(cfg, out, threads);
    if (couple->parsed()) return cmd_couple(cfg, out, threads);
    if (mixing_cmd->parsed()) return cmd_mixing(cfg, out, threads);
    if (oracle_cmd->parsed()) return cmd_oracle(cfg, out, threads);
    if (stats_cmd->parsed()) return cmd_stats(cfg, out, threads);
    if (verify->parsed()) return cmd_verify(cfg, out, threads);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
