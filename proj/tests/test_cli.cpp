#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

CommandResult run_cli(const std::string& args) {
  const std::string cmd = std::string(RWDRE_CLI_PATH) + " " + args + " 2>&1";
  std::array<char, 4096> buf{};
  CommandResult result;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (std::size_t n = fread(buf.data(), 1, buf.size(), pipe))
    result.output.append(buf.data(), n);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string config(const std::string& name) {
  return (fs::path(RWDRE_CONFIG_DIR) / name).string();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("rwdre_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& file) {
  std::ifstream is(file, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("simulate is reproducible and thread-count independent") {
  TempDir a("sim_a"), b("sim_b"), c("sim_c");
  CHECK(run_cli("simulate --config " + config("m1.json") + " --out " + a.str())
            .exit_code == 0);
  CHECK(run_cli("simulate --config " + config("m1.json") + " --out " + b.str())
            .exit_code == 0);
  CHECK(run_cli("simulate --config " + config("m1.json") + " --threads 2 --out " +
                c.str())
            .exit_code == 0);
  const auto first = slurp(a.path / "trajectories.csv");
  CHECK(first == slurp(b.path / "trajectories.csv"));
  CHECK(first == slurp(c.path / "trajectories.csv"));
  CHECK(first.rfind("run_id", 0) == 0);  // header row

  // A different seed changes the output.
  TempDir d("sim_d");
  CHECK(run_cli("simulate --config " + config("m1.json") +
                " --seed 43 --out " + d.str())
            .exit_code == 0);
  CHECK(first != slurp(d.path / "trajectories.csv"));
}

TEST_CASE("stats summarizes a simulated batch") {
  TempDir sim("stats_sim"), out("stats_out");
  REQUIRE(run_cli("simulate --config " + config("m1.json") + " --out " +
                  sim.str())
              .exit_code == 0);
  const auto res = run_cli("stats --config " + config("m1.json") + " --in " +
                           (sim.path / "trajectories.csv").string() +
                           " --out " + out.str());
  CHECK(res.exit_code == 0);
  const auto doc = json::parse(slurp(out.path / "summary.json"));
  CHECK(doc["n_runs"] == 1000);
  CHECK(doc["horizon"] == 1000);
  // Speed of the p = 0.7 walk is 0.2; the summary estimate must be close.
  const double v = doc["v_hat"][0];
  const double se = doc["v_se"][0];
  CHECK(std::abs(v - 0.2) <= 4.0 * se);
  CHECK(doc.contains("l1_curve"));
  CHECK(doc.contains("ldb_points"));
  CHECK(doc.contains("var_curve"));
  CHECK(doc.contains("covariance_min_eigenvalue"));

  // Missing --in and missing experiment.input is a config error.
  CHECK(run_cli("stats --config " + config("m1.json")).exit_code == 2);
}

TEST_CASE("oracle reports exact torus quantities") {
  TempDir out("oracle_out");
  const auto res =
      run_cli("oracle --config " + config("m2.json") + " --out " + out.str());
  CHECK(res.exit_code == 0);
  const auto doc = json::parse(slurp(out.path / "oracle.json"));
  CHECK(doc["states"] == 8);
  CHECK(std::abs(doc["v"][0].get<double>()) < 1e-10);
  CHECK(doc["sigma2"].get<double>() > 0.0);
  CHECK(doc["phi_hat"]["t"] == 1);

  // The iid config has no torus structure to report on.
  CHECK(run_cli("oracle --config " + config("m1.json")).exit_code == 2);
}

TEST_CASE("mixing emits one estimate object per grid point") {
  TempDir out("mixing_out");
  const auto res = run_cli("mixing --config " + config("site_chain.json") +
                           " --out " + out.str());
  CHECK(res.exit_code == 0);
  const auto doc = json::parse(slurp(out.path / "mixing.json"));
  REQUIRE(doc.is_array());
  CHECK(doc.size() >= 4);
  for (const auto& entry : doc) {
    CHECK(entry.contains("coefficient"));
    CHECK(entry.contains("t"));
    CHECK(entry.contains("value"));
    CHECK(entry.contains("mode"));
  }
}

TEST_CASE("couple writes the coupling CSV with the documented header") {
  TempDir out("couple_out");
  const auto res =
      run_cli("couple --config " + config("m1.json") + " --out " + out.str());
  CHECK(res.exit_code == 0);
  const auto text = slurp(out.path / "couple.csv");
  CHECK(text.rfind("run_id,n,tau_n,first_disagreement_after,env_coupled_ok",
                   0) == 0);

  // Site chains have no exact conditioned-coupling construction.
  CHECK(run_cli("couple --config " + config("site_chain.json")).exit_code == 2);
}

TEST_CASE("malformed config JSON reports the parse location and exits 2") {
  TempDir dir("bad_json");
  const auto bad = dir.path / "bad.json";
  std::ofstream(bad) << "{\n  \"model\": {,}\n}\n";
  const auto res = run_cli("simulate --config " + bad.string());
  CHECK(res.exit_code == 2);
  CHECK(res.output.find("line 2") != std::string::npos);
}

TEST_CASE("schema violations are config errors") {
  TempDir dir("bad_cfg");
  auto doc = json::parse(slurp(fs::path(RWDRE_CONFIG_DIR) / "m1.json"));

  auto write_and_run = [&](const json& d, const std::string& name) {
    const auto file = dir.path / name;
    std::ofstream(file) << d.dump(2);
    return run_cli("simulate --config " + file.string());
  };

  auto no_seed = doc;
  no_seed["experiment"].erase("seed");
  CHECK(write_and_run(no_seed, "no_seed.json").exit_code == 2);

  auto bad_kind = doc;
  bad_kind["experiment"]["kind"] = "explore";
  CHECK(write_and_run(bad_kind, "bad_kind.json").exit_code == 2);

  auto bad_theta = doc;
  bad_theta["experiment"]["theta"] = {1.0, 2.0};  // model is 1-dimensional
  CHECK(write_and_run(bad_theta, "bad_theta.json").exit_code == 2);

  auto bad_row = doc;
  bad_row["model"]["kernel"][0] = {0.8, 0.1};
  CHECK(write_and_run(bad_row, "bad_row.json").exit_code == 2);

  CHECK(run_cli("simulate --config /nonexistent/config.json").exit_code == 2);
}

TEST_CASE("unknown subcommands and missing arguments fail fast") {
  CHECK(run_cli("frobnicate --config " + config("m1.json")).exit_code != 0);
  CHECK(run_cli("simulate").exit_code != 0);       // --config is required
  CHECK(run_cli("simulate --config " + config("m1.json") +
                " --threads 0").exit_code != 0);   // out of range
}
