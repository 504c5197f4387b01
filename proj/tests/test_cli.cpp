#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "app/commands.hpp"
#include "app/config.hpp"
#include "lp2s/errors.hpp"
#include "lp2s/serialize.hpp"

using namespace lp2s;
using namespace lp2s::app;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("lp2s_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Row of a CSV whose first field is key.
std::vector<std::string> row(const std::string& text, const std::string& key) {
  for (const auto& l : lines(text)) {
    const auto f = fields(l);
    if (!f.empty() && f[0] == key) return f;
  }
  return {};
}

ExperimentConfig small_pac(const fs::path& out) {
  auto c = parse_config(json{{"schema_version", 1},
                             {"prior", {{"type", "beta"}, {"a", 1}, {"b", 1}}},
                             {"K", 100},
                             {"R", 2},
                             {"L", 10},
                             {"variant", {{"name", "pac"}, {"mu0", 0.5}}},
                             {"out_dir", out.string()}});
  return c;
}

int guarded(const std::function<int()>& f) {
  std::ostringstream err;
  return run_guarded(f, err);
}

int shell(const std::string& args) {
  const std::string cmd = std::string(LP2S_BIN) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_config(json{{"schema_version", 1}});
  CHECK(c.K == 200);
  CHECK(c.R == 40);
  CHECK_FALSE(c.delta0.has_value());
  CHECK_THROWS_AS(parse_config(json{{"schema_version", 1}, {"Kay", 3}}), InvalidArgument);
  CHECK_THROWS_AS(parse_config(json{{"schema_version", 2}}), InvalidArgument);
  CHECK_THROWS(parse_config(json{{"K", 10}}));
  CHECK_THROWS_AS(parse_config(json{{"schema_version", 1}, {"L", 500}}).validate(), InvalidArgument);

  const auto d = parse_config(json{{"schema_version", 1},
                                   {"prior", {{"type", "discrete"}, {"atoms", {{{"mean", 0.2}, {"prob", 0.5}}, {{"mean", 0.8}, {"prob", 0.5}}}}}},
                                   {"variant", "srm"},
                                   {"delta0", 0.3},
                                   {"policies", {"lp2s", {{"name", "tse"}, {"q", 0.25}}}}});
  CHECK(d.variant == Variant::Srm);
  CHECK(*d.delta0 == 0.3);
  REQUIRE(d.policies.size() == 2);
  CHECK(d.policies[1].q == 0.25);
  CHECK(to_json(parse_config(to_json(d))) == to_json(d));
}

TEST_CASE("solve writes artifacts and reports infeasibility") {
  const auto dir = scratch("solve");
  auto cfg = small_pac(dir);
  std::ostringstream log;
  CHECK(guarded([&] { return cmd_solve(cfg, log); }) == kOk);
  for (const char* f : {"solution.json", "actions.csv", "thresholds.csv"}) CHECK(fs::exists(dir / f));
  const auto sol = json::parse(slurp(dir / "solution.json"));
  CHECK(sol["status"] == "Optimal");
  CHECK(sol["objective"].get<double>() == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(sol["values"].size() == 18);
  CHECK(lines(slurp(dir / "actions.csv")).front() == "r,s,action,reach");
  CHECK(lines(slurp(dir / "thresholds.csv")).size() == 3);

  cfg.delta0 = 0.05;
  std::ostringstream err;
  CHECK(run_guarded([&] { return cmd_solve(cfg, log); }, err) == kInfeasible);
  CHECK(err.str().find("w(R) < 1-delta0") != std::string::npos);
}

TEST_CASE("simulate is byte-deterministic") {
  const auto dir = scratch("simulate");
  auto cfg = small_pac(dir);
  cfg.K = 20;
  cfg.R = 4;
  cfg.L = 3;
  cfg.episodes = 10;
  cfg.policies = {PolicyConfig::named("uniform")};
  std::ostringstream log;
  REQUIRE(guarded([&] { return cmd_simulate(cfg, log); }) == kOk);
  const auto episodes = slurp(dir / "episodes.csv");
  const auto summary = slurp(dir / "summary.csv");
  CHECK(lines(episodes).size() == 11);
  CHECK(lines(summary).size() == 2);
  CHECK(lines(summary)[0] == "policy,N,mean_SR,se_SR,mean_PB,se_PB,mean_T,bound,observed,satisfied,slack");

  cfg.parallelism = 8;
  REQUIRE(guarded([&] { return cmd_simulate(cfg, log); }) == kOk);
  CHECK(slurp(dir / "episodes.csv") == episodes);
  CHECK(slurp(dir / "summary.csv") == summary);

  cfg.master_seed = 2;
  REQUIRE(guarded([&] { return cmd_simulate(cfg, log); }) == kOk);
  CHECK(slurp(dir / "episodes.csv") != episodes);
}

TEST_CASE("simulate appends bound rows") {
  const auto dir = scratch("thm4");
  auto cfg = parse_config(json{{"schema_version", 1},
                               {"K", 40},
                               {"R", 6},
                               {"L", 3},
                               {"variant", "srm"},
                               {"episodes", 50},
                               {"checks", {"thm4", "cost"}},
                               {"out_dir", dir.string()}});
  std::ostringstream log;
  REQUIRE(guarded([&] { return cmd_simulate(cfg, log); }) == kOk);
  const auto summary = slurp(dir / "summary.csv");
  const auto thm4 = row(summary, "bound:thm4");
  REQUIRE(thm4.size() == 11);
  CHECK((thm4[9] == "true" || thm4[9] == "false"));
  CHECK_FALSE(row(summary, "bound:cost").empty());
}

TEST_CASE("compare needs two policies and writes a Welch column") {
  const auto dir = scratch("compare");
  auto cfg = small_pac(dir);
  cfg.K = 30;
  cfg.R = 4;
  cfg.L = 3;
  cfg.episodes = 40;
  std::ostringstream log;
  CHECK(guarded([&] { return cmd_compare(cfg, log); }) == kConfigError);
  cfg.policies = {PolicyConfig::named("lp2s"), PolicyConfig::named("uniform")};
  REQUIRE(guarded([&] { return cmd_compare(cfg, log); }) == kOk);
  const auto text = slurp(dir / "compare.csv");
  const auto ls = lines(text);
  REQUIRE(ls.size() == 3);
  CHECK(ls[0].find("p_value") != std::string::npos);
  const auto uni = row(text, "uniform");
  REQUIRE(uni.size() == 12);
  CHECK(uni[8] == "true");
  CHECK_FALSE(uni[11].empty());
}

TEST_CASE("bounds with and without a solution") {
  const auto dir = scratch("bounds");
  auto cfg = small_pac(dir);
  std::ostringstream log;
  REQUIRE(guarded([&] { return cmd_bounds(cfg, log); }) == kOk);
  auto text = slurp(dir / "bounds.csv");
  CHECK(lines(text)[0] == "name,bound,observed,satisfied,slack");
  const auto bare = row(text, "thm2");
  REQUIRE(bare.size() == 5);
  CHECK(bare[2].empty());
  CHECK_FALSE(row(text, "corollary:b=1").empty());

  cfg.delta0 = 1.0;
  REQUIRE(guarded([&] { return cmd_solve(cfg, log); }) == kOk);
  cfg.solution_file = (dir / "solution.json").string();
  REQUIRE(guarded([&] { return cmd_bounds(cfg, log); }) == kOk);
  text = slurp(dir / "bounds.csv");
  const auto checked = row(text, "thm2");
  REQUIRE(checked.size() == 5);
  CHECK_FALSE(checked[2].empty());
  CHECK(checked[3] == "true");

  cfg.prior = PriorSpec::beta(2, 3);
  cfg.solution_file.reset();
  REQUIRE(guarded([&] { return cmd_bounds(cfg, log); }) == kOk);
  CHECK_FALSE(row(slurp(dir / "bounds.csv"), "corollary:b>1").empty());
}

TEST_CASE("tool exit codes") {
  const auto dir = scratch("exit");
  const std::string base = "--K 100 --R 2 --L 10 --variant pac --mu0 0.5 --out " + dir.string();
  CHECK(shell("--help") == 0);
  CHECK(shell("solve " + base) == 0);
  CHECK(shell("solve " + base + " --delta0 0.05") == 2);
  CHECK(shell("solve --no-such-flag") == 1);
  CHECK(shell("solve --config " + (dir / "missing.json").string()) == 1);
  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK(shell("solve --config " + (dir / "bad.json").string()) == 1);
  CHECK(shell("min-delta0 " + base) == 0);
}

TEST_CASE("LP problem JSON round trip") {
  const auto inst = LpInstance::make(Variant::Fc, PriorSpec::beta(2, 3), 50, 4, 5, 0.6);
  const auto p = build_lp(inst);
  const auto j = to_json(p);
  CHECK(j["schema_version"] == 1);
  const auto back = lp_problem_from_json(json::parse(j.dump()));
  CHECK(back.num_vars == p.num_vars);
  CHECK(back.obj_cols == p.obj_cols);
  CHECK(back.obj_vals == p.obj_vals);
  REQUIRE(back.rows.size() == p.rows.size());
  for (std::size_t i = 0; i < p.rows.size(); ++i) {
    CHECK(back.rows[i].cols == p.rows[i].cols);
    CHECK(back.rows[i].vals == p.rows[i].vals);
    CHECK(back.rows[i].rhs == p.rows[i].rhs);
    CHECK(back.rows[i].sense == p.rows[i].sense);
  }
  CHECK(solve_lp(back).objective == doctest::Approx(solve_lp(p).objective).epsilon(1e-9));
}

TEST_CASE("CSV number formatting round-trips") {
  for (double x : {0.1, 1.0 / 3.0, 1e-17, 123456789.0, 0.0}) CHECK(std::stod(format_real(x)) == x);
  CHECK(format_real(0.25) == "0.25");
  CHECK(format_real(-0.0) == "0");
}
