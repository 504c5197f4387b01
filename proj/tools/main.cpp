#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "app/commands.hpp"
#include "app/config.hpp"
#include "lp2s/errors.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> parallelism;
  std::optional<std::string> out;
  std::optional<int> K;
  std::optional<int> R;
  std::optional<double> L;
  std::optional<std::string> delta0;
  std::optional<double> mu0;
  std::optional<std::string> variant;
  std::optional<double> a;
  std::optional<double> b;
  std::optional<long> episodes;
  std::optional<std::string> solution;
};

lp2s::app::ExperimentConfig assemble(const Overrides& o) {
  using namespace lp2s;
  app::ExperimentConfig cfg = o.config.empty() ? app::ExperimentConfig{} : app::load_config(o.config);
  if (o.seed) cfg.master_seed = *o.seed;
  if (o.parallelism) cfg.parallelism = *o.parallelism;
  if (o.out) cfg.out_dir = *o.out;
  if (o.K) cfg.K = *o.K;
  if (o.R) cfg.R = *o.R;
  if (o.L) cfg.L = *o.L;
  if (o.delta0) {
    if (*o.delta0 == "auto") {
      cfg.delta0.reset();
    } else {
      try {
        cfg.delta0 = std::stod(*o.delta0);
      } catch (const std::exception&) {
        throw InvalidArgument("--delta0 takes a number or 'auto'");
      }
    }
  }
  if (o.variant) cfg.variant = parse_variant(*o.variant);
  if (o.mu0) cfg.mu0 = *o.mu0;
  if (o.a || o.b) {
    const double a = o.a.value_or(cfg.prior.is_beta() ? cfg.prior.as_beta().alpha : 1.0);
    const double b = o.b.value_or(cfg.prior.is_beta() ? cfg.prior.as_beta().beta : 1.0);
    cfg.prior = PriorSpec::beta(a, b);
  }
  if (o.episodes) cfg.episodes = *o.episodes;
  if (o.solution) cfg.solution_file = *o.solution;
  cfg.validate();
  return cfg;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("lp2s");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("LP2S_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"LP-based two-stage best-arm identification for batched Bernoulli bandits"};
  app.require_subcommand(1);
  Overrides o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--parallelism", o.parallelism, "concurrent episodes")->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--K", o.K, "number of arms");
    sub->add_option("--R", o.R, "stage-1 rounds");
    sub->add_option("--L", o.L, "expected survivors");
    sub->add_option("--delta0", o.delta0, "quality level, or 'auto'");
    sub->add_option("--mu0", o.mu0, "PAC threshold");
    sub->add_option("--variant", o.variant, "pac | srm | fc");
    sub->add_option("--a", o.a, "Beta prior alpha");
    sub->add_option("--b", o.b, "Beta prior beta");
    sub->add_option("--episodes", o.episodes, "Monte Carlo episodes");
  };
  using Cmd = int (*)(const lp2s::app::ExperimentConfig&, std::ostream&);
  Cmd chosen = nullptr;
  auto add = [&](const char* name, const char* help, Cmd cmd) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub);
    sub->callback([&chosen, cmd] { chosen = cmd; });
    return sub;
  };
  add("solve", "solve the LP and export the policy", lp2s::app::cmd_solve);
  add("simulate", "Monte Carlo runs of the configured policies", lp2s::app::cmd_simulate);
  add("compare", "budget-matched comparison against lp2s", lp2s::app::cmd_compare);
  add("bounds", "evaluate bounds and assumption diagnostics", lp2s::app::cmd_bounds)
      ->add_option("--solution", o.solution, "solution.json from solve");
  add("min-delta0", "tightest feasible delta0", lp2s::app::cmd_min_delta0);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : lp2s::app::kConfigError;
  }
  return lp2s::app::run_guarded([&] { return chosen(assemble(o), std::cout); }, std::cerr);
}
