#include "app/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "lp2s/bounds.hpp"
#include "lp2s/errors.hpp"
#include "lp2s/serialize.hpp"

namespace lp2s::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const ExperimentConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  const auto path = fs::path(cfg.out_dir) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument(fmt::format("cannot write '{}'", path.string()));
  spdlog::info("writing {}", path.string());
  return out;
}

std::optional<SolvedInstance> solve_if_needed(const ExperimentConfig& cfg, bool needed) {
  if (!needed) return std::nullopt;
  const double d0 = resolve_delta0(cfg);
  spdlog::info("delta0 = {}{}", d0, cfg.delta0 ? "" : " (auto)");
  return solve_pipeline(make_instance(cfg, d0));
}

double se_of_pulls(const std::vector<EpisodeRow>& rows) {
  if (rows.size() < 2) return 0.0;
  double m = 0.0;
  for (const auto& r : rows) m += static_cast<double>(r.result.total_pulls);
  m /= static_cast<double>(rows.size());
  double v = 0.0;
  for (const auto& r : rows) v += std::pow(static_cast<double>(r.result.total_pulls) - m, 2);
  return std::sqrt(v / static_cast<double>(rows.size() - 1) / static_cast<double>(rows.size()));
}

MonteCarloResult run_policy(const PolicyConfig& p, const ExperimentConfig& cfg, const SolvedInstance* solved) {
  MonteCarloSpec spec;
  spec.policy = p.name;
  spec.make = policy_factory(p, cfg, solved);
  spec.prior = cfg.prior;
  spec.K = cfg.K;
  spec.episodes = cfg.episodes;
  spec.master_seed = cfg.master_seed;
  spec.parallelism = cfg.parallelism;
  spdlog::info("running {} for {} episodes", p.name, cfg.episodes);
  auto res = monte_carlo(spec);
  spdlog::info("{}: mean SR {:.6g}, mean T {:.6g}", p.name, res.summary.mean_sr, res.summary.mean_t);
  return res;
}

std::vector<double> regrets(const std::vector<EpisodeRow>& rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.result.simple_regret);
  return out;
}

}  // namespace

SolvedInstance solve_pipeline(const LpInstance& inst) {
  if (auto why = necessary_feasibility_check(inst)) throw InfeasibleInstanceError(*why);
  SolvedInstance out{inst, build_lp(inst), {}, {}, {}};
  out.solution = solve_lp(out.problem);
  if (out.solution.status != SolveStatus::Optimal) {
    throw InfeasibleInstanceError(out.solution.infeasibility_reason);
  }
  out.actions = extract_actions(out.solution, out.problem);
  auto shaped = extract_threshold(out.actions);
  if (auto* tp = std::get_if<ThresholdPolicy>(&shaped)) {
    out.threshold = *tp;
    const ThresholdPolicy& pol = out.threshold;
    out.threshold_objective = propagate(*out.problem.tree, [&](int r, int s) { return pol.action(r, s); }).objective;
  } else {
    spdlog::info("optimum is not threshold-shaped ({}); repairing", std::get<NonThresholdReport>(shaped).reason);
    auto rep = threshold_repair(out.solution, out.problem);
    out.threshold = rep.policy;
    out.repaired = true;
    out.repair_candidates = rep.candidates;
    out.threshold_objective = rep.objective;
  }
  return out;
}

PolicyFactory policy_factory(const PolicyConfig& p, const ExperimentConfig& cfg, const SolvedInstance* solved) {
  const int K = cfg.K;
  const long default_budget = static_cast<long>(K) * cfg.R;
  if (p.name == "lp2s") {
    if (!solved) throw InvalidArgument("lp2s needs a solved instance");
    const auto rule = ActionRule::from(solved->threshold);
    return [rule, K](std::uint64_t seed) { return make_lp2s(rule, K, seed); };
  }
  if (p.name == "uniform") {
    const int rounds = p.rounds.value_or(cfg.R);
    return [rounds, K](std::uint64_t seed) { return make_uniform(K, rounds, seed); };
  }
  if (p.name == "batch_racing") {
    RacingOptions opt{p.delta, p.max_batches, p.budget.value_or(-1)};
    return [opt, K](std::uint64_t seed) { return make_batch_racing(K, opt, seed); };
  }
  if (p.name == "tse") {
    const double q = p.q;
    const long T = p.budget.value_or(default_budget);
    return [q, T, K](std::uint64_t seed) { return make_tse(K, q, T, seed); };
  }
  if (p.name == "batched_thompson") {
    ThompsonOptions opt{p.alpha, p.budget.value_or(default_budget)};
    const auto prior = cfg.prior;
    return [opt, prior, K](std::uint64_t seed) { return make_batched_thompson(K, prior, opt, seed); };
  }
  throw InvalidArgument(fmt::format("unknown policy '{}'", p.name));
}

int cmd_solve(const ExperimentConfig& cfg, std::ostream& log) {
  const auto solved = *solve_if_needed(cfg, true);
  const double bound = thm2_bound(cfg.prior, cfg.K, cfg.R, cfg.L);
  {
    auto out = open_out(cfg, "solution.json");
    auto doc = to_json(solved.solution, solved.problem);
    doc["delta0"] = solved.instance.delta0;
    doc["thm2_bound"] = bound;
    doc["threshold"] = to_json(solved.threshold);
    doc["threshold"]["repaired"] = solved.repaired;
    doc["threshold"]["objective"] = solved.threshold_objective;
    out << doc.dump(2) << '\n';
  }
  {
    auto out = open_out(cfg, "actions.csv");
    write_actions_csv(out, solved.actions);
  }
  {
    auto out = open_out(cfg, "thresholds.csv");
    write_thresholds_csv(out, solved.threshold);
  }
  log << "status: " << to_string(solved.solution.status) << '\n'
      << "delta0: " << format_real(solved.instance.delta0) << (cfg.delta0 ? "" : " (auto)") << '\n'
      << "f*: " << format_real(solved.solution.objective) << '\n'
      << "thm2_bound: " << format_real(bound) << '\n'
      << "threshold: " << (solved.repaired ? "repaired" : "direct") << ", objective "
      << format_real(solved.threshold_objective) << '\n';
  return kOk;
}

int cmd_simulate(const ExperimentConfig& cfg, std::ostream& log) {
  const bool needs_lp = cfg.wants("lp2s");
  for (const auto& c : cfg.checks) {
    if (!needs_lp) throw InvalidArgument(fmt::format("check '{}' needs the lp2s policy", c));
  }
  const auto solved = solve_if_needed(cfg, needs_lp);
  std::vector<MetricsSummary> summaries;
  std::vector<BoundReport> reports;
  auto episodes = open_out(cfg, "episodes.csv");
  bool header = true;
  for (const auto& p : cfg.policies) {
    const auto res = run_policy(p, cfg, solved ? &*solved : nullptr);
    write_episode_csv(episodes, res.rows, p.name, cfg.K, cfg.R, header);
    header = false;
    summaries.push_back(res.summary);
    if (p.name != "lp2s") continue;
    const double se_sr = res.summary.se_sr.value_or(0.0);
    for (const auto& c : cfg.checks) {
      if (c == "thm4") {
        reports.push_back(check_bound("thm4", thm4_bound(cfg.L, solved->instance.delta0), res.summary.mean_sr,
                                      3.0 * se_sr));
      } else if (c == "cost") {
        const double bound = expected_total_cost(thm2_bound(cfg.prior, cfg.K, cfg.R, cfg.L), cfg.K, cfg.L, cfg.R);
        reports.push_back(check_bound("cost", bound, res.summary.mean_t, 3.0 * se_of_pulls(res.rows)));
      }
    }
  }
  auto summary = open_out(cfg, "summary.csv");
  write_summary_csv(summary, summaries, reports);
  for (const auto& m : summaries) {
    log << fmt::format("{}: N={} mean_SR={} mean_PB={} mean_T={}\n", m.policy, m.episodes, format_real(m.mean_sr),
                       format_real(m.mean_pb), format_real(m.mean_t));
  }
  for (const auto& b : reports) {
    log << fmt::format("bound:{} {} observed={} satisfied={}\n", b.name, format_real(b.bound),
                       format_real(*b.observed), b.satisfied);
  }
  return kOk;
}

int cmd_compare(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.policies.size() < 2) throw InvalidArgument("compare needs at least two policies");
  if (!cfg.wants("lp2s")) throw InvalidArgument("compare runs against lp2s; add it to the policy list");
  const auto solved = solve_if_needed(cfg, true);
  const auto lp_cfg = PolicyConfig::named("lp2s");
  const auto base = run_policy(lp_cfg, cfg, &*solved);
  const long budget = static_cast<long>(std::ceil(base.summary.mean_t));
  if (cfg.budget_match) spdlog::info("budget-matched total pulls T = {}", budget);
  const auto base_sr = regrets(base.rows);

  auto out = open_out(cfg, "compare.csv");
  out << "policy,N,mean_SR,se_SR,mean_PB,se_PB,mean_T,budget,budget_matched,welch_t,welch_df,p_value\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
  auto row = [&](const MetricsSummary& m, const std::string& tail) {
    out << m.policy << ',' << m.episodes << ',' << format_real(m.mean_sr) << ',' << opt(m.se_sr) << ','
        << format_real(m.mean_pb) << ',' << opt(m.se_pb) << ',' << format_real(m.mean_t) << ',' << tail << '\n';
  };
  row(base.summary, ",,,,");
  log << fmt::format("lp2s: mean_SR={} mean_T={}\n", format_real(base.summary.mean_sr),
                     format_real(base.summary.mean_t));
  for (auto p : cfg.policies) {
    if (p.name == "lp2s") continue;
    if (cfg.budget_match) {
      if (p.name == "uniform") {
        p.rounds = static_cast<int>((budget + cfg.K - 1) / cfg.K);
      } else {
        p.budget = budget;
      }
    }
    const auto res = run_policy(p, cfg, nullptr);
    const auto w = welch_test(base_sr, regrets(res.rows));
    const std::string own =
        p.name == "uniform" ? (p.rounds ? std::to_string(static_cast<long>(*p.rounds) * cfg.K) : "")
                            : (p.budget ? std::to_string(*p.budget) : "");
    row(res.summary, fmt::format("{},{},{},{},{}", own, cfg.budget_match ? "true" : "false", format_real(w.t),
                                 format_real(w.df), format_real(w.p_value)));
    log << fmt::format("{}: mean_SR={} mean_T={} p={}\n", p.name, format_real(res.summary.mean_sr),
                       format_real(res.summary.mean_t), format_real(w.p_value));
  }
  return kOk;
}

int cmd_bounds(const ExperimentConfig& cfg, std::ostream& log) {
  std::vector<BoundReport> reports;
  std::optional<double> f_star;
  if (cfg.solution_file) {
    std::ifstream in(*cfg.solution_file);
    if (!in) throw InvalidArgument(fmt::format("cannot open solution '{}'", *cfg.solution_file));
    json sol;
    try {
      in >> sol;
    } catch (const json::parse_error& e) {
      throw InvalidArgument(fmt::format("solution file is not valid JSON: {}", e.what()));
    }
    if (sol.value("status", std::string()) != "Optimal") throw InvalidArgument("solution file is not Optimal");
    f_star = sol.at("objective").get<double>();
  }
  const double t2 = thm2_bound(cfg.prior, cfg.K, cfg.R, cfg.L);
  reports.push_back(check_bound("thm2", t2, f_star, 1e-9));
  std::optional<double> cost_obs;
  if (f_star) cost_obs = expected_total_cost(*f_star, cfg.K, cfg.L, cfg.R);
  reports.push_back(check_bound("cost", expected_total_cost(t2, cfg.K, cfg.L, cfg.R), cost_obs, 1e-9));
  if (cfg.prior.is_beta()) {
    const auto& b = cfg.prior.as_beta();
    const auto rate = corollary_rate(b.alpha, b.beta, cfg.R, cfg.L, cfg.K);
    reports.push_back(check_bound("corollary:" + rate.label, rate.value, std::nullopt));
  }
  const double d0 = resolve_delta0(cfg);
  reports.push_back(check_bound("thm4", thm4_bound(cfg.L, d0), std::nullopt));
  const auto& k = cfg.constants;
  if (cfg.variant == Variant::Pac && k.count("C1") && k.count("C2")) {
    const auto t3 = thm3_bound(*cfg.mu0, cfg.L, cfg.R, d0, k.at("C1"), k.at("C2"));
    reports.push_back(check_bound("thm3:miss", t3.miss_probability, std::nullopt));
    reports.push_back(check_bound("thm3:bsr", t3.bsr, std::nullopt));
  }
  if (cfg.variant == Variant::Fc && k.count("C1") && k.count("C2") && k.count("C3") && k.count("c")) {
    const double alpha0 = k.count("alpha0") ? k.at("alpha0") : std::min(cfg.assumption_alpha, 1.0);
    const auto t5 = thm5_bound(cfg.L, d0, cfg.K, cfg.R, alpha0, k.at("c"), k.at("C1"), k.at("C2"), k.at("C3"));
    reports.push_back(check_bound("thm5:one_minus_bpb", t5.one_minus_bpb, std::nullopt));
    reports.push_back(check_bound("thm5:bsr", t5.bsr, std::nullopt));
  }
  if (cfg.prior.is_beta()) {
    // the tail condition is only required near d = 0
    std::vector<double> grid;
    for (int i = 0; i <= 40; ++i) grid.push_back(std::pow(10.0, -6.0 + i / 10.0));
    const auto diag = assumption_fc_diagnostic(cfg.prior, cfg.assumption_alpha, grid);
    reports.push_back({"assumption:tail", 0.0, -diag.worst_tail_margin, diag.tail_ok, diag.worst_tail_margin});
    reports.push_back({"assumption:lipschitz", diag.lipschitz_estimate, diag.lipschitz_estimate, diag.lipschitz_ok,
                       0.0});
  }
  auto out = open_out(cfg, "bounds.csv");
  write_bounds_csv(out, reports);
  for (const auto& b : reports) {
    log << fmt::format("{}: bound={}{}\n", b.name, format_real(b.bound),
                       b.observed ? fmt::format(" observed={} satisfied={}", format_real(*b.observed), b.satisfied)
                                  : std::string());
  }
  return kOk;
}

int cmd_min_delta0(const ExperimentConfig& cfg, std::ostream& log) {
  const auto inst = make_instance(cfg, 1.0);
  const double d = tightest_feasible_delta0(inst, 1e-4);
  const auto w = weights(inst.weight, inst.prior);
  log << "variant: " << to_string(cfg.variant) << '\n'
      << "tightest_feasible_delta0: " << format_real(d) << '\n'
      << "one_minus_w(R): " << format_real(1.0 - w.back()) << '\n';
  return kOk;
}

int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const InfeasibleInstanceError& e) {
    err << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const InvalidArgument& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace lp2s::app
