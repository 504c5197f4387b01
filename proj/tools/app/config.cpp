#include "app/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "lp2s/errors.hpp"

namespace lp2s::app {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(fmt::format("{} must be a JSON object", where));
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw InvalidArgument(fmt::format("unknown key '{}' in {}", key, where));
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument(fmt::format("{}.{}: {}", where, key, e.what()));
  }
}

PriorSpec parse_prior(const json& j) {
  const auto type = j.value("type", std::string("beta"));
  if (type == "beta") {
    reject_unknown(j, {"type", "a", "b"}, "prior");
    return PriorSpec::beta(get<double>(j, "a", "prior"), get<double>(j, "b", "prior"));
  }
  if (type == "discrete") {
    reject_unknown(j, {"type", "atoms"}, "prior");
    std::vector<Atom> atoms;
    for (const auto& a : j.at("atoms")) {
      reject_unknown(a, {"mean", "prob"}, "prior.atoms[]");
      atoms.push_back({get<double>(a, "mean", "atom"), get<double>(a, "prob", "atom")});
    }
    return PriorSpec::discrete(std::move(atoms));
  }
  throw InvalidArgument(fmt::format("unknown prior type '{}'", type));
}

json prior_json(const PriorSpec& p) {
  if (p.is_beta()) return {{"type", "beta"}, {"a", p.as_beta().alpha}, {"b", p.as_beta().beta}};
  json atoms = json::array();
  for (const auto& a : p.as_discrete().atoms) atoms.push_back({{"mean", a.mean}, {"prob", a.prob}});
  return {{"type", "discrete"}, {"atoms", atoms}};
}

PolicyConfig parse_policy(const json& j) {
  if (j.is_string()) return PolicyConfig::named(j.get<std::string>());
  reject_unknown(j, {"name", "rounds", "delta", "max_batches", "q", "alpha", "budget"}, "policies[]");
  PolicyConfig p;
  p.name = get<std::string>(j, "name", "policies[]");
  if (j.contains("rounds")) p.rounds = get<int>(j, "rounds", p.name);
  p.delta = j.value("delta", p.delta);
  p.max_batches = j.value("max_batches", p.max_batches);
  p.q = j.value("q", p.q);
  p.alpha = j.value("alpha", p.alpha);
  if (j.contains("budget")) p.budget = get<long>(j, "budget", p.name);
  return p;
}

json policy_json(const PolicyConfig& p) {
  json j = {{"name", p.name}};
  if (p.name == "uniform" && p.rounds) j["rounds"] = *p.rounds;
  if (p.name == "batch_racing") {
    j["delta"] = p.delta;
    j["max_batches"] = p.max_batches;
  }
  if (p.name == "tse") j["q"] = p.q;
  if (p.name == "batched_thompson") j["alpha"] = p.alpha;
  if (p.budget) j["budget"] = *p.budget;
  return j;
}

const std::set<std::string> kPolicies{"lp2s", "uniform", "batch_racing", "tse", "batched_thompson"};

}  // namespace

void ExperimentConfig::validate() const {
  if (K < 1 || R < 1) throw InvalidArgument("K and R must be >= 1");
  if (!(L > 0.0) || L > K) throw InvalidArgument(fmt::format("L must lie in (0, K], got {}", L));
  if (delta0 && !(*delta0 >= 0.0 && *delta0 <= 1.0)) throw InvalidArgument("delta0 must lie in [0,1]");
  if (variant == Variant::Pac && !mu0) throw InvalidArgument("the pac variant needs mu0");
  if (episodes < 1) throw InvalidArgument("episodes must be >= 1");
  if (parallelism < 1) throw InvalidArgument("parallelism must be >= 1");
  if (policies.empty()) throw InvalidArgument("at least one policy is required");
  std::set<std::string> seen;
  for (const auto& p : policies) {
    if (!kPolicies.count(p.name)) throw InvalidArgument(fmt::format("unknown policy '{}'", p.name));
    if (!seen.insert(p.name).second) throw InvalidArgument(fmt::format("policy '{}' listed twice", p.name));
    if (p.rounds && *p.rounds < 1) throw InvalidArgument("uniform rounds must be >= 1");
    if (p.budget && *p.budget < 0) throw InvalidArgument(fmt::format("{} budget must be >= 0", p.name));
    if (!(p.delta > 0.0 && p.delta < 1.0)) throw InvalidArgument("racing delta must lie in (0,1)");
    if (!(p.q > 0.0 && p.q < 1.0)) throw InvalidArgument("tse q must lie in (0,1)");
    if (!(p.alpha > 1.0)) throw InvalidArgument("thompson alpha must exceed 1");
  }
  for (const auto& c : checks) {
    if (c != "thm4" && c != "cost") throw InvalidArgument(fmt::format("unknown check '{}'", c));
  }
  // Full instance checks (weights, mu0 range) are deferred to LpInstance::make.
  make_instance(*this, delta0.value_or(0.5));
}

bool ExperimentConfig::wants(const std::string& policy) const {
  return std::any_of(policies.begin(), policies.end(), [&](const auto& p) { return p.name == policy; });
}

ExperimentConfig parse_config(const json& j) {
  reject_unknown(j, {"schema_version", "prior", "K", "R", "L", "delta0", "variant", "mu0", "policies", "episodes",
                     "master_seed", "budget_match", "parallelism", "out_dir", "checks", "solution", "constants",
                     "assumption_alpha"},
                 "config");
  if (!j.contains("schema_version")) throw InvalidArgument("config lacks schema_version");
  const int version = get<int>(j, "schema_version", "config");
  if (version != kSchemaVersion) {
    throw InvalidArgument(fmt::format("unsupported schema_version {} (expected {})", version, kSchemaVersion));
  }
  ExperimentConfig c;
  if (j.contains("prior")) c.prior = parse_prior(j.at("prior"));
  c.K = j.contains("K") ? get<int>(j, "K", "config") : c.K;
  c.R = j.contains("R") ? get<int>(j, "R", "config") : c.R;
  c.L = j.contains("L") ? get<double>(j, "L", "config") : c.L;
  if (j.contains("delta0")) {
    const auto& d = j.at("delta0");
    if (d.is_string()) {
      if (d.get<std::string>() != "auto") throw InvalidArgument("delta0 must be a number or \"auto\"");
      c.delta0.reset();
    } else {
      c.delta0 = get<double>(j, "delta0", "config");
    }
  }
  if (j.contains("variant")) {
    const auto& v = j.at("variant");
    if (v.is_string()) {
      c.variant = parse_variant(v.get<std::string>());
    } else {
      reject_unknown(v, {"name", "mu0"}, "variant");
      c.variant = parse_variant(get<std::string>(v, "name", "variant"));
      if (v.contains("mu0")) c.mu0 = get<double>(v, "mu0", "variant");
    }
  }
  if (j.contains("mu0")) c.mu0 = get<double>(j, "mu0", "config");
  if (j.contains("policies")) {
    c.policies.clear();
    for (const auto& p : j.at("policies")) c.policies.push_back(parse_policy(p));
  }
  c.episodes = j.contains("episodes") ? get<long>(j, "episodes", "config") : c.episodes;
  c.master_seed = j.contains("master_seed") ? get<std::uint64_t>(j, "master_seed", "config") : c.master_seed;
  c.budget_match = j.value("budget_match", c.budget_match);
  c.parallelism = j.contains("parallelism") ? get<int>(j, "parallelism", "config") : c.parallelism;
  c.out_dir = j.value("out_dir", c.out_dir);
  if (j.contains("checks")) c.checks = get<std::vector<std::string>>(j, "checks", "config");
  if (j.contains("solution")) c.solution_file = get<std::string>(j, "solution", "config");
  if (j.contains("constants")) c.constants = get<std::map<std::string, double>>(j, "constants", "config");
  c.assumption_alpha = j.value("assumption_alpha", c.assumption_alpha);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument(fmt::format("cannot open config '{}'", path));
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw InvalidArgument(fmt::format("config '{}' is not valid JSON: {}", path, e.what()));
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  json policies = json::array();
  for (const auto& p : c.policies) policies.push_back(policy_json(p));
  json j = {{"schema_version", kSchemaVersion},
            {"prior", prior_json(c.prior)},
            {"K", c.K},
            {"R", c.R},
            {"L", c.L},
            {"variant", to_string(c.variant)},
            {"policies", policies},
            {"episodes", c.episodes},
            {"master_seed", c.master_seed},
            {"budget_match", c.budget_match},
            {"out_dir", c.out_dir},
            {"checks", c.checks},
            {"assumption_alpha", c.assumption_alpha}};
  if (c.delta0) {
    j["delta0"] = *c.delta0;
  } else {
    j["delta0"] = "auto";
  }
  if (c.variant == Variant::Pac && c.mu0) j["mu0"] = *c.mu0;
  if (c.solution_file) j["solution"] = *c.solution_file;
  if (!c.constants.empty()) j["constants"] = c.constants;
  return j;
}

LpInstance make_instance(const ExperimentConfig& cfg, double delta0) {
  return LpInstance::make(cfg.variant, cfg.prior, cfg.K, cfg.R, cfg.L, delta0,
                          cfg.variant == Variant::Pac ? cfg.mu0 : std::nullopt);
}

double resolve_delta0(const ExperimentConfig& cfg) {
  if (cfg.delta0) return *cfg.delta0;
  return tightest_feasible_delta0(make_instance(cfg, 1.0), 1e-4);
}

}  // namespace lp2s::app
