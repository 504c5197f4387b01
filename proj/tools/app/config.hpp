#pragma once
// Experiment configuration: JSON document plus command-line overrides.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lp2s/lp_model.hpp"
#include "lp2s/prior.hpp"

namespace lp2s::app {

inline constexpr int kSchemaVersion = 1;

struct PolicyConfig {
  std::string name;  // lp2s | uniform | batch_racing | tse | batched_thompson
  std::optional<int> rounds;   // uniform
  double delta = 0.05;         // batch_racing
  int max_batches = 1000;      // batch_racing
  double q = 0.5;              // tse
  double alpha = 2.0;          // batched_thompson
  std::optional<long> budget;  // tse, batched_thompson, batch_racing

  static PolicyConfig named(std::string n) {
    PolicyConfig p;
    p.name = std::move(n);
    return p;
  }
};

struct ExperimentConfig {
  PriorSpec prior = PriorSpec::beta(1.0, 1.0);
  int K = 200;
  int R = 40;
  double L = 9.0;
  std::optional<double> delta0;  // empty means "auto"
  Variant variant = Variant::Pac;
  std::optional<double> mu0 = 0.7;
  std::vector<PolicyConfig> policies{PolicyConfig::named("lp2s")};
  long episodes = 100;
  std::uint64_t master_seed = 1;
  bool budget_match = true;
  int parallelism = 1;
  std::string out_dir = "out";
  std::vector<std::string> checks;  // simulate: thm4, cost
  std::optional<std::string> solution_file;  // bounds
  std::map<std::string, double> constants;   // C1, C2, C3, c, alpha0 for thm3/thm5
  double assumption_alpha = 1.0;

  // Cross-field checks; throws InvalidArgument.
  void validate() const;
  bool wants(const std::string& policy) const;
};

// Unknown keys are rejected so that typos surface as config errors.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

// Instance for the configured variant at a concrete delta0.
LpInstance make_instance(const ExperimentConfig& cfg, double delta0);

// The configured delta0, or the tightest feasible one (tol 1e-4) when "auto".
double resolve_delta0(const ExperimentConfig& cfg);

}  // namespace lp2s::app
