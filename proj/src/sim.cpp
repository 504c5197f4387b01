#include "lp2s/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <ostream>
#include <set>
#include <thread>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "lp2s/errors.hpp"

namespace lp2s {

Environment make_environment(std::vector<double> mu) {
  if (mu.empty()) throw InvalidArgument("environment needs at least one arm");
  Environment env;
  env.mu = std::move(mu);
  env.mu_star = *std::max_element(env.mu.begin(), env.mu.end());
  for (int j = 0; j < static_cast<int>(env.mu.size()); ++j) {
    if (env.mu[j] == env.mu_star) env.best.push_back(j);
  }
  return env;
}

Environment sample_environment(const PriorSpec& prior, int K, Rng& rng) {
  if (K < 1) throw InvalidArgument("K must be >= 1");
  std::vector<double> mu(K);
  if (prior.is_beta()) {
    const auto& b = prior.as_beta();
    for (auto& m : mu) m = rng.beta(b.alpha, b.beta);
  } else {
    const auto& atoms = prior.as_discrete().atoms;
    for (auto& m : mu) {
      const double u = rng.uniform();
      double cum = 0.0;
      m = atoms.back().mean;
      for (const auto& a : atoms) {
        cum += a.prob;
        if (u < cum) {
          m = a.mean;
          break;
        }
      }
    }
  }
  return make_environment(std::move(mu));
}

int crn_reward(std::uint64_t seed, int arm, long k, double mu) {
  const auto key = derive_seed(seed, static_cast<std::uint64_t>(arm), static_cast<std::uint64_t>(k));
  return unit_from_bits(key) < mu ? 1 : 0;
}

std::vector<std::string> protocol_check(const Trace& batches, int K) {
  std::vector<std::string> out;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto& batch = batches[b];
    if (static_cast<int>(batch.size()) > K) {
      out.push_back(fmt::format("batch {}: {} pulls exceed K = {}", b, batch.size(), K));
    }
    std::set<int> seen;
    for (int j : batch) {
      if (j < 0 || j >= K) out.push_back(fmt::format("batch {}: arm {} out of range", b, j));
      if (!seen.insert(j).second) out.push_back(fmt::format("batch {}: arm {} pulled twice", b, j));
    }
  }
  return out;
}

EpisodeResult run_episode(Policy& policy, const Environment& env, int max_batches, std::uint64_t reward_seed,
                          Trace* trace) {
  const int K = static_cast<int>(env.mu.size());
  if (policy.arms() != K) {
    throw InvalidArgument(fmt::format("policy built for {} arms, environment has {}", policy.arms(), K));
  }
  std::vector<long> count(K, 0);
  int batches = 0;
  while (!policy.finished() && batches < max_batches) {
    const auto arms = policy.decide();
    const auto bad = protocol_check({arms}, K);
    if (!bad.empty()) throw ProtocolError(fmt::format("batch {}: {}", batches, bad.front()));
    std::vector<int> rewards(arms.size());
    for (std::size_t i = 0; i < arms.size(); ++i) {
      const int j = arms[i];
      rewards[i] = crn_reward(reward_seed, j, count[j]++, env.mu[j]);
    }
    policy.observe(arms, rewards);
    if (trace) trace->push_back(arms);
    ++batches;
  }
  EpisodeResult res;
  res.recommended = policy.recommend();
  if (res.recommended < 0 || res.recommended >= K) {
    throw ProtocolError(fmt::format("recommended arm {} out of range", res.recommended));
  }
  res.simple_regret = env.mu_star - env.mu[res.recommended];
  res.is_best = env.mu[res.recommended] == env.mu_star;
  res.total_pulls = policy.pulls_used();
  res.stage1_pulls = policy.stage1_pulls();
  res.stage2_pulls = policy.stage2_pulls();
  res.survivors = policy.survivors();
  return res;
}

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v, double m) {
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(idx, 1, v.size()) - 1];
}

}  // namespace

MetricsSummary summarize(const std::string& policy, const std::vector<EpisodeRow>& rows) {
  if (rows.empty()) throw InvalidArgument("cannot summarize zero episodes");
  std::vector<double> sr;
  std::vector<double> pb;
  std::vector<double> t;
  for (const auto& r : rows) {
    sr.push_back(r.result.simple_regret);
    pb.push_back(r.result.is_best ? 1.0 : 0.0);
    t.push_back(static_cast<double>(r.result.total_pulls));
  }
  MetricsSummary m;
  m.policy = policy;
  m.episodes = static_cast<long>(rows.size());
  m.mean_sr = mean_of(sr);
  m.mean_pb = mean_of(pb);
  m.mean_t = mean_of(t);
  if (rows.size() > 1) {
    const double n = static_cast<double>(rows.size());
    m.se_sr = std::sqrt(var_of(sr, m.mean_sr) / n);
    m.se_pb = std::sqrt(var_of(pb, m.mean_pb) / n);
  }
  m.t_q10 = quantile(t, 0.1);
  m.t_q50 = quantile(t, 0.5);
  m.t_q90 = quantile(t, 0.9);
  return m;
}

MonteCarloResult monte_carlo(const MonteCarloSpec& spec) {
  if (spec.episodes < 1) throw InvalidArgument("Monte Carlo needs at least one episode");
  if (!spec.make) throw InvalidArgument("Monte Carlo needs a policy factory");
  MonteCarloResult out;
  out.rows.resize(spec.episodes);
  std::vector<std::exception_ptr> errors(spec.episodes);
  std::atomic<long> next{0};
  auto worker = [&] {
    while (true) {
      const long e = next.fetch_add(1);
      if (e >= spec.episodes) return;
      try {
        const auto ue = static_cast<std::uint64_t>(e);
        Rng env_rng(derive_seed(spec.master_seed, ue, 0));
        const auto env = sample_environment(spec.prior, spec.K, env_rng);
        auto policy = spec.make(derive_seed(spec.master_seed, ue, 2));
        out.rows[e] = {e, derive_seed(spec.master_seed, ue, 0),
                       run_episode(*policy, env, spec.max_batches, derive_seed(spec.master_seed, ue, 1))};
      } catch (...) {
        errors[e] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(spec.parallelism, static_cast<int>(spec.episodes)));
  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (long e = 0; e < spec.episodes; ++e) {
    if (!errors[e]) continue;
    try {
      std::rethrow_exception(errors[e]);
    } catch (const std::exception& ex) {
      throw std::runtime_error(fmt::format("{} episode {}: {}", spec.policy, e, ex.what()));
    }
  }
  out.summary = summarize(spec.policy, out.rows);
  return out;
}

WelchResult welch_test(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 2 || y.size() < 2) throw InvalidArgument("Welch test needs two samples of size >= 2");
  const double mx = mean_of(x);
  const double my = mean_of(y);
  const double vx = var_of(x, mx) / static_cast<double>(x.size());
  const double vy = var_of(y, my) / static_cast<double>(y.size());
  WelchResult w;
  const double se2 = vx + vy;
  if (se2 == 0.0) {
    w.t = mx == my ? 0.0 : std::copysign(INFINITY, mx - my);
    w.df = static_cast<double>(x.size() + y.size() - 2);
    w.p_value = mx == my ? 1.0 : 0.0;
    return w;
  }
  w.t = (mx - my) / std::sqrt(se2);
  w.df = se2 * se2 /
         (vx * vx / static_cast<double>(x.size() - 1) + vy * vy / static_cast<double>(y.size() - 1));
  const boost::math::students_t dist(w.df);
  w.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(w.t)));
  return w;
}

void write_episode_csv(std::ostream& out, const std::vector<EpisodeRow>& rows, const std::string& policy, int K,
                       int R, bool header) {
  if (header) out << "episode,policy,K,R,seed,recommended,simple_regret,is_best,total_pulls,survivors\n";
  for (const auto& row : rows) {
    const auto& r = row.result;
    out << fmt::format("{},{},{},{},{},{},{:.12g},{},{},{}\n", row.episode, policy, K, R, row.seed, r.recommended,
                       r.simple_regret, r.is_best ? 1 : 0, r.total_pulls,
                       r.survivors >= 0 ? std::to_string(r.survivors) : std::string());
  }
}

}  // namespace lp2s
