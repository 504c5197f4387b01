#include "lp2s/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "lp2s/errors.hpp"

namespace lp2s {

int argmax_random_tie(const std::vector<double>& values, const std::vector<bool>& mask, Rng& rng) {
  int best = -1;
  int ties = 0;
  for (int j = 0; j < static_cast<int>(values.size()); ++j) {
    if (!mask.empty() && !mask[j]) continue;
    if (best < 0 || values[j] > values[best]) {
      best = j;
      ties = 1;
    } else if (values[j] == values[best]) {
      ++ties;
      if (rng.below(ties) == 0) best = j;  // reservoir choice among ties
    }
  }
  return best;
}

ActionRule ActionRule::from(const ActionTable& table) { return {table.R, table.a}; }

ActionRule ActionRule::from(const ThresholdPolicy& policy) {
  ActionRule rule;
  rule.R = policy.rounds();
  rule.a.assign(rule.R * (rule.R + 1) / 2, 0.0);
  for (int r = 0; r < rule.R; ++r) {
    for (int s = 0; s <= r; ++s) rule.a[IndexMap::node_id({r, s})] = policy.action(r, s);
  }
  return rule;
}

namespace {

void check_observation(const std::vector<int>& arms, const std::vector<int>& rewards, int K) {
  if (arms.size() != rewards.size()) throw ProtocolError("reward count differs from pulled arm count");
  for (int j : arms) {
    if (j < 0 || j >= K) throw ProtocolError(fmt::format("observed arm {} out of range", j));
  }
}

std::vector<double> means(const std::vector<ArmState>& arms) {
  std::vector<double> m(arms.size());
  for (std::size_t j = 0; j < arms.size(); ++j) m[j] = arms[j].mean();
  return m;
}

class Lp2sPolicy : public Policy {
 public:
  Lp2sPolicy(ActionRule rule, int K, std::uint64_t seed)
      : rule_(std::move(rule)), K_(K), arms_(K), stage2_(K, 0.0), rng_(seed) {
    if (K < 1) throw InvalidArgument("K must be >= 1");
    if (rule_.R < 1) throw InvalidArgument("action rule needs R >= 1");
  }

  std::string name() const override { return "lp2s"; }
  int arms() const override { return K_; }

  bool finished() const override {
    if (round_ >= 2 * rule_.R) return true;
    return alive_ == 0;
  }

  std::vector<int> decide() override {
    if (finished()) throw ProtocolError("decide() after the policy finished");
    std::vector<int> batch;
    if (round_ < rule_.R) {
      for (int j = 0; j < K_; ++j) {
        auto& arm = arms_[j];
        if (arm.eliminated) continue;
        const double p = rule_.at(static_cast<int>(arm.pulls), static_cast<int>(arm.successes));
        if (rng_.bernoulli(p)) {
          batch.push_back(j);
        } else {
          arm.eliminated = true;
          --alive_;
        }
      }
    } else {
      for (int j = 0; j < K_; ++j) {
        if (!arms_[j].eliminated) batch.push_back(j);
      }
    }
    return batch;
  }

  void observe(const std::vector<int>& arms, const std::vector<int>& rewards) override {
    check_observation(arms, rewards, K_);
    const bool stage1 = round_ < rule_.R;
    for (std::size_t i = 0; i < arms.size(); ++i) {
      auto& arm = arms_[arms[i]];
      if (arm.eliminated) throw ProtocolError(fmt::format("reward for eliminated arm {}", arms[i]));
      if (stage1) {
        ++arm.pulls;
        arm.successes += rewards[i];
        ++stage1_;
      } else {
        stage2_[arms[i]] += rewards[i];
        ++stage2_pulls_;
      }
    }
    ++round_;
  }

  int recommend() override {
    if (!finished()) throw ProtocolError("recommend() before both stages completed");
    if (alive_ == 0) return rng_.below(K_);
    std::vector<bool> mask(K_);
    for (int j = 0; j < K_; ++j) mask[j] = !arms_[j].eliminated;
    return argmax_random_tie(stage2_, mask, rng_);
  }

  long pulls_used() const override { return stage1_ + stage2_pulls_; }
  long stage1_pulls() const override { return stage1_; }
  long stage2_pulls() const override { return stage2_pulls_; }
  int survivors() const override { return round_ >= rule_.R || alive_ == 0 ? alive_ : -1; }

 private:
  ActionRule rule_;
  int K_;
  std::vector<ArmState> arms_;
  std::vector<double> stage2_;
  Rng rng_;
  int round_ = 0;
  int alive_ = K_;
  long stage1_ = 0;
  long stage2_pulls_ = 0;
};

class UniformPolicy : public Policy {
 public:
  UniformPolicy(int K, int rounds, std::uint64_t seed) : K_(K), rounds_(rounds), arms_(K), rng_(seed) {
    if (K < 1) throw InvalidArgument("K must be >= 1");
    if (rounds < 1) throw InvalidArgument("uniform exploration needs at least one round");
  }

  std::string name() const override { return "uniform"; }
  int arms() const override { return K_; }
  bool finished() const override { return round_ >= rounds_; }

  std::vector<int> decide() override {
    if (finished()) throw ProtocolError("decide() after the policy finished");
    std::vector<int> all(K_);
    for (int j = 0; j < K_; ++j) all[j] = j;
    return all;
  }

  void observe(const std::vector<int>& arms, const std::vector<int>& rewards) override {
    check_observation(arms, rewards, K_);
    for (std::size_t i = 0; i < arms.size(); ++i) {
      ++arms_[arms[i]].pulls;
      arms_[arms[i]].successes += rewards[i];
      ++pulls_;
    }
    ++round_;
  }

  int recommend() override {
    if (!finished()) throw ProtocolError("recommend() before all rounds ran");
    std::vector<double> wins(K_);
    for (int j = 0; j < K_; ++j) wins[j] = static_cast<double>(arms_[j].successes);
    return argmax_random_tie(wins, {}, rng_);
  }

  long pulls_used() const override { return pulls_; }

 private:
  int K_;
  int rounds_;
  std::vector<ArmState> arms_;
  Rng rng_;
  int round_ = 0;
  long pulls_ = 0;
};

class RacingPolicy : public Policy {
 public:
  RacingPolicy(int K, const RacingOptions& opt, std::uint64_t seed)
      : K_(K), opt_(opt), arms_(K), rng_(seed), omega_(std::sqrt(opt.delta / (6.0 * K))) {
    if (K < 1) throw InvalidArgument("K must be >= 1");
    if (!(opt.delta > 0.0 && opt.delta < 1.0)) throw InvalidArgument("racing delta must lie in (0,1)");
    if (opt.max_batches < 1) throw InvalidArgument("racing needs max_batches >= 1");
    if (K == 1) accepted_ = 0;
  }

  std::string name() const override { return "batch_racing"; }
  int arms() const override { return K_; }

  bool finished() const override {
    if (accepted_ >= 0 || batches_ >= opt_.max_batches) return true;
    return opt_.budget >= 0 && pulls_ + active_count() > opt_.budget;
  }

  std::vector<int> decide() override {
    if (finished()) throw ProtocolError("decide() after the policy finished");
    std::vector<int> batch;
    for (int j = 0; j < K_; ++j) {
      if (!arms_[j].eliminated) batch.push_back(j);
    }
    return batch;
  }

  void observe(const std::vector<int>& arms, const std::vector<int>& rewards) override {
    check_observation(arms, rewards, K_);
    for (std::size_t i = 0; i < arms.size(); ++i) {
      ++arms_[arms[i]].pulls;
      arms_[arms[i]].successes += rewards[i];
      ++pulls_;
    }
    ++batches_;
    update();
  }

  int recommend() override {
    if (!finished()) throw ProtocolError("recommend() while racing is still running");
    if (accepted_ >= 0) return accepted_;
    std::vector<bool> mask(K_);
    for (int j = 0; j < K_; ++j) mask[j] = !arms_[j].eliminated;
    return argmax_random_tie(means(arms_), mask, rng_);
  }

  long pulls_used() const override { return pulls_; }

 private:
  int active_count() const {
    return static_cast<int>(std::count_if(arms_.begin(), arms_.end(), [](const ArmState& a) { return !a.eliminated; }));
  }

  void update() {
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    std::vector<double> lo(K_, kNegInf);
    std::vector<double> hi(K_, kNegInf);
    double best_lo = kNegInf;
    for (int j = 0; j < K_; ++j) {
      const auto& a = arms_[j];
      if (a.eliminated || a.pulls == 0) continue;
      const double d = racing_deviation(a.pulls, omega_);
      lo[j] = a.mean() - d;
      hi[j] = a.mean() + d;
      best_lo = std::max(best_lo, lo[j]);
    }
    for (int j = 0; j < K_; ++j) {
      if (!arms_[j].eliminated && hi[j] < best_lo) arms_[j].eliminated = true;
    }
    for (int j = 0; j < K_; ++j) {
      if (arms_[j].eliminated) continue;
      double rival = kNegInf;
      for (int i = 0; i < K_; ++i) {
        if (i != j && !arms_[i].eliminated) rival = std::max(rival, hi[i]);
      }
      if (lo[j] > rival) {
        accepted_ = j;
        return;
      }
    }
  }

  int K_;
  RacingOptions opt_;
  std::vector<ArmState> arms_;
  Rng rng_;
  double omega_;
  int batches_ = 0;
  long pulls_ = 0;
  int accepted_ = -1;
};

class TsePolicy : public Policy {
 public:
  TsePolicy(int K, double q, long T, std::uint64_t seed) : K_(K), T_(T), arms_(K), rng_(seed) {
    if (K < 1) throw InvalidArgument("K must be >= 1");
    if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("TSE q must lie in (0,1)");
    n1_ = static_cast<long>(std::floor(q * static_cast<double>(T) / K));
    if (n1_ < 1) throw InvalidArgument(fmt::format("TSE needs qT/K >= 1, got {:.3g}", q * T / K));
  }

  std::string name() const override { return "tse"; }
  int arms() const override { return K_; }
  bool finished() const override { return screened_ && full_rounds_ == 0 && leftover_ == 0; }

  std::vector<int> decide() override {
    if (finished()) throw ProtocolError("decide() after the policy finished");
    std::vector<int> batch;
    if (!screened_) {
      for (int j = 0; j < K_; ++j) batch.push_back(j);
    } else if (full_rounds_ > 0) {
      batch = kept_;
      --full_rounds_;
    } else {
      batch.assign(kept_.begin(), kept_.begin() + leftover_);
      leftover_ = 0;
    }
    return batch;
  }

  void observe(const std::vector<int>& arms, const std::vector<int>& rewards) override {
    check_observation(arms, rewards, K_);
    for (std::size_t i = 0; i < arms.size(); ++i) {
      ++arms_[arms[i]].pulls;
      arms_[arms[i]].successes += rewards[i];
      ++pulls_;
    }
    if (!screened_ && ++round_ == n1_) screen();
  }

  int recommend() override {
    if (!finished()) throw ProtocolError("recommend() before the budget is spent");
    std::vector<bool> mask(K_, false);
    for (int j : kept_) mask[j] = true;
    return argmax_random_tie(means(arms_), mask, rng_);
  }

  long pulls_used() const override { return pulls_; }
  long stage1_pulls() const override { return std::min(pulls_, n1_ * K_); }
  long stage2_pulls() const override { return pulls_ - stage1_pulls(); }
  int survivors() const override { return screened_ ? static_cast<int>(kept_.size()) : -1; }

 private:
  void screen() {
    const double width = std::sqrt(std::log(static_cast<double>(T_)) / static_cast<double>(n1_));
    double best_lo = -std::numeric_limits<double>::infinity();
    for (const auto& a : arms_) best_lo = std::max(best_lo, a.mean() - width);
    for (int j = 0; j < K_; ++j) {
      if (arms_[j].mean() + width >= best_lo) kept_.push_back(j);
    }
    const long rest = std::max(0L, T_ - n1_ * K_);
    const long m = static_cast<long>(kept_.size());
    full_rounds_ = rest / m;
    leftover_ = static_cast<int>(rest % m);
    screened_ = true;
  }

  int K_;
  long T_;
  long n1_ = 0;
  std::vector<ArmState> arms_;
  Rng rng_;
  long round_ = 0;
  long pulls_ = 0;
  bool screened_ = false;
  std::vector<int> kept_;
  long full_rounds_ = 0;
  int leftover_ = 0;
};

class ThompsonPolicy : public Policy {
 public:
  ThompsonPolicy(int K, const PriorSpec& prior, const ThompsonOptions& opt, std::uint64_t seed)
      : K_(K), opt_(opt), arms_(K), batch_pulls_(K, 0), batch_wins_(K, 0), pending_(K, 0), rng_(seed) {
    if (K < 1) throw InvalidArgument("K must be >= 1");
    if (!prior.is_beta()) throw InvalidArgument("batched Thompson sampling needs a Beta prior");
    if (!(opt.alpha > 1.0)) throw InvalidArgument("batch growth factor alpha must exceed 1");
    if (opt.budget < 0) throw InvalidArgument("budget must be non-negative");
    a_ = prior.as_beta().alpha;
    b_ = prior.as_beta().beta;
  }

  std::string name() const override { return "batched_thompson"; }
  int arms() const override { return K_; }
  bool finished() const override { return scheduled_ >= opt_.budget && in_flight_ == 0; }

  std::vector<int> decide() override {
    if (finished()) throw ProtocolError("decide() after the policy finished");
    if (in_flight_ == 0) plan_batch();
    std::vector<int> sub;
    for (int j = 0; j < K_; ++j) {
      if (pending_[j] > 0) {
        sub.push_back(j);
        --pending_[j];
      }
    }
    return sub;
  }

  void observe(const std::vector<int>& arms, const std::vector<int>& rewards) override {
    check_observation(arms, rewards, K_);
    for (std::size_t i = 0; i < arms.size(); ++i) {
      ++batch_pulls_[arms[i]];
      batch_wins_[arms[i]] += rewards[i];
      ++pulls_;
      --in_flight_;
    }
    if (in_flight_ == 0) {
      for (int j = 0; j < K_; ++j) {
        arms_[j].pulls += batch_pulls_[j];
        arms_[j].successes += batch_wins_[j];
        batch_pulls_[j] = 0;
        batch_wins_[j] = 0;
      }
    }
  }

  int recommend() override {
    if (!finished()) throw ProtocolError("recommend() before the budget is spent");
    std::vector<bool> mask(K_);
    bool any = false;
    for (int j = 0; j < K_; ++j) any |= (mask[j] = arms_[j].pulls > 0);
    if (!any) return rng_.below(K_);
    return argmax_random_tie(means(arms_), mask, rng_);
  }

  long pulls_used() const override { return pulls_; }

 private:
  void plan_batch() {
    const double want = std::ceil(std::pow(opt_.alpha, static_cast<double>(batch_index_++)));
    const long size = std::min(opt_.budget - scheduled_, want >= 9e18 ? opt_.budget : static_cast<long>(want));
    std::vector<double> theta(K_);
    for (long k = 0; k < size; ++k) {
      for (int j = 0; j < K_; ++j) {
        theta[j] = rng_.beta(a_ + arms_[j].successes, b_ + arms_[j].pulls - arms_[j].successes);
      }
      ++pending_[argmax_random_tie(theta, {}, rng_)];
    }
    scheduled_ += size;
    in_flight_ = size;
  }

  int K_;
  ThompsonOptions opt_;
  std::vector<ArmState> arms_;
  std::vector<long> batch_pulls_;
  std::vector<long> batch_wins_;
  std::vector<long> pending_;
  Rng rng_;
  double a_ = 1.0;
  double b_ = 1.0;
  int batch_index_ = 0;
  long scheduled_ = 0;
  long in_flight_ = 0;
  long pulls_ = 0;
};

}  // namespace

double racing_deviation(long t, double omega) {
  if (t < 1) throw InvalidArgument("racing deviation needs t >= 1");
  const double td = static_cast<double>(t);
  return std::sqrt(std::log(4.0 * td * td / omega) / (2.0 * td));
}

std::unique_ptr<Policy> make_lp2s(const ActionRule& actions, int K, std::uint64_t seed) {
  return std::make_unique<Lp2sPolicy>(actions, K, seed);
}

std::unique_ptr<Policy> make_uniform(int K, int rounds, std::uint64_t seed) {
  return std::make_unique<UniformPolicy>(K, rounds, seed);
}

std::unique_ptr<Policy> make_batch_racing(int K, const RacingOptions& options, std::uint64_t seed) {
  return std::make_unique<RacingPolicy>(K, options, seed);
}

std::unique_ptr<Policy> make_tse(int K, double q, long T, std::uint64_t seed) {
  return std::make_unique<TsePolicy>(K, q, T, seed);
}

std::unique_ptr<Policy> make_batched_thompson(int K, const PriorSpec& prior, const ThompsonOptions& options,
                                              std::uint64_t seed) {
  return std::make_unique<ThompsonPolicy>(K, prior, options, seed);
}

}  // namespace lp2s
