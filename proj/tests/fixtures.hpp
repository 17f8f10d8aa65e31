#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bpo/common.hpp"
#include "bpo/mdp.hpp"
#include "bpo/policies.hpp"
#include "bpo/returns.hpp"

namespace bpo::test {

/** Fixed tabular policy over one-hot observations; no trainable parameters.
 * Lets tests pin an exact pi while nets learn around it. */
class TablePolicy final : public policy::Policy {
 public:
  explicit TablePolicy(mdp::TabularPolicy rows) : rows_(std::move(rows)) {}

  static int state_of(std::span<const double> obs) {
    for (std::size_t i = 0; i < obs.size(); ++i)
      if (obs[i] > 0.5) return static_cast<int>(i);
    throw std::logic_error("TablePolicy: observation is not one-hot");
  }

  bool discrete() const override { return true; }
  int n_actions() const override { return rows_.n_actions; }
  std::unique_ptr<policy::Policy> clone() const override {
    return std::make_unique<TablePolicy>(rows_);
  }
  std::size_t n_params() const override { return 0; }
  Vec get_params() const override { return {}; }
  void set_params(std::span<const double>) override {}

  envs::Action sample(std::span<const double> obs, Rng& rng) const override {
    envs::Action a;
    a.index = static_cast<int>(rng.categorical(rows_.row(state_of(obs))));
    return a;
  }
  double log_prob(std::span<const double> obs, const envs::Action& a) const override {
    return std::log(rows_.at(state_of(obs), a.index));
  }
  void accumulate_logprob_grad(std::span<const double>, const envs::Action&, double,
                               Vec&) const override {}
  double entropy(std::span<const double> obs) const override {
    double h = 0.0;
    for (double p : rows_.row(state_of(obs)))
      if (p > 0.0) h -= p * std::log(p);
    return h;
  }
  void accumulate_entropy_grad(std::span<const double>, double, Vec&) const override {}
  Vec action_probs(std::span<const double> obs) const override {
    const auto r = rows_.row(state_of(obs));
    return Vec(r.begin(), r.end());
  }

 private:
  mdp::TabularPolicy rows_;
};

/** One-episode batch from parallel per-step arrays. */
inline ret::RolloutBatch episode(Vec rewards, Vec log_mu, Vec log_pi, bool terminated) {
  const std::size_t n = rewards.size();
  ret::RolloutBatch b;
  b.obs.assign(n, Vec{});
  b.state_ids.assign(n, 0);
  b.actions.resize(n);
  b.rewards = std::move(rewards);
  b.log_mu = std::move(log_mu);
  b.log_pi = std::move(log_pi);
  b.done.assign(n, 0);
  b.truncated.assign(n, 0);
  (terminated ? b.done : b.truncated)[n - 1] = 1;
  b.ep_start = {0};
  return b;
}

/** Multi-episode batch with random lengths, rewards, off-policy log-probs and
 * end flags; per-step value inputs are the caller's business. */
inline ret::RolloutBatch random_batch(Rng& rng, int n_episodes, int max_len) {
  ret::RolloutBatch b;
  for (int e = 0; e < n_episodes; ++e) {
    b.ep_start.push_back(b.rewards.size());
    const int len = 1 + static_cast<int>(rng.index(max_len));
    for (int t = 0; t < len; ++t) {
      b.obs.push_back(Vec{});
      b.state_ids.push_back(t);
      b.actions.emplace_back();
      b.rewards.push_back(rng.uniform(-1.0, 1.0));
      const double pm = rng.uniform(0.15, 1.0);
      const double pp = rng.uniform(0.05, 1.0);
      b.log_mu.push_back(std::log(pm));
      b.log_pi.push_back(std::log(pp));
      b.done.push_back(0);
      b.truncated.push_back(0);
    }
    (rng.uniform() < 0.5 ? b.done : b.truncated)[b.rewards.size() - 1] = 1;
  }
  return b;
}

inline Vec random_values(Rng& rng, std::size_t n) {
  Vec v(n);
  for (auto& x : v) x = rng.normal(0.0, 1.5);
  return v;
}

}  // namespace bpo::test
