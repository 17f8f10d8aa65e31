#pragma once

#include <memory>
#include <optional>

#include "bpo/mdp.hpp"

namespace bpo::envs {

/** Action for either kind of action space. Discrete envs read `index`;
 * continuous envs read `cont`. */
struct Action {
  int index = -1;
  Vec cont;
};

struct Obs {
  Vec features;
  int state_id = -1;  // tabular state index, -1 for continuous envs
};

struct StepResult {
  Obs obs;
  double reward = 0.0;
  bool terminated = false;  // reached an absorbing terminal state
  bool truncated = false;   // horizon cut the episode short
};

class Env {
 public:
  virtual ~Env() = default;

  virtual Obs reset(Rng& rng) = 0;
  // throws std::logic_error if called after terminated/truncated without reset
  virtual StepResult step(const Action& a, Rng& rng) = 0;

  virtual int obs_dim() const = 0;
  virtual bool discrete_actions() const = 0;
  virtual int n_actions() const { return 0; }   // discrete envs
  virtual int action_dim() const { return 0; }  // continuous envs
  virtual int horizon() const = 0;
};

enum class TabularObs { kOneHot, kConstant };

/** Rollout wrapper around a TabularMdp. kConstant emits the single aliased
 * feature [1] (used by the corridor, whose states are indistinguishable). */
class TabularEnv : public Env {
 public:
  TabularEnv(mdp::TabularMdp m, int horizon, TabularObs obs_kind = TabularObs::kOneHot);

  Obs reset(Rng& rng) override;
  StepResult step(const Action& a, Rng& rng) override;
  int obs_dim() const override;
  bool discrete_actions() const override { return true; }
  int n_actions() const override { return mdp_.n_actions; }
  int horizon() const override { return horizon_; }

  const mdp::TabularMdp& model() const { return mdp_; }

 private:
  Obs observe() const;

  mdp::TabularMdp mdp_;
  int horizon_;
  TabularObs obs_kind_;
  int state_ = 0;
  int t_ = 0;
  bool needs_reset_ = true;
};

/** 1-D stochastic double integrator. State (position, velocity), force input
 * clipped to [-1, 1], Gaussian noise of scale `noise_scale` added to the
 * velocity each step, reward -(pos^2 + 0.1 a^2). Episodes start at the origin
 * and truncate at the horizon. */
class PointMassEnv : public Env {
 public:
  PointMassEnv(int horizon, double noise_scale);

  Obs reset(Rng& rng) override;
  StepResult step(const Action& a, Rng& rng) override;
  int obs_dim() const override { return 2; }
  bool discrete_actions() const override { return false; }
  int action_dim() const override { return 1; }
  int horizon() const override { return horizon_; }

  static constexpr double kDt = 0.1;
  static constexpr double kMaxForce = 1.0;

 private:
  int horizon_;
  double noise_scale_;
  double pos_ = 0.0;
  double vel_ = 0.0;
  int t_ = 0;
  bool needs_reset_ = true;
};

std::unique_ptr<Env> make_short_corridor_env(int horizon = 1000);
std::unique_ptr<Env> make_tabular_env(const mdp::TabularMdp& m, int horizon);
std::unique_ptr<Env> make_point_mass(int horizon, double noise_scale);

}  // namespace bpo::envs
