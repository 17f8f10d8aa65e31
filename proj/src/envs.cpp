#include "bpo/envs.hpp"

#include <algorithm>

namespace bpo::envs {

TabularEnv::TabularEnv(mdp::TabularMdp m, int horizon, TabularObs obs_kind)
    : mdp_(std::move(m)), horizon_(horizon), obs_kind_(obs_kind) {
  mdp::require_valid(mdp_);
  require(horizon > 0, "TabularEnv: horizon must be positive");
}

Obs TabularEnv::observe() const {
  Obs o;
  o.state_id = state_;
  if (obs_kind_ == TabularObs::kOneHot) {
    o.features.assign(mdp_.n_states, 0.0);
    o.features[state_] = 1.0;
  } else {
    o.features = {1.0};
  }
  return o;
}

Obs TabularEnv::reset(Rng& rng) {
  state_ = static_cast<int>(rng.categorical(mdp_.initial));
  t_ = 0;
  needs_reset_ = false;
  return observe();
}

StepResult TabularEnv::step(const Action& a, Rng& rng) {
  if (needs_reset_) throw std::logic_error("TabularEnv::step: episode over, call reset first");
  require(a.index >= 0 && a.index < mdp_.n_actions,
          "TabularEnv::step: action index out of range");
  StepResult res;
  res.reward = mdp_.r(state_, a.index);
  state_ = static_cast<int>(rng.categorical(mdp_.row(state_, a.index)));
  ++t_;
  res.terminated = mdp_.is_terminal(state_);
  res.truncated = !res.terminated && t_ >= horizon_;
  res.obs = observe();
  needs_reset_ = res.terminated || res.truncated;
  return res;
}

int TabularEnv::obs_dim() const {
  return obs_kind_ == TabularObs::kOneHot ? mdp_.n_states : 1;
}

PointMassEnv::PointMassEnv(int horizon, double noise_scale)
    : horizon_(horizon), noise_scale_(noise_scale) {
  require(horizon > 0, "PointMassEnv: horizon must be positive");
  require(noise_scale >= 0.0, "PointMassEnv: noise_scale must be non-negative");
}

Obs PointMassEnv::reset(Rng&) {
  pos_ = 0.0;
  vel_ = 0.0;
  t_ = 0;
  needs_reset_ = false;
  return {{pos_, vel_}, -1};
}

StepResult PointMassEnv::step(const Action& a, Rng& rng) {
  if (needs_reset_) throw std::logic_error("PointMassEnv::step: episode over, call reset first");
  require(a.cont.size() == 1, "PointMassEnv::step: expected a 1-d continuous action");
  const double force = std::clamp(a.cont[0], -kMaxForce, kMaxForce);
  vel_ += kDt * force;
  if (noise_scale_ > 0.0) vel_ += noise_scale_ * rng.normal();
  pos_ += kDt * vel_;
  ++t_;
  StepResult res;
  res.reward = -(pos_ * pos_ + 0.1 * force * force);
  res.terminated = false;
  res.truncated = t_ >= horizon_;
  res.obs = {{pos_, vel_}, -1};
  needs_reset_ = res.truncated;
  return res;
}

std::unique_ptr<Env> make_short_corridor_env(int horizon) {
  return std::make_unique<TabularEnv>(mdp::make_short_corridor(), horizon, TabularObs::kConstant);
}

std::unique_ptr<Env> make_tabular_env(const mdp::TabularMdp& m, int horizon) {
  return std::make_unique<TabularEnv>(m, horizon, TabularObs::kOneHot);
}

std::unique_ptr<Env> make_point_mass(int horizon, double noise_scale) {
  return std::make_unique<PointMassEnv>(horizon, noise_scale);
}

}  // namespace bpo::envs
