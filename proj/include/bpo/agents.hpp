#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "bpo/behaviour.hpp"
#include "bpo/envs.hpp"
#include "bpo/fqe.hpp"
#include "bpo/policies.hpp"
#include "bpo/returns.hpp"

namespace bpo::agents {

enum class AgentKind { reinforce, bpo_reinforce, ppo, bpo_ppo };

bool is_bpo(AgentKind k);
bool is_ppo(AgentKind k);
const char* agent_name(AgentKind k);
std::optional<AgentKind> parse_agent(const std::string& name);

/** Everything one phase of training needs. Mirrors the hyperparameter tables;
 * the harness fills it from the run config. */
struct PhaseConfig {
  int num_steps = 512;   // collection steps per stream per phase (PPO paths)
  int num_envs = 1;      // parallel collection streams
  int n_epochs = 10;     // policy epochs over the batch (PPO)
  int n_qvf_epochs = 8;  // FQE epochs per phase (BPO)
  int n_mu_epochs = 8;   // behaviour-policy steps per phase (BPO)
  int minibatch_size = 64;
  int buffer_capacity = 8192;
  double gamma = 0.99;
  ret::TruncationConfig trunc;  // lambda, c_bar, rho_bar, traj
  double clip_eps = 0.2;
  double beta_value = 0.5;
  double beta_ent = 0.0;
  double lr = 3e-4;            // Adam-based updates
  double alpha_max = 0.1;      // REINFORCE step size, decayed ...
  double alpha_min = 0.01;     // ... exponentially to this floor
  int total_phases = 1000;     // decay horizon / default run length
  bool normalize_advantages = true;
  int eval_episodes = 10;
  double polyak_tau = 0.02;
  fqe::FqeConfig fqe;
  behaviour::ContMuConfig cont_mu;
  // net architecture for value/q heads and MLP policies
  int hidden = 64;
  int n_hidden = 2;
  bool layer_norm = true;
  bool zero_init = true;
  double init_log_std = -1.0;
};

void validate_phase_config(const PhaseConfig& cfg);  // throws naming the field

/** Owning bundle of nets, optimizers, env streams and rng for one run.
 * Non-BPO agents leave mu / q / q_hat empty; non-PPO agents leave the value
 * net empty. */
struct TrainState {
  AgentKind kind = AgentKind::reinforce;
  PhaseConfig cfg;

  std::unique_ptr<policy::Policy> pi;
  std::unique_ptr<policy::Policy> mu;
  std::optional<approx::Mlp> value_net;
  std::optional<approx::Mlp> q_net;
  std::optional<approx::Mlp> qhat_net;

  std::optional<approx::Adam> pi_opt, value_opt, q_opt, qhat_opt, mu_opt;
  std::optional<approx::Polyak> q_shadow, qhat_shadow;

  fqe::ReplayBuffer buffer{1};

  std::vector<std::unique_ptr<envs::Env>> streams;
  std::vector<Rng> stream_rngs;
  std::vector<envs::Obs> pending;      // current observation per stream
  std::vector<char> needs_reset;
  std::unique_ptr<envs::Env> eval_env;
  Rng rng{0};       // update-side draws (minibatch shuffles, buffer sampling)
  Rng eval_rng{0};  // dedicated stream so evaluation never perturbs training

  int phase = 0;
  std::int64_t env_steps = 0;
  double reinforce_alpha() const;  // current decayed step size
};

struct TrainSetup {
  AgentKind kind = AgentKind::reinforce;
  PhaseConfig cfg;
  std::function<std::unique_ptr<envs::Env>()> env_factory;
  // builds pi; mu is cloned from it bitwise for BPO agents...
  std::function<std::unique_ptr<policy::Policy>(Rng&)> policy_factory;
  // ...unless this is set (e.g. a higher-capacity behaviour net)
  std::function<std::unique_ptr<policy::Policy>(Rng&)> mu_factory;
  std::uint64_t seed = 0;
};

TrainState make_train_state(const TrainSetup& setup);

struct PhaseMetrics {
  int phase = 0;
  std::int64_t env_steps = 0;  // cumulative collection steps
  double eval_mean = 0.0;
  double eval_se = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double q_loss = 0.0;
  double qhat_loss = 0.0;
  double mu_loss = 0.0;
  double mean_ratio = 1.0;  // raw pi/mu over the collected batch
  double max_ratio = 1.0;
  double trunc_frac = 0.0;  // fraction of steps where a cap was active
  double qhat_mean = 0.0;
  double qhat_max = 0.0;
  std::vector<std::string> trace;  // ordered step labels for structural checks
};

/** T steps per stream under pi (use_behaviour=false) or mu; episodes
 * auto-reset, a segment ending mid-episode marks its last step truncated.
 * BPO agents also append every transition to the replay buffer. */
ret::RolloutBatch collect_rollout(TrainState& st, bool use_behaviour);

// one complete episode from stream 0 (REINFORCE-style collection)
ret::RolloutBatch collect_episode(TrainState& st, bool use_behaviour);

/** Per-step score-gradient ascent theta += alpha G_t dln pi, walking the
 * episode forward and re-evaluating the score at the updated parameters.
 * Returns are IS-weighted TD(lambda) values with zero value estimates, so the
 * on-policy uncapped case is exactly the Monte Carlo return. */
double reinforce_update(TrainState& st, const ret::RolloutBatch& batch);

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

/** Clipped-surrogate update with IS-weighted TD(lambda) returns computed once
 * from the current value net (collection-time log-probs), then n_epochs of
 * shuffled minibatches on the joint loss. */
PpoStats ppo_update(TrainState& st, const ret::RolloutBatch& batch);

// the clipped per-sample surrogate min(r A, clamp(r, 1-eps, 1+eps) A)
double clip_surrogate(double ratio, double adv, double eps);

/** One full training phase for st.kind: collect, policy update, and for BPO
 * agents the auxiliary steps (FQE epochs on q, r_hat refresh, FQE epochs on
 * q_hat, behaviour steps) in that order, then an evaluation pass. */
PhaseMetrics run_phase(TrainState& st);

struct EvalResult {
  double mean = 0.0;
  double se = 0.0;
};

// undiscounted sampled-action returns over n_episodes
EvalResult evaluate(const policy::Policy& pol, envs::Env& env, int n_episodes, Rng& rng);

}  // namespace bpo::agents
