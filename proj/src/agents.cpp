#include "bpo/agents.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bpo::agents {

bool is_bpo(AgentKind k) { return k == AgentKind::bpo_reinforce || k == AgentKind::bpo_ppo; }
bool is_ppo(AgentKind k) { return k == AgentKind::ppo || k == AgentKind::bpo_ppo; }

const char* agent_name(AgentKind k) {
  switch (k) {
    case AgentKind::reinforce: return "reinforce";
    case AgentKind::bpo_reinforce: return "bpo-reinforce";
    case AgentKind::ppo: return "ppo";
    case AgentKind::bpo_ppo: return "bpo-ppo";
  }
  return "?";
}

std::optional<AgentKind> parse_agent(const std::string& name) {
  for (AgentKind k : {AgentKind::reinforce, AgentKind::bpo_reinforce, AgentKind::ppo,
                      AgentKind::bpo_ppo})
    if (name == agent_name(k)) return k;
  return std::nullopt;
}

void validate_phase_config(const PhaseConfig& cfg) {
  auto bad = [](const std::string& field) {
    throw std::invalid_argument("PhaseConfig: invalid " + field);
  };
  if (cfg.num_steps <= 0) bad("num_steps");
  if (cfg.num_envs <= 0) bad("num_envs");
  if (cfg.n_epochs <= 0) bad("n_epochs");
  if (cfg.n_qvf_epochs < 0) bad("n_qvf_epochs");
  if (cfg.n_mu_epochs < 0) bad("n_mu_epochs");
  if (cfg.minibatch_size <= 0) bad("minibatch_size");
  if (cfg.buffer_capacity <= 0) bad("buffer_capacity");
  if (!(cfg.gamma >= 0.0 && cfg.gamma < 1.0)) bad("gamma");
  if (!(cfg.clip_eps > 0.0 && cfg.clip_eps < 1.0)) bad("clip_eps");
  if (cfg.beta_value < 0.0) bad("beta_value");
  if (cfg.beta_ent < 0.0) bad("beta_ent");
  if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) bad("lr");
  if (!(cfg.alpha_max > 0.0) || !(cfg.alpha_min > 0.0) || cfg.alpha_min > cfg.alpha_max)
    bad("alpha_max/alpha_min");
  if (cfg.total_phases <= 0) bad("total_phases");
  if (cfg.eval_episodes <= 0) bad("eval_episodes");
  if (!(cfg.polyak_tau > 0.0 && cfg.polyak_tau <= 1.0)) bad("polyak_tau");
  if (cfg.fqe.batch_size <= 0) bad("fqe.batch_size");
  if (cfg.fqe.pi_samples <= 0) bad("fqe.pi_samples");
  if (cfg.hidden <= 0 || cfg.n_hidden < 0) bad("hidden/n_hidden");
  ret::validate(cfg.trunc);
}

double TrainState::reinforce_alpha() const {
  const double span = std::max(1, cfg.total_phases - 1);
  const double frac = std::min(1.0, static_cast<double>(phase) / span);
  return cfg.alpha_max * std::pow(cfg.alpha_min / cfg.alpha_max, frac);
}

TrainState make_train_state(const TrainSetup& setup) {
  validate_phase_config(setup.cfg);
  require(static_cast<bool>(setup.env_factory), "make_train_state: env_factory required");
  require(static_cast<bool>(setup.policy_factory), "make_train_state: policy_factory required");

  TrainState st;
  st.kind = setup.kind;
  st.cfg = setup.cfg;
  st.rng = Rng(setup.seed);
  Rng init_rng = st.rng.child(1);
  st.eval_rng = st.rng.child(2);

  for (int i = 0; i < setup.cfg.num_envs; ++i) {
    st.streams.push_back(setup.env_factory());
    st.stream_rngs.push_back(st.rng.child(100 + static_cast<std::uint64_t>(i)));
  }
  st.pending.resize(setup.cfg.num_envs);
  st.needs_reset.assign(setup.cfg.num_envs, 1);
  st.eval_env = setup.env_factory();

  st.pi = setup.policy_factory(init_rng);
  require(st.pi != nullptr, "make_train_state: policy_factory returned null");

  approx::AdamConfig adam;
  adam.lr = setup.cfg.lr;
  const approx::Head head = setup.cfg.fqe.symlog ? approx::Head::symlog : approx::Head::linear;

  if (is_ppo(setup.kind)) {
    approx::MlpConfig vcfg;
    vcfg.in_dim = st.eval_env->obs_dim();
    vcfg.out_dim = 1;
    vcfg.hidden = setup.cfg.hidden;
    vcfg.n_hidden = setup.cfg.n_hidden;
    vcfg.layer_norm = setup.cfg.layer_norm;
    vcfg.zero_init_head = setup.cfg.zero_init;
    vcfg.head = head;
    st.value_net.emplace(vcfg, init_rng);
    st.value_opt.emplace(st.value_net->n_params(), adam);
    st.pi_opt.emplace(st.pi->n_params(), adam);
  }

  if (is_bpo(setup.kind)) {
    st.mu = setup.mu_factory ? setup.mu_factory(init_rng)
                             : st.pi->clone();  // same seed by construction: bitwise-equal start
    require(st.mu != nullptr, "make_train_state: mu_factory returned null");
    st.mu_opt.emplace(st.mu->n_params(), adam);

    const bool disc = st.eval_env->discrete_actions();
    approx::MlpConfig qcfg;
    qcfg.in_dim = st.eval_env->obs_dim() + (disc ? st.eval_env->n_actions()
                                                 : st.eval_env->action_dim());
    qcfg.out_dim = 1;
    qcfg.hidden = setup.cfg.hidden;
    qcfg.n_hidden = setup.cfg.n_hidden;
    qcfg.layer_norm = setup.cfg.layer_norm;
    qcfg.zero_init_head = setup.cfg.zero_init;
    qcfg.head = head;
    st.q_net.emplace(qcfg, init_rng);
    st.qhat_net.emplace(qcfg, init_rng);
    st.q_opt.emplace(st.q_net->n_params(), adam);
    st.qhat_opt.emplace(st.qhat_net->n_params(), adam);
    st.q_shadow.emplace(st.q_net->params(), setup.cfg.polyak_tau);
    st.qhat_shadow.emplace(st.qhat_net->params(), setup.cfg.polyak_tau);
    st.buffer = fqe::ReplayBuffer(static_cast<std::size_t>(setup.cfg.buffer_capacity));
  }

  st.rng = st.rng.child(3);  // update-side stream, decoupled from construction
  return st;
}

namespace {

/** Steps one stream, appending to the batch (and buffer for BPO agents).
 * Runs until `steps` are taken, or until the first episode ends when
 * one_episode is set. */
void roll_stream(TrainState& st, int stream, int steps, bool one_episode,
                 const policy::Policy& actor, ret::RolloutBatch& b) {
  envs::Env& env = *st.streams[stream];
  Rng& rng = st.stream_rngs[stream];
  if (st.needs_reset[stream]) {
    st.pending[stream] = env.reset(rng);
    st.needs_reset[stream] = 0;
  }

  bool open = false;
  for (int t = 0; one_episode || t < steps; ++t) {
    if (!open) {
      b.ep_start.push_back(b.n_steps());
      open = true;
    }
    const envs::Obs obs = st.pending[stream];
    const envs::Action a = actor.sample(obs.features, rng);
    const double log_mu = actor.log_prob(obs.features, a);
    const double log_pi = (&actor == st.pi.get()) ? log_mu : st.pi->log_prob(obs.features, a);
    const envs::StepResult res = env.step(a, rng);

    b.obs.push_back(obs.features);
    b.state_ids.push_back(obs.state_id);
    b.actions.push_back(a);
    b.rewards.push_back(res.reward);
    b.next_obs.push_back(res.obs.features);
    b.next_state_ids.push_back(res.obs.state_id);
    b.done.push_back(res.terminated ? 1 : 0);
    b.truncated.push_back(res.truncated ? 1 : 0);
    b.log_mu.push_back(log_mu);
    b.log_pi.push_back(log_pi);

    if (is_bpo(st.kind)) {
      fqe::Transition tr;
      tr.obs = obs.features;
      tr.action = a;
      tr.reward = res.reward;
      tr.next_obs = res.obs.features;
      tr.done = res.terminated;
      tr.log_mu = log_mu;
      tr.log_pi = log_pi;
      st.buffer.add(std::move(tr));
    }

    if (res.terminated || res.truncated) {
      open = false;
      st.pending[stream] = env.reset(rng);
      if (one_episode) return;
    } else {
      st.pending[stream] = res.obs;
    }
  }
  if (open) b.truncated.back() = 1;  // batch cut mid-episode: bootstrap from V(S_T)
}

const policy::Policy& select_actor(const TrainState& st, bool use_behaviour) {
  if (use_behaviour) {
    require(st.mu != nullptr, "collect: agent has no behaviour policy");
    return *st.mu;
  }
  return *st.pi;
}

}  // namespace

ret::RolloutBatch collect_rollout(TrainState& st, bool use_behaviour) {
  const policy::Policy& actor = select_actor(st, use_behaviour);
  ret::RolloutBatch b;
  for (std::size_t i = 0; i < st.streams.size(); ++i)
    roll_stream(st, static_cast<int>(i), st.cfg.num_steps, false, actor, b);
  b.check_consistent();
  st.env_steps += static_cast<std::int64_t>(b.n_steps());
  return b;
}

ret::RolloutBatch collect_episode(TrainState& st, bool use_behaviour) {
  const policy::Policy& actor = select_actor(st, use_behaviour);
  ret::RolloutBatch b;
  roll_stream(st, 0, 0, true, actor, b);
  b.check_consistent();
  st.env_steps += static_cast<std::int64_t>(b.n_steps());
  return b;
}

double reinforce_update(TrainState& st, const ret::RolloutBatch& batch) {
  const std::size_t n = batch.n_steps();
  require(n > 0, "reinforce_update: empty batch");
  const Vec zeros(n, 0.0);
  const Vec boot(batch.n_episodes(), 0.0);
  const Vec g_ret = ret::tis_td_lambda_returns(batch, zeros, boot, st.cfg.trunc, st.cfg.gamma);

  // one gradient-ascent step per phase on the mean return-weighted score,
  // (1/T) sum_t G_t grad ln pi; a raw per-step sweep at alpha=0.1 would swing
  // the logits by alpha*|G| ~ 10 per step and saturate the policy immediately
  const double alpha = st.reinforce_alpha();
  policy::Policy& pi = *st.pi;
  Vec grad(pi.n_params(), 0.0);
  double mean_return = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    pi.accumulate_logprob_grad(batch.obs[t], batch.actions[t],
                               g_ret[t] / static_cast<double>(n), grad);
    mean_return += g_ret[t] / static_cast<double>(n);
  }
  Vec p = pi.get_params();
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] += alpha * grad[i];
    if (!std::isfinite(p[i]))
      throw std::runtime_error("reinforce_update: non-finite parameter " + std::to_string(i));
  }
  pi.set_params(p);
  return mean_return;
}

double clip_surrogate(double ratio, double adv, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv;
  return std::min(ratio * adv, clipped);
}

PpoStats ppo_update(TrainState& st, const ret::RolloutBatch& batch) {
  require(st.value_net.has_value(), "ppo_update: agent has no value net");
  const auto& cfg = st.cfg;
  const std::size_t n = batch.n_steps();
  require(n > 0, "ppo_update: empty batch");

  // returns and advantages are computed once, against the current value net
  Vec values(n);
  for (std::size_t t = 0; t < n; ++t) values[t] = st.value_net->predict(batch.obs[t])[0];
  Vec boot(batch.n_episodes(), 0.0);
  for (std::size_t e = 0; e < batch.n_episodes(); ++e)
    if (!batch.ep_terminated(e))
      boot[e] = st.value_net->predict(batch.next_obs[batch.ep_end(e) - 1])[0];
  const Vec g_ret = ret::tis_td_lambda_returns(batch, values, boot, cfg.trunc, cfg.gamma);
  Vec adv = ret::advantages(g_ret, values);

  if (cfg.normalize_advantages && n > 1) {
    const double m = mean_of(adv);
    double sd = 0.0;
    for (double a : adv) sd += (a - m) * (a - m);
    sd = std::sqrt(sd / static_cast<double>(n));
    for (auto& a : adv) a = (a - m) / (sd + 1e-8);
  }

  const bool symlog_head = st.value_net->config().head == approx::Head::symlog;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);

  PpoStats acc;
  int n_minibatches = 0;
  Vec pg(st.pi->n_params());
  Vec vg(st.value_net->n_params());

  for (int epoch = 0; epoch < cfg.n_epochs; ++epoch) {
    for (std::size_t j = n; j > 1; --j) std::swap(idx[j - 1], idx[st.rng.index(j)]);
    for (std::size_t lo = 0; lo < n; lo += static_cast<std::size_t>(cfg.minibatch_size)) {
      const std::size_t hi = std::min(n, lo + static_cast<std::size_t>(cfg.minibatch_size));
      const double M = static_cast<double>(hi - lo);
      std::fill(pg.begin(), pg.end(), 0.0);
      std::fill(vg.begin(), vg.end(), 0.0);
      double ploss = 0.0, vloss = 0.0, ent = 0.0;

      for (std::size_t k = lo; k < hi; ++k) {
        const std::size_t t = idx[k];
        const Vec& obs = batch.obs[t];

        const double lp = st.pi->log_prob(obs, batch.actions[t]);
        const double ratio = std::exp(lp - batch.log_mu[t]);
        const double surr = clip_surrogate(ratio, adv[t], cfg.clip_eps);
        ploss -= surr / M;
        // min picks the unclipped branch: only then does the gradient flow
        if (ratio * adv[t] <= surr + 0.0)
          st.pi->accumulate_logprob_grad(obs, batch.actions[t], -adv[t] * ratio / M, pg);

        ent += st.pi->entropy(obs) / M;
        if (cfg.beta_ent != 0.0)
          st.pi->accumulate_entropy_grad(obs, -cfg.beta_ent / M, pg);

        const double raw = st.value_net->raw(obs)[0];
        const double target = symlog_head ? symlog(g_ret[t]) : g_ret[t];
        vloss += (raw - target) * (raw - target) / M;
        const double gv = cfg.beta_value * 2.0 * (raw - target) / M;
        st.value_net->accumulate_raw_grad(obs, std::span<const double>(&gv, 1), vg);
      }
      if (!std::isfinite(ploss) || !std::isfinite(vloss))
        throw std::runtime_error("ppo_update: non-finite loss");

      Vec p = st.pi->get_params();
      st.pi_opt->step(p, pg);
      st.pi->set_params(p);
      st.value_opt->step(st.value_net->params(), vg);

      acc.policy_loss += ploss;
      acc.value_loss += vloss;
      acc.entropy += ent;
      ++n_minibatches;
    }
  }
  acc.policy_loss /= n_minibatches;
  acc.value_loss /= n_minibatches;
  acc.entropy /= n_minibatches;
  return acc;
}

namespace {

// behaviour-policy epoch: sample states (and actions for continuous spaces)
// from the buffer, pull mu toward pi sqrt(q_hat)
behaviour::MuStats mu_epoch(TrainState& st) {
  const auto& cfg = st.cfg;
  const std::size_t B = std::min<std::size_t>(st.buffer.size(),
                                              static_cast<std::size_t>(cfg.fqe.batch_size));
  std::vector<Vec> states(B);
  std::vector<envs::Action> actions(B);
  Vec log_mu(B);
  for (std::size_t k = 0; k < B; ++k) {
    const auto& tr = st.buffer[st.rng.index(st.buffer.size())];
    states[k] = tr.obs;
    actions[k] = tr.action;
    log_mu[k] = tr.log_mu;
  }

  const double bound = cfg.fqe.clip_targets
                           ? st.buffer.r_hat_max() / (1.0 - cfg.gamma * cfg.gamma)
                           : kInf;
  const bool disc = st.pi->discrete();
  const int n_act = st.pi->n_actions();
  auto qhat = [&](std::span<const double> obs, const envs::Action& a) {
    return fqe::qhat_predict(*st.qhat_net, obs, a, disc, n_act, cfg.fqe, bound);
  };

  if (disc) {
    const auto target = behaviour::discrete_target(*st.pi, qhat, states);
    return behaviour::discrete_mu_step(*st.mu, *st.mu_opt, states, target);
  }
  return behaviour::continuous_mu_step(*st.mu, *st.pi, qhat, states, actions, log_mu,
                                       *st.mu_opt, cfg.cont_mu);
}

}  // namespace

EvalResult evaluate(const policy::Policy& pol, envs::Env& env, int n_episodes, Rng& rng) {
  require(n_episodes > 0, "evaluate: n_episodes must be positive");
  Vec returns(n_episodes, 0.0);
  for (int e = 0; e < n_episodes; ++e) {
    envs::Obs obs = env.reset(rng);
    while (true) {
      const envs::Action a = pol.sample(obs.features, rng);
      const envs::StepResult res = env.step(a, rng);
      returns[e] += res.reward;
      if (res.terminated || res.truncated) break;
      obs = res.obs;
    }
  }
  return {mean_of(returns), stderr_of(returns)};
}

PhaseMetrics run_phase(TrainState& st) {
  PhaseMetrics m;
  m.phase = st.phase;
  const bool bpo = is_bpo(st.kind);

  ret::RolloutBatch batch =
      is_ppo(st.kind) ? collect_rollout(st, bpo) : collect_episode(st, bpo);
  m.trace.push_back(bpo ? "collect(mu)" : "collect(pi)");
  m.env_steps = st.env_steps;

  {  // importance-ratio diagnostics over the fresh batch
    const auto r = ret::is_ratios(batch, st.cfg.trunc);
    double mean = 0.0, mx = 0.0, truncd = 0.0;
    for (double w : r.raw) {
      mean += w / static_cast<double>(r.raw.size());
      mx = std::max(mx, w);
      if (w > st.cfg.trunc.c_bar || w > st.cfg.trunc.rho_bar) truncd += 1.0;
    }
    m.mean_ratio = mean;
    m.max_ratio = mx;
    m.trunc_frac = truncd / static_cast<double>(r.raw.size());
  }

  if (is_ppo(st.kind)) {
    const PpoStats s = ppo_update(st, batch);
    m.trace.push_back("ppo_update");
    m.policy_loss = s.policy_loss;
    m.value_loss = s.value_loss;
    m.entropy = s.entropy;
  } else {
    m.policy_loss = -reinforce_update(st, batch);
    m.trace.push_back("reinforce_update");
  }

  if (bpo && st.buffer.size() > 0) {
    if (st.cfg.n_qvf_epochs > 0) {
      for (int e = 0; e < st.cfg.n_qvf_epochs; ++e) {
        const auto s = fqe::fqe_q_epoch(*st.q_net, *st.q_shadow, *st.q_opt, *st.pi, st.buffer,
                                        st.cfg.fqe, st.cfg.gamma, st.rng);
        m.q_loss += s.mean_loss / st.cfg.n_qvf_epochs;
        m.trace.push_back("fqe_q_epoch");
      }
      fqe::compute_r_hat(st.buffer, *st.q_net, *st.pi, st.cfg.fqe, st.cfg.gamma);
      m.trace.push_back("compute_r_hat");
      for (int e = 0; e < st.cfg.n_qvf_epochs; ++e) {
        const auto s = fqe::fqe_qhat_epoch(*st.qhat_net, *st.qhat_shadow, *st.qhat_opt, *st.pi,
                                           st.buffer, st.cfg.fqe, st.cfg.gamma, st.rng);
        m.qhat_loss += s.mean_loss / st.cfg.n_qvf_epochs;
        m.trace.push_back("fqe_qhat_epoch");
      }
    }
    if (st.cfg.n_mu_epochs > 0 && st.buffer.r_hat_filled()) {
      for (int e = 0; e < st.cfg.n_mu_epochs; ++e) {
        const auto s = mu_epoch(st);
        m.mu_loss += s.loss / st.cfg.n_mu_epochs;
        m.trace.push_back("mu_step");
      }
    }

    // second-moment diagnostics on a fixed slice (no rng draws)
    const double bound = st.cfg.fqe.clip_targets
                             ? st.buffer.r_hat_max() / (1.0 - st.cfg.gamma * st.cfg.gamma)
                             : kInf;
    const std::size_t k = std::min<std::size_t>(st.buffer.size(), 256);
    for (std::size_t i = 0; i < k; ++i) {
      const auto& tr = st.buffer[i];
      const double q = fqe::qhat_predict(*st.qhat_net, tr.obs, tr.action, st.pi->discrete(),
                                         st.pi->n_actions(), st.cfg.fqe, bound);
      m.qhat_mean += q / static_cast<double>(k);
      m.qhat_max = std::max(m.qhat_max, q);
    }
  }

  const EvalResult ev = evaluate(*st.pi, *st.eval_env, st.cfg.eval_episodes, st.eval_rng);
  m.trace.push_back("evaluate");
  m.eval_mean = ev.mean;
  m.eval_se = ev.se;

  ++st.phase;
  return m;
}

}  // namespace bpo::agents
