#include "bpo/behaviour.hpp"

#include <cmath>
#include <stdexcept>

namespace bpo::behaviour {

namespace {

double norm_of(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void adam_step_on(policy::Policy& p, approx::Adam& opt, const Vec& grad) {
  Vec params = p.get_params();
  opt.step(params, grad);
  p.set_params(params);
}

}  // namespace

BehaviourTarget discrete_target(const policy::Policy& pi, const QhatFn& qhat,
                                std::span<const Vec> states) {
  require(pi.discrete(), "discrete_target: pi is not discrete");
  BehaviourTarget out;
  out.rows.reserve(states.size());
  out.fallback.reserve(states.size());
  for (const Vec& s : states) {
    const Vec p = pi.action_probs(s);
    Vec row(p.size());
    double z = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a) {
      envs::Action act;
      act.index = static_cast<int>(a);
      const double q = qhat(s, act);
      if (q < 0.0)
        throw std::invalid_argument("discrete_target: q_hat returned a negative value (" +
                                    std::to_string(q) + "); floor it upstream");
      row[a] = p[a] * std::sqrt(q);
      z += row[a];
    }
    if (z <= 1e-12) {  // degenerate normalizer: match pi instead
      out.rows.push_back(p);
      out.fallback.push_back(1);
    } else {
      for (auto& v : row) v /= z;
      out.rows.push_back(std::move(row));
      out.fallback.push_back(0);
    }
  }
  return out;
}

MuStats discrete_mu_step(policy::Policy& mu, approx::Adam& opt, std::span<const Vec> states,
                         const BehaviourTarget& target) {
  require(mu.discrete(), "discrete_mu_step: mu is not discrete");
  require(states.size() == target.rows.size(), "discrete_mu_step: states/target size mismatch");
  require(!states.empty(), "discrete_mu_step: empty batch");

  const double n = static_cast<double>(states.size());
  Vec grad(mu.n_params(), 0.0);
  MuStats stats;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const Vec p = mu.action_probs(states[i]);
    const Vec& t = target.rows[i];
    require(t.size() == p.size(), "discrete_mu_step: target row size mismatch");
    for (std::size_t a = 0; a < p.size(); ++a)
      if (t[a] > 0.0) stats.loss -= t[a] * std::log(p[a]) / n;
    mu.accumulate_cross_entropy_grad(states[i], t, 1.0 / n, grad);
  }
  if (!std::isfinite(stats.loss)) throw std::runtime_error("discrete_mu_step: non-finite loss");
  stats.grad_norm = norm_of(grad);
  adam_step_on(mu, opt, grad);
  return stats;
}

namespace {

double term_value(const policy::Policy& pi, const QhatFn& qhat, const Vec& s,
                  const envs::Action& a, double log_mu, const ContMuConfig& cfg) {
  double f = log_mu - pi.log_prob(s, a);
  if (!cfg.no_qhat) f -= 0.5 * std::log(std::max(qhat(s, a), cfg.qhat_floor));
  return f;
}

}  // namespace

double continuous_mu_loss(const policy::Policy& mu, const policy::Policy& pi, const QhatFn& qhat,
                          std::span<const Vec> states, std::span<const envs::Action> actions,
                          const ContMuConfig& cfg) {
  require(states.size() == actions.size() && !states.empty(),
          "continuous_mu_loss: empty or mismatched batch");
  double loss = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i)
    loss += term_value(pi, qhat, states[i], actions[i], mu.log_prob(states[i], actions[i]), cfg) /
            static_cast<double>(states.size());
  return loss;
}

MuStats continuous_mu_step(policy::Policy& mu, const policy::Policy& pi, const QhatFn& qhat,
                           std::span<const Vec> states, std::span<const envs::Action> actions,
                           std::span<const double> log_mu_collect, approx::Adam& opt,
                           const ContMuConfig& cfg) {
  require(states.size() == actions.size() && !states.empty(),
          "continuous_mu_step: empty or mismatched batch");
  require(!cfg.score_correction || log_mu_collect.size() == states.size(),
          "continuous_mu_step: score_correction needs collection-time log mu");

  const std::size_t n = states.size();
  Vec f(n), w(n, 1.0), log_mu_now(n);
  for (std::size_t i = 0; i < n; ++i) {
    log_mu_now[i] = mu.log_prob(states[i], actions[i]);
    f[i] = term_value(pi, qhat, states[i], actions[i], log_mu_now[i], cfg);
  }
  if (cfg.score_correction) {
    double wsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = std::exp(log_mu_now[i] - log_mu_collect[i]);
      wsum += w[i];
    }
    require(std::isfinite(wsum) && wsum > 0.0, "continuous_mu_step: degenerate drift weights");
    for (auto& x : w) x *= static_cast<double>(n) / wsum;
  }

  MuStats stats;
  double fbar = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    stats.loss += w[i] * f[i] / static_cast<double>(n);
    fbar += w[i] * f[i];
  }
  fbar /= static_cast<double>(n);
  if (!std::isfinite(stats.loss)) throw std::runtime_error("continuous_mu_step: non-finite loss");

  Vec grad(mu.n_params(), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    mu.accumulate_logprob_grad(states[i], actions[i], w[i] * (f[i] - fbar) / static_cast<double>(n),
                               grad);
  stats.grad_norm = norm_of(grad);
  adam_step_on(mu, opt, grad);
  return stats;
}

}  // namespace bpo::behaviour
