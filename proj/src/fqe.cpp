#include "bpo/fqe.hpp"

#include <cmath>
#include <stdexcept>

namespace bpo::fqe {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : cap_(capacity) {
  require(capacity > 0, "ReplayBuffer: capacity must be positive");
  data_.reserve(capacity);
}

void ReplayBuffer::add(Transition t) {
  require(std::isfinite(t.reward), "ReplayBuffer: non-finite reward");
  r_max_ = std::max(r_max_, std::abs(t.reward));
  t.r_hat_set = false;
  if (data_.size() < cap_) {
    data_.push_back(std::move(t));
  } else {
    data_[cursor_] = std::move(t);  // overwrite the oldest entry
    cursor_ = (cursor_ + 1) % cap_;
  }
}

void ReplayBuffer::set_r_hat(std::size_t i, double v) {
  require(i < data_.size(), "ReplayBuffer::set_r_hat: index out of range");
  require(std::isfinite(v), "ReplayBuffer::set_r_hat: non-finite r_hat");
  data_[i].r_hat = v;
  data_[i].r_hat_set = true;
  r_hat_max_ = std::max(r_hat_max_, std::abs(v));
}

bool ReplayBuffer::r_hat_filled() const {
  for (const auto& t : data_)
    if (!t.r_hat_set) return false;
  return !data_.empty();
}

Vec qnet_input(std::span<const double> obs, const envs::Action& a, bool discrete,
               int n_actions) {
  Vec x(obs.begin(), obs.end());
  if (discrete) {
    require(a.index >= 0 && a.index < n_actions, "qnet_input: action index out of range");
    Vec onehot(n_actions, 0.0);
    onehot[a.index] = 1.0;
    x.insert(x.end(), onehot.begin(), onehot.end());
  } else {
    require(!a.cont.empty(), "qnet_input: continuous action is empty");
    x.insert(x.end(), a.cont.begin(), a.cont.end());
  }
  return x;
}

namespace {

double head_value(const approx::Mlp& net, const Vec& input, const FqeConfig& cfg) {
  const double raw = net.raw(input)[0];
  return cfg.symlog ? symexp(raw) : raw;
}

/** E_{a' ~ pi} net(s', a'): exact sum for discrete actions, cfg.pi_samples
 * Monte Carlo draws for continuous ones. Predictions are clamped like the
 * targets they feed. */
double expected_next_value(const approx::Mlp& net, const policy::Policy& pi, const Vec& next_obs,
                           const FqeConfig& cfg, double bound, bool non_negative, Rng& rng) {
  const double clip = cfg.clip_targets ? bound : kInf;
  if (pi.discrete()) {
    const Vec probs = pi.action_probs(next_obs);
    double acc = 0.0;
    for (int a = 0; a < pi.n_actions(); ++a) {
      if (probs[a] == 0.0) continue;
      envs::Action act;
      act.index = a;
      const double v = head_value(net, qnet_input(next_obs, act, true, pi.n_actions()), cfg);
      acc += probs[a] * approx::clip_prediction(v, clip, non_negative);
    }
    return acc;
  }
  double acc = 0.0;
  for (int j = 0; j < cfg.pi_samples; ++j) {
    const envs::Action act = pi.sample(next_obs, rng);
    const double v = head_value(net, qnet_input(next_obs, act, false, 0), cfg);
    acc += approx::clip_prediction(v, clip, non_negative);
  }
  return acc / cfg.pi_samples;
}

/** Shared epoch body for both heads; `second_moment` switches to r_hat,
 * gamma_eff = gamma^2 and non-negative clipping. */
EpochStats epoch_impl(approx::Mlp& net, approx::Polyak& shadow, approx::Adam& opt,
                      const policy::Policy& pi, const ReplayBuffer& buf, const FqeConfig& cfg,
                      double gamma_eff, bool second_moment, double max_abs, Rng& rng) {
  require(buf.size() > 0, "fqe: replay buffer is empty");
  require(cfg.batch_size > 0 && cfg.pi_samples > 0, "fqe: batch_size and pi_samples must be > 0");
  require(gamma_eff >= 0.0 && gamma_eff < 1.0, "fqe: effective discount must be in [0, 1)");

  const double bound = max_abs / (1.0 - gamma_eff);
  const int n_batches =
      static_cast<int>((buf.size() + cfg.batch_size - 1) / static_cast<std::size_t>(cfg.batch_size));
  const int B = cfg.batch_size;

  approx::Mlp shadow_net = net;
  EpochStats stats;
  double weight_sum = 0.0;
  Vec grad(net.n_params());
  std::vector<Vec> inputs(B);
  Vec targets(B), raws(B), shadow_raws(B), weights(B);

  for (int batch = 0; batch < n_batches; ++batch) {
    shadow_net.set_params(shadow.shadow);
    for (int k = 0; k < B; ++k) {
      const Transition& t = buf[rng.index(buf.size())];
      inputs[k] = qnet_input(t.obs, t.action, pi.discrete(), pi.n_actions());

      const double base = second_moment ? t.r_hat : t.reward;
      double target = base;
      if (!t.done)
        target += gamma_eff * expected_next_value(shadow_net, pi, t.next_obs, cfg, bound,
                                                  second_moment, rng);
      if (cfg.clip_targets) target = approx::clip_prediction(target, bound, second_moment);
      targets[k] = cfg.symlog ? symlog(target) : target;

      raws[k] = net.raw(inputs[k])[0];
      shadow_raws[k] = shadow_net.raw(inputs[k])[0];
      weights[k] = cfg.weight_td_update ? std::exp(pi.log_prob(t.obs, t.action) - t.log_mu) : 1.0;
    }

    if (cfg.weight_td_update) {
      // normalize to batch mean 1 so gradient magnitudes stay comparable
      double wsum = 0.0;
      for (double w : weights) wsum += w;
      require(std::isfinite(wsum) && wsum > 0.0, "fqe: degenerate importance weights");
      for (double& w : weights) w *= B / wsum;
    }

    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (int k = 0; k < B; ++k) {
      const double fit = raws[k] - targets[k];
      const double reg = raws[k] - shadow_raws[k];
      loss += weights[k] * (fit * fit + cfg.symlog_reg * reg * reg) / B;
      const double g = weights[k] * 2.0 * (fit + cfg.symlog_reg * reg) / B;
      net.accumulate_raw_grad(inputs[k], std::span<const double>(&g, 1), grad);
    }
    if (!std::isfinite(loss)) throw std::runtime_error("fqe: non-finite loss");

    opt.step(net.params(), grad);
    shadow.update(net.params());

    stats.mean_loss += loss;
    for (double w : weights) {
      weight_sum += w;
      stats.max_weight = std::max(stats.max_weight, w);
    }
  }
  stats.mean_loss /= n_batches;
  stats.mean_weight = weight_sum / (static_cast<double>(n_batches) * B);
  stats.batches = n_batches;
  return stats;
}

}  // namespace

double q_predict(const approx::Mlp& qnet, std::span<const double> obs, const envs::Action& a,
                 bool discrete, int n_actions, const FqeConfig& cfg, double bound) {
  const double v = head_value(qnet, qnet_input(obs, a, discrete, n_actions), cfg);
  return approx::clip_prediction(v, bound, false);
}

double qhat_predict(const approx::Mlp& qhat_net, std::span<const double> obs,
                    const envs::Action& a, bool discrete, int n_actions, const FqeConfig& cfg,
                    double bound) {
  const double v = head_value(qhat_net, qnet_input(obs, a, discrete, n_actions), cfg);
  return approx::clip_prediction(v, bound, true);
}

EpochStats fqe_q_epoch(approx::Mlp& qnet, approx::Polyak& shadow, approx::Adam& opt,
                       const policy::Policy& pi, const ReplayBuffer& buf, const FqeConfig& cfg,
                       double gamma, Rng& rng) {
  return epoch_impl(qnet, shadow, opt, pi, buf, cfg, gamma, false, buf.r_max(), rng);
}

void compute_r_hat(ReplayBuffer& buf, const approx::Mlp& qnet, const policy::Policy& pi,
                   const FqeConfig& cfg, double gamma) {
  require(gamma >= 0.0 && gamma < 1.0, "compute_r_hat: discount must be in [0, 1)");
  const double bound = cfg.clip_targets ? buf.r_max() / (1.0 - gamma) : kInf;
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const Transition& t = buf[i];
    const double q = q_predict(qnet, t.obs, t.action, pi.discrete(), pi.n_actions(), cfg, bound);
    buf.set_r_hat(i, 2.0 * t.reward * q - t.reward * t.reward);
  }
}

EpochStats fqe_qhat_epoch(approx::Mlp& qhat_net, approx::Polyak& shadow, approx::Adam& opt,
                          const policy::Policy& pi, const ReplayBuffer& buf,
                          const FqeConfig& cfg, double gamma, Rng& rng) {
  require(buf.r_hat_filled(), "fqe_qhat_epoch: r_hat not computed for the current buffer");
  return epoch_impl(qhat_net, shadow, opt, pi, buf, cfg, gamma * gamma, true, buf.r_hat_max(),
                    rng);
}

}  // namespace bpo::fqe
