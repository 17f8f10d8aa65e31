#include "bpo/returns.hpp"

#include <algorithm>
#include <cmath>

namespace bpo::ret {

void validate(const TruncationConfig& cfg) {
  require(cfg.lambda >= 0.0 && cfg.lambda <= 1.0, "TruncationConfig: lambda must be in [0, 1]");
  require(cfg.c_bar >= 0.0, "TruncationConfig: c_bar must be >= 0 (or infinity)");
  require(cfg.rho_bar >= 0.0, "TruncationConfig: rho_bar must be >= 0 (or infinity)");
  require(!std::isnan(cfg.c_bar) && !std::isnan(cfg.rho_bar) && !std::isnan(cfg.lambda),
          "TruncationConfig: fields must not be NaN");
}

std::optional<std::string> config_warning(const TruncationConfig& cfg) {
  if (cfg.rho_bar < cfg.c_bar || cfg.c_bar < 1.0)
    return "recommended truncation regime is rho_bar >= c_bar >= 1; got c_bar=" +
           std::to_string(cfg.c_bar) + ", rho_bar=" + std::to_string(cfg.rho_bar);
  return std::nullopt;
}

void RolloutBatch::check_consistent() const {
  const std::size_t n = rewards.size();
  require(obs.size() == n && actions.size() == n && done.size() == n &&
              truncated.size() == n && log_mu.size() == n && log_pi.size() == n,
          "RolloutBatch: per-step arrays have mismatched lengths");
  require(state_ids.empty() || state_ids.size() == n,
          "RolloutBatch: state_ids length mismatch");
  require(next_obs.empty() || next_obs.size() == n, "RolloutBatch: next_obs length mismatch");
  require(!ep_start.empty() && ep_start.front() == 0, "RolloutBatch: ep_start must begin at 0");
  for (std::size_t e = 0; e < n_episodes(); ++e) {
    const std::size_t lo = ep_start[e], hi = ep_end(e);
    require(lo < hi && hi <= n, "RolloutBatch: episode " + std::to_string(e) + " is empty");
    for (std::size_t t = lo; t + 1 < hi; ++t)
      require(!done[t] && !truncated[t],
              "RolloutBatch: episode " + std::to_string(e) + " has an interior end flag");
    require(done[hi - 1] || truncated[hi - 1],
            "RolloutBatch: episode " + std::to_string(e) + " does not end with done/truncated");
  }
}

Ratios is_ratios(const RolloutBatch& batch, const TruncationConfig& cfg) {
  validate(cfg);
  batch.check_consistent();
  const std::size_t n = batch.n_steps();
  Ratios out;
  out.c.resize(n);
  out.rho.resize(n);
  out.raw.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double raw = std::exp(batch.log_pi[t] - batch.log_mu[t]);
    if (!std::isfinite(raw))
      throw std::invalid_argument("is_ratios: non-finite ratio at step " + std::to_string(t) +
                                  " (log_pi=" + std::to_string(batch.log_pi[t]) +
                                  ", log_mu=" + std::to_string(batch.log_mu[t]) + ")");
    out.raw[t] = raw;
    out.c[t] = std::min(cfg.c_bar, raw);
    out.rho[t] = std::min(cfg.rho_bar, raw);
  }
  return out;
}

Vec pdis_returns(const RolloutBatch& batch, double gamma) {
  TruncationConfig untruncated;  // raw ratios
  const Ratios r = is_ratios(batch, untruncated);
  Vec g(batch.n_steps(), 0.0);
  for (std::size_t e = 0; e < batch.n_episodes(); ++e) {
    double acc = 0.0;
    for (std::size_t t = batch.ep_end(e); t-- > batch.ep_start[e];) {
      acc = r.raw[t] * (batch.rewards[t] + gamma * acc);
      g[t] = acc;
    }
  }
  return g;
}

namespace {

void check_value_shapes(const RolloutBatch& batch, std::span<const double> values,
                        std::span<const double> bootstrap) {
  require(values.size() == batch.n_steps(),
          "tis returns: values length " + std::to_string(values.size()) + " != n_steps " +
              std::to_string(batch.n_steps()));
  require(bootstrap.size() == batch.n_episodes(),
          "tis returns: bootstrap length " + std::to_string(bootstrap.size()) +
              " != n_episodes " + std::to_string(batch.n_episodes()));
}

// value anchor at the post-step state: 0 once the episode has terminated
double next_value(const RolloutBatch& batch, std::span<const double> values,
                  std::span<const double> bootstrap, std::size_t e, std::size_t t) {
  const std::size_t hi = batch.ep_end(e);
  if (t + 1 < hi) return values[t + 1];
  return batch.ep_terminated(e) ? 0.0 : bootstrap[e];
}

}  // namespace

Vec tis_td_lambda_returns(const RolloutBatch& batch, std::span<const double> values,
                          std::span<const double> bootstrap, const TruncationConfig& cfg,
                          double gamma) {
  const Ratios r = is_ratios(batch, cfg);
  check_value_shapes(batch, values, bootstrap);
  Vec g(batch.n_steps(), 0.0);
  const double gl = gamma * cfg.lambda;

  for (std::size_t e = 0; e < batch.n_episodes(); ++e) {
    const std::size_t lo = batch.ep_start[e], hi = batch.ep_end(e);
    if (!cfg.traj_mode) {
      double carry = 0.0;  // G_{t+1} - v(S_{t+1}); zero at the episode end
      for (std::size_t t = hi; t-- > lo;) {
        const double vn = next_value(batch, values, bootstrap, e, t);
        const double delta = r.rho[t] * (batch.rewards[t] + gamma * vn - values[t]);
        const double corr = delta + gl * r.c[t] * carry;
        g[t] = values[t] + corr;
        carry = corr;
      }
    } else {
      // Trajectory-level truncation: the coefficient of TD error k inside G_t
      // is the product of raw ratios over [t, k], capped at c_bar after each
      // backward extension. w[k] carries those coefficients for the current t.
      const std::size_t len = hi - lo;
      Vec w(len, 0.0), d(len, 0.0);
      for (std::size_t t = hi; t-- > lo;) {
        const double vn = next_value(batch, values, bootstrap, e, t);
        const std::size_t i = t - lo;
        d[i] = batch.rewards[t] + gamma * vn - values[t];  // unweighted TD error
        for (std::size_t k = len; k-- > i + 1;) w[k] = std::min(cfg.c_bar, r.raw[t] * w[k]);
        w[i] = std::min(cfg.c_bar, r.raw[t]);
        double acc = 0.0, scale = 1.0;
        for (std::size_t k = i; k < len; ++k, scale *= gl) acc += scale * w[k] * d[k];
        g[t] = values[t] + acc;
      }
    }
  }
  return g;
}

Vec tis_td_lambda_direct(const RolloutBatch& batch, std::span<const double> values,
                         std::span<const double> bootstrap, const TruncationConfig& cfg,
                         double gamma) {
  const Ratios r = is_ratios(batch, cfg);
  check_value_shapes(batch, values, bootstrap);
  Vec g(batch.n_steps(), 0.0);
  const double gl = gamma * cfg.lambda;

  for (std::size_t e = 0; e < batch.n_episodes(); ++e) {
    const std::size_t lo = batch.ep_start[e], hi = batch.ep_end(e);
    for (std::size_t t = lo; t < hi; ++t) {
      double acc = values[t];
      double scale = 1.0;
      for (std::size_t k = t; k < hi; ++k, scale *= gl) {
        const double vn = next_value(batch, values, bootstrap, e, k);
        if (!cfg.traj_mode) {
          // (prod_{i=t}^{k-1} c_i) * rho_k * delta'_k with per-step truncation
          double coef = 1.0;
          for (std::size_t i = t; i < k; ++i) coef *= r.c[i];
          acc += scale * coef * r.rho[k] * (batch.rewards[k] + gamma * vn - values[k]);
        } else {
          // capped product over [t, k], innermost factor first
          double coef = std::min(cfg.c_bar, r.raw[k]);
          for (std::size_t i = k; i-- > t;) coef = std::min(cfg.c_bar, r.raw[i] * coef);
          acc += scale * coef * (batch.rewards[k] + gamma * vn - values[k]);
        }
      }
      g[t] = acc;
    }
  }
  return g;
}

Vec advantages(std::span<const double> returns, std::span<const double> values) {
  require(returns.size() == values.size(), "advantages: length mismatch");
  Vec a(returns.size());
  for (std::size_t i = 0; i < returns.size(); ++i) a[i] = returns[i] - values[i];
  return a;
}

}  // namespace bpo::ret
