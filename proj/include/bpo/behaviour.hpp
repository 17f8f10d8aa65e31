#pragma once

#include <functional>

#include "bpo/approx.hpp"
#include "bpo/policies.hpp"

namespace bpo::behaviour {

// second-moment estimate for a (state, action) pair; implementations floor at 0
using QhatFn = std::function<double(std::span<const double> obs, const envs::Action& a)>;

/** Per-state variance-optimal action distribution, proportional to
 * pi(a|s) sqrt(q_hat(s, a)). Degenerate normalizers fall back to pi. */
struct BehaviourTarget {
  std::vector<Vec> rows;
  std::vector<char> fallback;
};

BehaviourTarget discrete_target(const policy::Policy& pi, const QhatFn& qhat,
                                std::span<const Vec> states);

struct MuStats {
  double loss = 0.0;
  double grad_norm = 0.0;  // before the optimizer step
};

/** One cross-entropy step pulling mu toward the target rows:
 * loss = -mean_s sum_a target(a|s) ln mu(a|s). */
MuStats discrete_mu_step(policy::Policy& mu, approx::Adam& opt, std::span<const Vec> states,
                         const BehaviourTarget& target);

struct ContMuConfig {
  bool no_qhat = false;           // ablation: drop the 0.5 ln q_hat term
  bool score_correction = false;  // ablation: reweight by mu_now / mu_at_collection
  double qhat_floor = 1e-8;       // floor under the logarithm
};

/** One score-function step on the proportionality-matching loss
 *   L(xi) = E_{A ~ mu_xi}[ln mu_xi(A|S) - ln pi(A|S) - 0.5 ln q_hat(S, A)].
 *
 * Since the expectation runs over mu's own samples, the gradient is
 *   grad L = E[(1 + f) d ln mu],  f = ln mu - ln pi - 0.5 ln q_hat,
 * and E[d ln mu] = 0 lets any constant shift of f be subtracted; using the
 * batch mean of f as the baseline makes fixed points exact on finite batches
 * (mu = pi with constant q_hat gives f constant, so the gradient vanishes
 * sample-by-sample). The batch is treated as a fixed measure across the
 * phase's steps (no drift correction) unless score_correction is set. */
MuStats continuous_mu_step(policy::Policy& mu, const policy::Policy& pi, const QhatFn& qhat,
                           std::span<const Vec> states, std::span<const envs::Action> actions,
                           std::span<const double> log_mu_collect, approx::Adam& opt,
                           const ContMuConfig& cfg);

// empirical loss value on a batch (diagnostics and fixed-point tests)
double continuous_mu_loss(const policy::Policy& mu, const policy::Policy& pi, const QhatFn& qhat,
                          std::span<const Vec> states, std::span<const envs::Action> actions,
                          const ContMuConfig& cfg);

}  // namespace bpo::behaviour
