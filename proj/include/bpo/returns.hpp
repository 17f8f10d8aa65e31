#pragma once

#include <optional>

#include "bpo/common.hpp"
#include "bpo/envs.hpp"

namespace bpo::ret {

/** Knobs for the truncated IS-weighted TD(lambda) estimator. c_bar caps the
 * trace coefficients, rho_bar caps the TD-error weight; traj_mode caps the
 * running product of raw ratios as a whole instead of each factor. */
struct TruncationConfig {
  double lambda = 1.0;
  double c_bar = kInf;
  double rho_bar = kInf;
  bool traj_mode = false;
};

void validate(const TruncationConfig& cfg);  // throws on out-of-range fields
// non-fatal advisory (e.g. rho_bar >= c_bar >= 1 is the recommended regime)
std::optional<std::string> config_warning(const TruncationConfig& cfg);

/** Flat multi-episode rollout storage. Per-step arrays share one index; the
 * episode layout is given by ep_start (ascending, first element 0). The last
 * step of every episode must carry done or truncated; a batch cut mid-episode
 * marks its final step truncated (the estimator bootstraps from V(S_T)). */
struct RolloutBatch {
  std::vector<Vec> obs;
  std::vector<int> state_ids;  // tabular ids, -1 otherwise
  std::vector<envs::Action> actions;
  Vec rewards;
  std::vector<Vec> next_obs;
  std::vector<int> next_state_ids;
  std::vector<char> done;       // entered a terminal state
  std::vector<char> truncated;  // horizon/batch cutoff
  Vec log_mu;                   // log mu(A_t | S_t) at collection
  Vec log_pi;                   // log pi(A_t | S_t) at collection
  std::vector<std::size_t> ep_start;

  std::size_t n_steps() const { return rewards.size(); }
  std::size_t n_episodes() const { return ep_start.size(); }
  std::size_t ep_end(std::size_t e) const {
    return e + 1 < ep_start.size() ? ep_start[e + 1] : n_steps();
  }
  bool ep_terminated(std::size_t e) const { return done[ep_end(e) - 1] != 0; }

  void check_consistent() const;  // throws std::invalid_argument on layout errors
};

struct Ratios {
  Vec c;    // min(c_bar, pi/mu)
  Vec rho;  // min(rho_bar, pi/mu)
  Vec raw;  // pi/mu untruncated
};

/** Per-step importance ratios exp(log_pi - log_mu), truncated at the config
 * caps. Throws when a ratio is non-finite (e.g. both log-probs -inf). */
Ratios is_ratios(const RolloutBatch& batch, const TruncationConfig& cfg);

/** Per-decision IS return, backward recursion G_t = rho_t (R_{t+1} + g G_{t+1})
 * with untruncated ratios and G = 0 past the episode end. */
Vec pdis_returns(const RolloutBatch& batch, double gamma);

/** Truncated IS-weighted TD(lambda) return per step.
 * `values[t]` is V(S_t); `bootstrap[e]` is V(S_T) for episode e at truncation
 * (ignored — treated as 0 — when the episode ended in a terminal state).
 * Standard mode runs the O(T) backward recursion
 *   G_t = v(S_t) + d_t + g*l*c_t (G_{t+1} - v(S_{t+1})),
 *   d_t = rho_t (R_{t+1} + g v(S_{t+1}) - v(S_t));
 * traj_mode instead weights each TD error by the running product of *raw*
 * ratios from t through k, capped at c_bar after every multiplication as the
 * product is extended backward (cap-then-propagate). */
Vec tis_td_lambda_returns(const RolloutBatch& batch, std::span<const double> values,
                          std::span<const double> bootstrap, const TruncationConfig& cfg,
                          double gamma);

/** O(T^2) literal evaluation of the defining double sum; test oracle for the
 * recursion. Mirrors traj_mode's capped-product semantics. */
Vec tis_td_lambda_direct(const RolloutBatch& batch, std::span<const double> values,
                         std::span<const double> bootstrap, const TruncationConfig& cfg,
                         double gamma);

// A_t = G_t - V(S_t)
Vec advantages(std::span<const double> returns, std::span<const double> values);

}  // namespace bpo::ret
