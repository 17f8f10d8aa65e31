#pragma once

#include <cstdint>
#include <ostream>
#include <utility>
#include <vector>

#include "bpo/mdp.hpp"
#include "bpo/returns.hpp"

// Exact ground truth for everything the learning stack estimates: state and
// action values, next-state-value variance, the squared-return reward/value
// pair (r_hat, q_hat), their centred counterparts (r_tilde, q_tilde), the
// variance-minimizing behaviour policy, return-variance fixed points, and
// brute-force return distributions computed with the same estimator code the
// agents use. All functions are pure and deterministic.
namespace bpo::oracle {

using mdp::TabularMdp;
using mdp::TabularPolicy;

/** Exact finite distribution of a return estimate from one start state. */
struct ReturnDistribution {
  Vec probs;
  Vec values;

  double total_prob() const;
  double mean() const;
  double second_moment() const;
  double variance() const;  // population variance of the support
};

/** Everything the oracle knows about (mdp, pi), bundled for export. Flat
 * per-(state, action) arrays are indexed s * n_actions + a. */
struct OracleBundle {
  int n_states = 0;
  int n_actions = 0;
  Vec v;        // state values
  Vec q;        // action values
  Vec nu;       // variance of the discounted next-state value
  Vec r_hat;    // squared-return reward 2 r q - r^2
  Vec q_hat;    // second moment of the return, E_pi[G^2 | s, a]
  Vec r_tilde;  // nu + q^2 - v(s)^2
  Vec q_tilde;  // centred second moment, q_hat - v(s)^2
  Vec j_pi;     // on-policy return variance per state
  Vec epsilon;  // variance saved by sampling from mu_hat instead of pi
  Vec c_gap;    // per-state Jensen gap E_pi[q_hat] - (E_pi[sqrt(q_hat)])^2
  TabularPolicy mu_hat;  // variance-minimizing behaviour policy
};

/** v_pi via direct linear solve of the Bellman system, mdp.discount < 1.
 * Throws when the verified residual exceeds 1e-12. */
Vec policy_evaluation(const TabularMdp& mdp, const TabularPolicy& pi);

/** Undiscounted total expected reward until absorption (gamma = 1 solved on
 * the non-terminal states). Requires at least one terminal state; throws,
 * naming the residual, when absorption is not certain under pi. */
Vec episodic_value(const TabularMdp& mdp, const TabularPolicy& pi);

// q(s,a) = r(s,a) + gamma * sum_s' p(s'|s,a) v(s')
Vec q_from_v(const TabularMdp& mdp, const Vec& v);

// nu(s,a) = gamma^2 * Var_{s'~p}[v(s')]
Vec nu_pi(const TabularMdp& mdp, const Vec& v);

/** Squared-return pair: r_hat(s,a) = 2 r q - r^2 pointwise, and q_hat as the
 * fixed point of q_hat = r_hat + gamma^2 E_{p,pi}[q_hat], residual <= 1e-12.
 * Returns (r_hat, q_hat). */
std::pair<Vec, Vec> compute_q_hat(const TabularMdp& mdp, const TabularPolicy& pi);

/** Centred counterparts: r_tilde = nu + q^2 - v(s)^2 pointwise, q_tilde the
 * fixed point of the same gamma^2 recursion. Satisfies
 * q_hat = q_tilde + v(s)^2. Returns (r_tilde, q_tilde). */
std::pair<Vec, Vec> compute_tilde(const TabularMdp& mdp, const TabularPolicy& pi);

/** mu_hat(a|s) proportional to pi(a|s) * sqrt(q_hat(s,a)). Entries of q_hat
 * in [-1e-9, 0) are floored to 0 (round-off on a second moment); anything
 * more negative throws. A state whose normalizer is zero falls back to the
 * pi row. */
TabularPolicy optimal_behaviour_policy(const TabularPolicy& pi, const Vec& q_hat);

/** Fixed point J_mu of the return-variance Bellman equation under behaviour
 * mu with truncated ratios c = min(c_bar, pi/mu), rho = min(rho_bar, pi/mu):
 *
 *   J(s) = sum_a mu(a|s) [ rho^2 (nu + q^2) + gamma^2 c^2 sum_s' p J(s') ]
 *          - v(s)^2,                J(terminal) = 0.
 *
 * v, q, nu are the exact on-policy quantities for pi. Throws on a coverage
 * violation (mu(a|s) = 0 while pi(a|s) q(s,a) != 0), naming (s, a). */
Vec variance_fixed_point(const TabularMdp& mdp, const TabularPolicy& pi, const TabularPolicy& mu,
                         double c_bar, double rho_bar);

/** First n_iters iterates of the variance Bellman operator started from
 * J = 0 (element 0 is the zero vector). Lets tests observe the gamma^2
 * contraction rate directly. */
std::vector<Vec> variance_iterates(const TabularMdp& mdp, const TabularPolicy& pi,
                                   const TabularPolicy& mu, double c_bar, double rho_bar,
                                   int n_iters);

/** Per-state Jensen gap c(s) = E_pi[q_hat] - (E_pi[sqrt(q_hat)])^2 and the
 * fixed point of epsilon(s) = c(s) + gamma^2 E_{a~mu_hat}[rho^2 E_p[epsilon]]
 * with rho = pi/mu_hat untruncated. Returns (c_gap, epsilon); both are
 * non-negative. */
std::pair<Vec, Vec> epsilon_recursion(const TabularMdp& mdp, const TabularPolicy& pi,
                                      const TabularPolicy& mu_hat, const Vec& q_hat);

// enumeration refuses to expand more than this many trajectories
constexpr std::int64_t kEnumerationLeafGuard = 10'000'000;

/** Brute force: expands every trajectory of length <= horizon under mu (path
 * probabilities kept in log space), evaluates each with the production
 * truncated-IS estimator against target pi and the supplied per-state value
 * estimates, and returns the exact return distribution for every start
 * state (terminal starts get a point mass at 0). Throws once the leaf guard
 * trips, suggesting a smaller instance. */
std::vector<ReturnDistribution> enumerate_returns(const TabularMdp& mdp, const TabularPolicy& mu,
                                                  const TabularPolicy& pi, int horizon,
                                                  const ret::TruncationConfig& cfg,
                                                  const Vec& v_estimates);

/** Brute-force distribution of the plain discounted return sum_t gamma^t R
 * from (state, action) under pi: the first action is forced, pi acts
 * afterwards. Independent cross-check for q_hat. */
ReturnDistribution enumerate_plain_returns_sa(const TabularMdp& mdp, const TabularPolicy& pi,
                                              int state, int action, int horizon);

/** Exact first/second moments, per start state and remaining depth, of the
 * truncated-IS estimator under mu (m1[h][s], m2[h][s], h = 0..horizon).
 * Depth 0 is the bootstrap point: m1[0][s] = v_estimates[s] on non-terminal
 * states. Same semantics as enumerate_returns but via a factored recursion,
 * so it scales to horizons far beyond enumeration. Standard per-step
 * truncation only (traj_mode rejects). */
struct MomentTable {
  std::vector<Vec> m1;
  std::vector<Vec> m2;
};
MomentTable tis_moments(const TabularMdp& mdp, const TabularPolicy& mu, const TabularPolicy& pi,
                        int horizon, const ret::TruncationConfig& cfg, const Vec& v_estimates);

/** Exact moments of the plain horizon-limited return under pi: vm1/vm2 per
 * state, qm1/qm2 per (state, action) with the first action forced. */
struct PlainMoments {
  Vec vm1, vm2;  // per state
  Vec qm1, qm2;  // per (state, action)
};
PlainMoments plain_return_moments(const TabularMdp& mdp, const TabularPolicy& pi, int horizon);

/** All oracle quantities for (mdp, pi) in one pass. */
OracleBundle compute_oracle_bundle(const TabularMdp& mdp, const TabularPolicy& pi);

/** One CSV row per (state, action); per-state quantities are repeated on each
 * of the state's rows. Stable header, full double precision. */
void write_oracle_csv(const OracleBundle& bundle, std::ostream& out);

}  // namespace bpo::oracle
