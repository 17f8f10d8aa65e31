#include "bpo/oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace bpo::oracle {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << x;
  return os.str();
}

std::size_t idx(const TabularMdp& m, int s, int a) {
  return static_cast<std::size_t>(s) * m.n_actions + a;
}

void check_inputs(const TabularMdp& mdp, const TabularPolicy& pi, const char* what) {
  mdp::require_valid(mdp);
  const auto bad = mdp::validate_policy(mdp, pi);
  if (!bad.empty()) {
    std::string msg = std::string(what) + ": invalid policy";
    for (const auto& b : bad) msg += "\n  " + b;
    throw std::invalid_argument(msg);
  }
}

/** LU solve with one refinement pass; throws (naming the residual) when the
 * verified residual is above tolerance, which flags singular systems such as
 * an episodic solve without certain absorption. */
Eigen::VectorXd solve_checked(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                              const std::string& what) {
  const auto lu = A.partialPivLu();
  Eigen::VectorXd x = lu.solve(b);
  if (x.allFinite()) x += lu.solve((b - A * x).eval());
  const double resid = (A * x - b).lpNorm<Eigen::Infinity>();
  const double tol = 1e-12 * std::max(1.0, x.lpNorm<Eigen::Infinity>());
  if (!x.allFinite() || !(resid <= tol))
    throw std::runtime_error(what + ": linear solve residual " + fmt(resid) +
                             " exceeds tolerance " + fmt(tol));
  return x;
}

Vec to_vec(const Eigen::VectorXd& x) { return Vec(x.data(), x.data() + x.size()); }

// gamma^2-discounted transition over (s,a) pairs: p(s'|s,a) pi(a'|s')
Eigen::MatrixXd squared_return_system(const TabularMdp& mdp, const TabularPolicy& pi) {
  const int S = mdp.n_states, A = mdp.n_actions;
  const int n = S * A;
  const double g2 = mdp.discount * mdp.discount;
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      for (int s2 = 0; s2 < S; ++s2) {
        const double p = mdp.p(s, a, s2);
        if (p == 0.0) continue;
        for (int a2 = 0; a2 < A; ++a2)
          M(s * A + a, s2 * A + a2) -= g2 * p * pi.at(s2, a2);
      }
  return M;
}

Vec solve_squared_return(const TabularMdp& mdp, const TabularPolicy& pi, const Vec& reward,
                         const std::string& what) {
  const Eigen::MatrixXd M = squared_return_system(mdp, pi);
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(reward.data(), reward.size());
  return to_vec(solve_checked(M, b, what));
}

double floored_second_moment(double x, int s, int a, const char* what) {
  if (x < -1e-9)
    throw std::invalid_argument(std::string(what) + ": q_hat(" + std::to_string(s) + ", " +
                                std::to_string(a) + ") = " + fmt(x) +
                                " is negative beyond round-off; second moments cannot be negative");
  return std::max(x, 0.0);
}

/** Per-state variance Bellman pieces for behaviour mu: J = K J + b with
 * K(s, s') = g^2 sum_a mu c^2 p and b(s) = sum_a mu rho^2 (nu + q^2) - v^2.
 * Terminal rows are zero. Throws on coverage violations. */
struct VarianceOperator {
  Eigen::MatrixXd K;
  Eigen::VectorXd b;
};

VarianceOperator build_variance_operator(const TabularMdp& mdp, const TabularPolicy& pi,
                                         const TabularPolicy& mu, double c_bar, double rho_bar) {
  const int S = mdp.n_states, A = mdp.n_actions;
  const Vec v = policy_evaluation(mdp, pi);
  const Vec q = q_from_v(mdp, v);
  const Vec nu = nu_pi(mdp, v);
  const double g2 = mdp.discount * mdp.discount;

  VarianceOperator op;
  op.K = Eigen::MatrixXd::Zero(S, S);
  op.b = Eigen::VectorXd::Zero(S);
  for (int s = 0; s < S; ++s) {
    if (mdp.is_terminal(s)) continue;
    double inst = 0.0;
    for (int a = 0; a < A; ++a) {
      const double m = mu.at(s, a);
      if (m == 0.0) {
        if (std::abs(pi.at(s, a) * q[idx(mdp, s, a)]) > 1e-12)
          throw std::invalid_argument(
              "variance_fixed_point: behaviour has zero probability at state " +
              std::to_string(s) + ", action " + std::to_string(a) +
              " where pi(a|s) q(s,a) = " + fmt(pi.at(s, a) * q[idx(mdp, s, a)]) +
              " is nonzero (coverage violation)");
        continue;
      }
      const double raw = pi.at(s, a) / m;
      const double c = std::min(c_bar, raw);
      const double rho = std::min(rho_bar, raw);
      inst += m * rho * rho * (nu[idx(mdp, s, a)] + q[idx(mdp, s, a)] * q[idx(mdp, s, a)]);
      const double w = g2 * m * c * c;
      for (int s2 = 0; s2 < S; ++s2) {
        const double p = mdp.p(s, a, s2);
        if (p != 0.0 && !mdp.is_terminal(s2)) op.K(s, s2) += w * p;
      }
    }
    op.b(s) = inst - v[s] * v[s];
  }
  return op;
}

}  // namespace

double ReturnDistribution::total_prob() const {
  double t = 0.0;
  for (double p : probs) t += p;
  return t;
}

double ReturnDistribution::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) m += probs[i] * values[i];
  return m;
}

double ReturnDistribution::second_moment() const {
  double m = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) m += probs[i] * values[i] * values[i];
  return m;
}

double ReturnDistribution::variance() const {
  const double m = mean();
  return second_moment() - m * m;
}

Vec policy_evaluation(const TabularMdp& mdp, const TabularPolicy& pi) {
  check_inputs(mdp, pi, "policy_evaluation");
  require(mdp.discount < 1.0,
          "policy_evaluation: needs discount < 1; use episodic_value for the undiscounted case");
  const int S = mdp.n_states, A = mdp.n_actions;
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(S, S);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(S);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      const double w = pi.at(s, a);
      if (w == 0.0) continue;
      b(s) += w * mdp.r(s, a);
      for (int s2 = 0; s2 < S; ++s2) M(s, s2) -= mdp.discount * w * mdp.p(s, a, s2);
    }
  return to_vec(solve_checked(M, b, "policy_evaluation"));
}

Vec episodic_value(const TabularMdp& mdp, const TabularPolicy& pi) {
  check_inputs(mdp, pi, "episodic_value");
  const int S = mdp.n_states, A = mdp.n_actions;
  std::vector<int> live;  // non-terminal state -> system row
  std::vector<int> row(S, -1);
  for (int s = 0; s < S; ++s)
    if (!mdp.is_terminal(s)) {
      row[s] = static_cast<int>(live.size());
      live.push_back(s);
    }
  require(static_cast<int>(live.size()) < S,
          "episodic_value: needs at least one terminal state");
  const int n = static_cast<int>(live.size());
  if (n == 0) return Vec(S, 0.0);

  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    const int s = live[i];
    for (int a = 0; a < A; ++a) {
      const double w = pi.at(s, a);
      if (w == 0.0) continue;
      b(i) += w * mdp.r(s, a);
      for (int s2 = 0; s2 < S; ++s2)
        if (row[s2] >= 0) M(i, row[s2]) -= w * mdp.p(s, a, s2);
    }
  }
  const Eigen::VectorXd x =
      solve_checked(M, b, "episodic_value (is absorption certain under this policy?)");
  Vec v(S, 0.0);
  for (int i = 0; i < n; ++i) v[live[i]] = x(i);
  return v;
}

Vec q_from_v(const TabularMdp& mdp, const Vec& v) {
  require(v.size() == static_cast<std::size_t>(mdp.n_states), "q_from_v: v size mismatch");
  Vec q(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions, 0.0);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      double ev = 0.0;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) ev += mdp.p(s, a, s2) * v[s2];
      q[idx(mdp, s, a)] = mdp.r(s, a) + mdp.discount * ev;
    }
  return q;
}

Vec nu_pi(const TabularMdp& mdp, const Vec& v) {
  require(v.size() == static_cast<std::size_t>(mdp.n_states), "nu_pi: v size mismatch");
  Vec nu(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions, 0.0);
  const double g2 = mdp.discount * mdp.discount;
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      double ev = 0.0, ev2 = 0.0;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        const double p = mdp.p(s, a, s2);
        ev += p * v[s2];
        ev2 += p * v[s2] * v[s2];
      }
      nu[idx(mdp, s, a)] = std::max(g2 * (ev2 - ev * ev), 0.0);
    }
  return nu;
}

std::pair<Vec, Vec> compute_q_hat(const TabularMdp& mdp, const TabularPolicy& pi) {
  check_inputs(mdp, pi, "compute_q_hat");
  const Vec v = policy_evaluation(mdp, pi);
  const Vec q = q_from_v(mdp, v);
  Vec r_hat(q.size());
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double r = mdp.r(s, a);
      r_hat[idx(mdp, s, a)] = 2.0 * r * q[idx(mdp, s, a)] - r * r;
    }
  Vec q_hat = solve_squared_return(mdp, pi, r_hat, "compute_q_hat");
  return {std::move(r_hat), std::move(q_hat)};
}

std::pair<Vec, Vec> compute_tilde(const TabularMdp& mdp, const TabularPolicy& pi) {
  check_inputs(mdp, pi, "compute_tilde");
  const Vec v = policy_evaluation(mdp, pi);
  const Vec q = q_from_v(mdp, v);
  const Vec nu = nu_pi(mdp, v);
  Vec r_tilde(q.size());
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      const std::size_t i = idx(mdp, s, a);
      r_tilde[i] = nu[i] + q[i] * q[i] - v[s] * v[s];
    }
  Vec q_tilde = solve_squared_return(mdp, pi, r_tilde, "compute_tilde");
  return {std::move(r_tilde), std::move(q_tilde)};
}

TabularPolicy optimal_behaviour_policy(const TabularPolicy& pi, const Vec& q_hat) {
  require(q_hat.size() == static_cast<std::size_t>(pi.n_states) * pi.n_actions,
          "optimal_behaviour_policy: q_hat size mismatch");
  TabularPolicy mu = pi;
  for (int s = 0; s < pi.n_states; ++s) {
    double z = 0.0;
    Vec w(pi.n_actions);
    for (int a = 0; a < pi.n_actions; ++a) {
      const double qh = floored_second_moment(
          q_hat[static_cast<std::size_t>(s) * pi.n_actions + a], s, a,
          "optimal_behaviour_policy");
      w[a] = pi.at(s, a) * std::sqrt(qh);
      z += w[a];
    }
    if (z <= 0.0) continue;  // all-zero row: keep the pi fallback
    for (int a = 0; a < pi.n_actions; ++a)
      mu.prob[static_cast<std::size_t>(s) * pi.n_actions + a] = w[a] / z;
  }
  return mu;
}

Vec variance_fixed_point(const TabularMdp& mdp, const TabularPolicy& pi, const TabularPolicy& mu,
                         double c_bar, double rho_bar) {
  check_inputs(mdp, pi, "variance_fixed_point");
  check_inputs(mdp, mu, "variance_fixed_point");
  const VarianceOperator op = build_variance_operator(mdp, pi, mu, c_bar, rho_bar);
  const int S = mdp.n_states;
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(S, S) - op.K;
  return to_vec(solve_checked(A, op.b, "variance_fixed_point"));
}

std::vector<Vec> variance_iterates(const TabularMdp& mdp, const TabularPolicy& pi,
                                   const TabularPolicy& mu, double c_bar, double rho_bar,
                                   int n_iters) {
  check_inputs(mdp, pi, "variance_iterates");
  check_inputs(mdp, mu, "variance_iterates");
  require(n_iters >= 0, "variance_iterates: n_iters must be >= 0");
  const VarianceOperator op = build_variance_operator(mdp, pi, mu, c_bar, rho_bar);
  std::vector<Vec> out;
  out.reserve(n_iters + 1);
  Eigen::VectorXd j = Eigen::VectorXd::Zero(mdp.n_states);
  out.push_back(to_vec(j));
  for (int k = 0; k < n_iters; ++k) {
    j = (op.K * j + op.b).eval();
    out.push_back(to_vec(j));
  }
  return out;
}

std::pair<Vec, Vec> epsilon_recursion(const TabularMdp& mdp, const TabularPolicy& pi,
                                      const TabularPolicy& mu_hat, const Vec& q_hat) {
  check_inputs(mdp, pi, "epsilon_recursion");
  check_inputs(mdp, mu_hat, "epsilon_recursion");
  require(q_hat.size() == static_cast<std::size_t>(mdp.n_states) * mdp.n_actions,
          "epsilon_recursion: q_hat size mismatch");
  const int S = mdp.n_states, A = mdp.n_actions;
  const double g2 = mdp.discount * mdp.discount;

  Vec c_gap(S, 0.0);
  for (int s = 0; s < S; ++s) {
    if (mdp.is_terminal(s)) continue;
    double eq = 0.0, esq = 0.0;
    for (int a = 0; a < A; ++a) {
      const double qh =
          floored_second_moment(q_hat[idx(mdp, s, a)], s, a, "epsilon_recursion");
      eq += pi.at(s, a) * qh;
      esq += pi.at(s, a) * std::sqrt(qh);
    }
    c_gap[s] = std::max(eq - esq * esq, 0.0);  // Jensen gap; clamp round-off
  }

  // epsilon = c + g^2 E_{a~mu_hat}[(pi/mu_hat)^2 E_p[epsilon]]
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(S, S);
  for (int s = 0; s < S; ++s) {
    if (mdp.is_terminal(s)) continue;
    for (int a = 0; a < A; ++a) {
      const double m = mu_hat.at(s, a);
      if (m == 0.0) {
        const double qh =
            floored_second_moment(q_hat[idx(mdp, s, a)], s, a, "epsilon_recursion");
        if (pi.at(s, a) * std::sqrt(qh) > 1e-12)
          throw std::invalid_argument(
              "epsilon_recursion: mu_hat gives zero probability at state " + std::to_string(s) +
              ", action " + std::to_string(a) + " where pi sqrt(q_hat) is nonzero");
        continue;
      }
      const double w = g2 * pi.at(s, a) * pi.at(s, a) / m;  // mu * (pi/mu)^2
      for (int s2 = 0; s2 < S; ++s2) {
        const double p = mdp.p(s, a, s2);
        if (p != 0.0 && !mdp.is_terminal(s2)) M(s, s2) -= w * p;
      }
    }
  }
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(c_gap.data(), S);
  Eigen::VectorXd eps = solve_checked(M, rhs, "epsilon_recursion");
  Vec epsilon(S);
  for (int s = 0; s < S; ++s) {
    if (eps(s) < -1e-9)
      throw std::runtime_error("epsilon_recursion: epsilon(" + std::to_string(s) +
                               ") = " + fmt(eps(s)) + " is negative beyond round-off");
    epsilon[s] = std::max(eps(s), 0.0);
  }
  return {std::move(c_gap), std::move(epsilon)};
}

namespace {

/** Exact count of mu-positive trajectories from s0 (leaves of the DFS below),
 * computed in O(horizon * S^2 * A). Counts stay exact up to 2^53 and only
 * feed a threshold test beyond that. */
double count_leaves(const TabularMdp& mdp, const TabularPolicy& mu, int s0, int horizon) {
  Vec alive(mdp.n_states, 0.0);
  alive[s0] = 1.0;
  double leaves = 0.0;
  for (int d = 0; d < horizon; ++d) {
    Vec next(mdp.n_states, 0.0);
    for (int s = 0; s < mdp.n_states; ++s) {
      if (alive[s] == 0.0) continue;
      for (int a = 0; a < mdp.n_actions; ++a) {
        if (mu.at(s, a) == 0.0) continue;
        for (int s2 = 0; s2 < mdp.n_states; ++s2) {
          if (mdp.p(s, a, s2) == 0.0) continue;
          if (mdp.is_terminal(s2) || d + 1 == horizon)
            leaves += alive[s];
          else
            next[s2] += alive[s];
        }
      }
    }
    alive = std::move(next);
  }
  return leaves;
}

struct Enumerator {
  const TabularMdp& mdp;
  const TabularPolicy& mu;
  const TabularPolicy& pi;
  int horizon;
  const ret::TruncationConfig& cfg;
  const Vec& v_est;

  std::vector<int> states;  // length = steps + 1
  std::vector<int> acts;
  Vec log_mu, log_pi, rewards;

  ReturnDistribution out;

  void leaf() {
    const std::size_t T = acts.size();
    ret::RolloutBatch b;
    b.obs.assign(T, Vec{});
    b.state_ids.assign(states.begin(), states.end() - 1);
    b.next_state_ids.assign(states.begin() + 1, states.end());
    b.actions.resize(T);
    for (std::size_t t = 0; t < T; ++t) b.actions[t].index = acts[t];
    b.rewards = rewards;
    b.log_mu = log_mu;
    b.log_pi = log_pi;
    b.done.assign(T, 0);
    b.truncated.assign(T, 0);
    const bool terminated = mdp.is_terminal(states.back());
    (terminated ? b.done : b.truncated)[T - 1] = 1;
    b.ep_start = {0};

    Vec values(T);
    for (std::size_t t = 0; t < T; ++t) values[t] = v_est[states[t]];
    const Vec boot = {terminated ? 0.0 : v_est[states.back()]};
    const Vec g = ret::tis_td_lambda_returns(b, values, boot, cfg, mdp.discount);

    double logp = 0.0;  // path probability under mu, log space
    for (std::size_t t = 0; t < T; ++t)
      logp += log_mu[t] + std::log(mdp.p(b.state_ids[t], acts[t], b.next_state_ids[t]));
    out.probs.push_back(std::exp(logp));
    out.values.push_back(g[0]);
  }

  void dfs(int s, int depth) {
    if (mdp.is_terminal(s) || depth == horizon) {
      leaf();
      return;
    }
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double pm = mu.at(s, a);
      if (pm == 0.0) continue;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        if (mdp.p(s, a, s2) == 0.0) continue;
        states.push_back(s2);
        acts.push_back(a);
        log_mu.push_back(std::log(pm));
        log_pi.push_back(pi.at(s, a) > 0.0 ? std::log(pi.at(s, a)) : -kInf);
        rewards.push_back(mdp.r(s, a));
        dfs(s2, depth + 1);
        states.pop_back();
        acts.pop_back();
        log_mu.pop_back();
        log_pi.pop_back();
        rewards.pop_back();
      }
    }
  }
};

}  // namespace

std::vector<ReturnDistribution> enumerate_returns(const TabularMdp& mdp, const TabularPolicy& mu,
                                                  const TabularPolicy& pi, int horizon,
                                                  const ret::TruncationConfig& cfg,
                                                  const Vec& v_estimates) {
  check_inputs(mdp, mu, "enumerate_returns");
  check_inputs(mdp, pi, "enumerate_returns");
  ret::validate(cfg);
  require(horizon >= 1, "enumerate_returns: horizon must be >= 1");
  require(v_estimates.size() == static_cast<std::size_t>(mdp.n_states),
          "enumerate_returns: v_estimates size mismatch");

  double total = 0.0;
  for (int s = 0; s < mdp.n_states; ++s)
    if (!mdp.is_terminal(s)) total += count_leaves(mdp, mu, s, horizon);
  if (total > static_cast<double>(kEnumerationLeafGuard))
    throw std::runtime_error("enumerate_returns: " + fmt(total) +
                             " trajectories exceed the 1e7 enumeration guard; use a smaller "
                             "horizon or MDP");

  std::vector<ReturnDistribution> dists;
  dists.reserve(mdp.n_states);
  Enumerator e{mdp, mu, pi, horizon, cfg, v_estimates};
  for (int s = 0; s < mdp.n_states; ++s) {
    e.out = ReturnDistribution{};
    if (mdp.is_terminal(s)) {
      e.out.probs = {1.0};
      e.out.values = {0.0};
    } else {
      e.states = {s};
      e.dfs(s, 0);
    }
    dists.push_back(std::move(e.out));
  }
  return dists;
}

ReturnDistribution enumerate_plain_returns_sa(const TabularMdp& mdp, const TabularPolicy& pi,
                                              int state, int action, int horizon) {
  check_inputs(mdp, pi, "enumerate_plain_returns_sa");
  require(state >= 0 && state < mdp.n_states && action >= 0 && action < mdp.n_actions,
          "enumerate_plain_returns_sa: state/action out of range");
  require(horizon >= 1, "enumerate_plain_returns_sa: horizon must be >= 1");

  ReturnDistribution out;
  std::int64_t leaves = 0;
  // (state, depth, discounted return so far, log prob, forced first action)
  auto dfs = [&](auto&& self, int s, int depth, double g, double disc, double logp) -> void {
    if (mdp.is_terminal(s) || depth == horizon) {
      if (++leaves > kEnumerationLeafGuard)
        throw std::runtime_error(
            "enumerate_plain_returns_sa: more than 1e7 trajectories; use a smaller instance");
      out.probs.push_back(std::exp(logp));
      out.values.push_back(g);
      return;
    }
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double w = depth == 0 ? (a == action ? 1.0 : 0.0) : pi.at(s, a);
      if (w == 0.0) continue;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        const double p = mdp.p(s, a, s2);
        if (p == 0.0) continue;
        self(self, s2, depth + 1, g + disc * mdp.r(s, a), disc * mdp.discount,
             logp + std::log(w * p));
      }
    }
  };
  if (mdp.is_terminal(state)) {
    out.probs = {1.0};
    out.values = {0.0};
  } else {
    dfs(dfs, state, 0, 0.0, 1.0, 0.0);
  }
  return out;
}

MomentTable tis_moments(const TabularMdp& mdp, const TabularPolicy& mu, const TabularPolicy& pi,
                        int horizon, const ret::TruncationConfig& cfg, const Vec& v_estimates) {
  check_inputs(mdp, mu, "tis_moments");
  check_inputs(mdp, pi, "tis_moments");
  ret::validate(cfg);
  require(!cfg.traj_mode,
          "tis_moments: trajectory-level truncation does not factor over steps; use "
          "enumerate_returns");
  require(horizon >= 0, "tis_moments: horizon must be >= 0");
  require(v_estimates.size() == static_cast<std::size_t>(mdp.n_states),
          "tis_moments: v_estimates size mismatch");

  const int S = mdp.n_states, A = mdp.n_actions;
  const double gamma = mdp.discount;
  MomentTable t;
  t.m1.assign(horizon + 1, Vec(S, 0.0));
  t.m2.assign(horizon + 1, Vec(S, 0.0));
  for (int s = 0; s < S; ++s)
    if (!mdp.is_terminal(s)) {
      t.m1[0][s] = v_estimates[s];
      t.m2[0][s] = v_estimates[s] * v_estimates[s];
    }

  for (int h = 1; h <= horizon; ++h)
    for (int s = 0; s < S; ++s) {
      if (mdp.is_terminal(s)) continue;
      double acc1 = 0.0, acc2 = 0.0;
      for (int a = 0; a < A; ++a) {
        const double m = mu.at(s, a);
        if (m == 0.0) continue;
        const double raw = pi.at(s, a) / m;
        const double rho = std::min(cfg.rho_bar, raw);
        const double glc = gamma * cfg.lambda * std::min(cfg.c_bar, raw);
        const double r = mdp.r(s, a);
        for (int s2 = 0; s2 < S; ++s2) {
          const double p = mdp.p(s, a, s2);
          if (p == 0.0) continue;
          const bool term = mdp.is_terminal(s2);
          const double anchor = term ? 0.0 : v_estimates[s2];
          const double cm1 = term ? 0.0 : t.m1[h - 1][s2];
          const double cm2 = term ? 0.0 : t.m2[h - 1][s2];
          const double base =
              v_estimates[s] + rho * (r + gamma * anchor - v_estimates[s]) - glc * anchor;
          const double w = m * p;
          acc1 += w * (base + glc * cm1);
          acc2 += w * (base * base + 2.0 * base * glc * cm1 + glc * glc * cm2);
        }
      }
      t.m1[h][s] = acc1;
      t.m2[h][s] = acc2;
    }
  return t;
}

PlainMoments plain_return_moments(const TabularMdp& mdp, const TabularPolicy& pi, int horizon) {
  check_inputs(mdp, pi, "plain_return_moments");
  require(horizon >= 0, "plain_return_moments: horizon must be >= 0");
  const int S = mdp.n_states, A = mdp.n_actions;
  const double gamma = mdp.discount;

  Vec vm1(S, 0.0), vm2(S, 0.0);
  Vec qm1(static_cast<std::size_t>(S) * A, 0.0), qm2(qm1);
  for (int h = 1; h <= horizon; ++h) {
    Vec nv1(S, 0.0), nv2(S, 0.0);
    for (int s = 0; s < S; ++s) {
      if (mdp.is_terminal(s)) continue;
      for (int a = 0; a < A; ++a) {
        const double r = mdp.r(s, a);
        double e1 = 0.0, e2 = 0.0;
        for (int s2 = 0; s2 < S; ++s2) {
          const double p = mdp.p(s, a, s2);
          if (p == 0.0 || mdp.is_terminal(s2)) continue;
          e1 += p * vm1[s2];
          e2 += p * vm2[s2];
        }
        qm1[idx(mdp, s, a)] = r + gamma * e1;
        qm2[idx(mdp, s, a)] = r * r + 2.0 * r * gamma * e1 + gamma * gamma * e2;
        nv1[s] += pi.at(s, a) * qm1[idx(mdp, s, a)];
        nv2[s] += pi.at(s, a) * qm2[idx(mdp, s, a)];
      }
    }
    vm1 = std::move(nv1);
    vm2 = std::move(nv2);
  }
  return {std::move(vm1), std::move(vm2), std::move(qm1), std::move(qm2)};
}

OracleBundle compute_oracle_bundle(const TabularMdp& mdp, const TabularPolicy& pi) {
  OracleBundle b;
  b.n_states = mdp.n_states;
  b.n_actions = mdp.n_actions;
  b.v = policy_evaluation(mdp, pi);
  b.q = q_from_v(mdp, b.v);
  b.nu = nu_pi(mdp, b.v);
  std::tie(b.r_hat, b.q_hat) = compute_q_hat(mdp, pi);
  std::tie(b.r_tilde, b.q_tilde) = compute_tilde(mdp, pi);
  b.mu_hat = optimal_behaviour_policy(pi, b.q_hat);
  std::tie(b.c_gap, b.epsilon) = epsilon_recursion(mdp, pi, b.mu_hat, b.q_hat);
  b.j_pi = variance_fixed_point(mdp, pi, pi, kInf, kInf);
  return b;
}

void write_oracle_csv(const OracleBundle& b, std::ostream& out) {
  out << "state,action,v,q,nu,r_hat,q_hat,r_tilde,q_tilde,mu_hat,j_pi,c_gap,epsilon\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (int s = 0; s < b.n_states; ++s)
    for (int a = 0; a < b.n_actions; ++a) {
      const std::size_t i = static_cast<std::size_t>(s) * b.n_actions + a;
      out << s << ',' << a << ',' << b.v[s] << ',' << b.q[i] << ',' << b.nu[i] << ','
          << b.r_hat[i] << ',' << b.q_hat[i] << ',' << b.r_tilde[i] << ',' << b.q_tilde[i] << ','
          << b.mu_hat.at(s, a) << ',' << b.j_pi[s] << ',' << b.c_gap[s] << ',' << b.epsilon[s]
          << '\n';
    }
}

}  // namespace bpo::oracle
