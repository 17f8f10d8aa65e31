#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "bpo/mdp.hpp"
#include "bpo/oracle.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace bpo;
using mdp::TabularMdp;
using mdp::TabularPolicy;
using ret::TruncationConfig;

namespace {

std::size_t sa(const TabularMdp& m, int s, int a) {
  return static_cast<std::size_t>(s) * m.n_actions + a;
}

double sup_diff(const Vec& a, const Vec& b) {
  REQUIRE(a.size() == b.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

/** Two-action chain 0 -> 1 -> 2(terminal), reward 1 per step, gamma 0.9,
 * both actions move forward. Ratios are shaped purely by pi vs mu. */
TabularMdp forward_chain() {
  TabularMdp m;
  m.n_states = 3;
  m.n_actions = 2;
  m.transitions.assign(3 * 2 * 3, 0.0);
  m.rewards.assign(3 * 2, 1.0);
  m.initial = {1.0, 0.0, 0.0};
  m.terminal = {0, 0, 1};
  m.discount = 0.9;
  for (int a = 0; a < 2; ++a) {
    m.transitions[(0 * 2 + a) * 3 + 1] = 1.0;
    m.transitions[(1 * 2 + a) * 3 + 2] = 1.0;
    m.transitions[(2 * 2 + a) * 3 + 2] = 1.0;
    m.rewards[2 * 2 + a] = 0.0;
  }
  return m;
}

TabularMdp one_state_two_actions(double gamma) {
  TabularMdp m;
  m.n_states = 1;
  m.n_actions = 2;
  m.transitions = {1.0, 1.0};
  m.rewards = {0.0, 1.0};
  m.initial = {1.0};
  m.terminal = {0};
  m.discount = gamma;
  return m;
}

TabularPolicy rows_policy(int n_actions, std::vector<Vec> rows) {
  TabularPolicy p;
  p.n_states = static_cast<int>(rows.size());
  p.n_actions = n_actions;
  for (const auto& r : rows) p.prob.insert(p.prob.end(), r.begin(), r.end());
  return p;
}

}  // namespace

TEST_CASE("policy evaluation: zero rewards give zero values") {
  TabularMdp m = mdp::make_random_tabular(4, 3, 0.9, 2);
  for (auto& r : m.rewards) r = 0.0;
  for (double v : oracle::policy_evaluation(m, TabularPolicy::uniform(4, 3))) CHECK(v == 0.0);
}

TEST_CASE("policy evaluation: solution satisfies the Bellman system to 1e-10") {
  const TabularMdp m = mdp::make_random_tabular(5, 3, 0.95, 17);
  const TabularPolicy pi = mdp::make_random_policy(m, 4);
  const Vec v = oracle::policy_evaluation(m, pi);
  for (int s = 0; s < m.n_states; ++s) {
    double rhs = 0.0;
    for (int a = 0; a < m.n_actions; ++a) {
      double ev = 0.0;
      for (int s2 = 0; s2 < m.n_states; ++s2) ev += m.p(s, a, s2) * v[s2];
      rhs += pi.at(s, a) * (m.r(s, a) + m.discount * ev);
    }
    CHECK(std::abs(v[s] - rhs) <= 1e-10);
  }
}

TEST_CASE("corridor: undiscounted value at p(right)=0.59 matches the closed form") {
  const TabularMdp m = mdp::make_short_corridor();
  const Vec v = oracle::episodic_value(m, mdp::corridor_policy(0.59));
  // hitting-time algebra for the corridor gives v(0) = -2 (1 + q) / (p q)
  const double p = 0.59, q = 0.41;
  CHECK(std::abs(v[0] - (-2.0 * (1.0 + q) / (p * q))) <= 1e-9);
  CHECK(std::abs(v[1] - (-(2.0 + q) / (p * q))) <= 1e-9);
  CHECK(v[3] == 0.0);
  // the published figure (-11.6) is this value truncated to one decimal
  CHECK(v[0] == doctest::Approx(-11.6).epsilon(0.01));
  CHECK(v[0] == doctest::Approx(-11.6577).epsilon(1e-4));
}

TEST_CASE("episodic value: failure modes are reported") {
  CHECK_THROWS_AS(oracle::episodic_value(mdp::make_random_tabular(3, 2, 0.9, 1),
                                         TabularPolicy::uniform(3, 2)),
                  std::invalid_argument);  // no terminal state
  // p(right) = 0 never leaves state 0, so absorption is not certain
  CHECK_THROWS_WITH_AS(oracle::episodic_value(mdp::make_short_corridor(),
                                              mdp::corridor_policy(0.0)),
                       doctest::Contains("residual"), std::runtime_error);
}

TEST_CASE("policy evaluation agrees with exact finite-horizon return moments") {
  // horizon chosen so the discount tail 0.5^28 * r_max/(1-gamma) < 1e-8
  const TabularMdp m = mdp::make_random_tabular(2, 2, 0.5, 1);
  const TabularPolicy pi = TabularPolicy::uniform(2, 2);
  const Vec v = oracle::policy_evaluation(m, pi);
  const auto pm = oracle::plain_return_moments(m, pi, 28);
  CHECK(sup_diff(v, pm.vm1) <= 1e-6);

  const TabularMdp m7 = mdp::make_random_tabular(3, 2, 0.9, 7);
  const TabularPolicy pi7 = TabularPolicy::uniform(3, 2);
  CHECK(sup_diff(oracle::policy_evaluation(m7, pi7),
                 oracle::plain_return_moments(m7, pi7, 250).vm1) <= 1e-9);
}

TEST_CASE("q_from_v and nu_pi implement the one-step formulas") {
  SUBCASE("deterministic transitions have zero next-value variance") {
    const TabularMdp m = mdp::make_short_corridor();
    const Vec v = oracle::policy_evaluation(m, mdp::corridor_policy(0.6));
    for (double x : oracle::nu_pi(m, v)) CHECK(x == 0.0);

    const Vec q = oracle::q_from_v(m, v);
    CHECK(q[sa(m, 2, mdp::kCorridorRight)] == doctest::Approx(-1.0));  // straight to terminal
    CHECK(q[sa(m, 0, mdp::kCorridorRight)] == doctest::Approx(-1.0 + m.discount * v[1]));
  }

  SUBCASE("two equally likely next values 0 and 1 at gamma 1 give nu = 0.25") {
    TabularMdp m;
    m.n_states = 2;
    m.n_actions = 1;
    m.transitions = {0.5, 0.5, 0.0, 1.0};
    m.rewards = {0.0, 0.0};
    m.initial = {1.0, 0.0};
    m.terminal = {0, 0};
    m.discount = 1.0;
    const Vec v = {0.0, 1.0};
    CHECK(oracle::nu_pi(m, v)[0] == doctest::Approx(0.25).epsilon(1e-12));
  }

  SUBCASE("nu matches the Monte Carlo variance of the next-state value") {
    const TabularMdp m = mdp::make_random_tabular(4, 2, 0.9, 5);
    const Vec v = oracle::policy_evaluation(m, TabularPolicy::uniform(4, 2));
    const Vec nu = oracle::nu_pi(m, v);
    Rng rng(123);
    const int s = 1, a = 0, n = 1000000;
    const auto row = m.row(s, a);
    Vec draws(n);
    for (int i = 0; i < n; ++i) draws[i] = m.discount * v[rng.categorical(row)];
    const double sample_var = variance_of(draws);
    // standard error of a sample variance via the fourth central moment
    const double mean = mean_of(draws);
    double m4 = 0.0;
    for (double d : draws) m4 += std::pow(d - mean, 4.0) / n;
    const double se = std::sqrt((m4 - sample_var * sample_var) / n);
    CHECK(std::abs(sample_var - nu[sa(m, s, a)]) <= 3.0 * se);
  }
}

TEST_CASE("q_hat: fixed point of the squared-return Bellman equation") {
  SUBCASE("zero rewards force zero r_hat and q_hat") {
    TabularMdp m = mdp::make_random_tabular(3, 2, 0.8, 3);
    for (auto& r : m.rewards) r = 0.0;
    const auto [r_hat, q_hat] = oracle::compute_q_hat(m, TabularPolicy::uniform(3, 2));
    for (double x : r_hat) CHECK(x == 0.0);
    for (double x : q_hat) CHECK(x == 0.0);
  }

  SUBCASE("single step to terminal: q_hat = r^2") {
    TabularMdp m;
    m.n_states = 2;
    m.n_actions = 2;
    m.transitions.assign(2 * 2 * 2, 0.0);
    for (int a = 0; a < 2; ++a) {
      m.transitions[(0 * 2 + a) * 2 + 1] = 1.0;
      m.transitions[(1 * 2 + a) * 2 + 1] = 1.0;
    }
    m.rewards = {0.7, -0.3, 0.0, 0.0};
    m.initial = {1.0, 0.0};
    m.terminal = {0, 1};
    m.discount = 0.9;
    const auto [r_hat, q_hat] = oracle::compute_q_hat(m, TabularPolicy::uniform(2, 2));
    CHECK(q_hat[0] == doctest::Approx(0.49).epsilon(1e-12));
    CHECK(q_hat[1] == doctest::Approx(0.09).epsilon(1e-12));
    CHECK(r_hat[0] == doctest::Approx(0.49).epsilon(1e-12));
    CHECK(q_hat[2] == 0.0);
  }

  SUBCASE("q_hat equals the second moment of the plain return") {
    const TabularMdp m = mdp::make_random_tabular(2, 2, 0.5, 9);
    const TabularPolicy pi = mdp::make_random_policy(m, 2);
    const auto [r_hat, q_hat] = oracle::compute_q_hat(m, pi);

    // exact finite-horizon moments converge to the fixed point
    const auto pm = oracle::plain_return_moments(m, pi, 60);
    CHECK(sup_diff(q_hat, pm.qm2) <= 1e-9);

    // and the moment recursion itself matches brute-force enumeration
    const auto pm10 = oracle::plain_return_moments(m, pi, 10);
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a) {
        const auto dist = oracle::enumerate_plain_returns_sa(m, pi, s, a, 10);
        CHECK(std::abs(dist.total_prob() - 1.0) <= 1e-10);
        CHECK(std::abs(dist.second_moment() - pm10.qm2[sa(m, s, a)]) <= 1e-10);
        CHECK(std::abs(dist.mean() - pm10.qm1[sa(m, s, a)]) <= 1e-11);
      }
  }
}

TEST_CASE("q_tilde: centred fixed point and the variance equality") {
  const TabularMdp m = mdp::make_random_tabular(4, 3, 0.8, 12);
  const TabularPolicy pi = mdp::make_random_policy(m, 6);
  const Vec v = oracle::policy_evaluation(m, pi);
  const auto [r_hat, q_hat] = oracle::compute_q_hat(m, pi);
  const auto [r_tilde, q_tilde] = oracle::compute_tilde(m, pi);

  // q_hat = q_tilde + v(s)^2 pointwise
  for (int s = 0; s < m.n_states; ++s)
    for (int a = 0; a < m.n_actions; ++a)
      CHECK(std::abs(q_hat[sa(m, s, a)] - q_tilde[sa(m, s, a)] - v[s] * v[s]) <= 1e-10);

  // E_pi[q_tilde] is the on-policy return variance
  const Vec j = oracle::variance_fixed_point(m, pi, pi, kInf, kInf);
  for (int s = 0; s < m.n_states; ++s) {
    double e = 0.0;
    for (int a = 0; a < m.n_actions; ++a) e += pi.at(s, a) * q_tilde[sa(m, s, a)];
    CHECK(std::abs(e - j[s]) <= 1e-10);
  }

  TabularMdp zero = m;
  for (auto& r : zero.rewards) r = 0.0;
  for (double x : oracle::compute_tilde(zero, pi).second) CHECK(std::abs(x) <= 1e-15);
}

TEST_CASE("optimal behaviour policy: proportional to pi sqrt(q_hat)") {
  const TabularPolicy pi = TabularPolicy::uniform(1, 2);

  SUBCASE("constant q_hat keeps pi") {
    const TabularPolicy mu = oracle::optimal_behaviour_policy(pi, Vec{2.5, 2.5});
    CHECK(mu.prob == pi.prob);
  }

  SUBCASE("q_hat (1, 4) reweights to (1/3, 2/3)") {
    const TabularPolicy mu = oracle::optimal_behaviour_policy(pi, Vec{1.0, 4.0});
    CHECK(mu.at(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(mu.at(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  }

  SUBCASE("round-off negatives are floored, real negatives rejected") {
    const TabularPolicy mu = oracle::optimal_behaviour_policy(pi, Vec{-5e-10, 0.0});
    CHECK(mu.prob == pi.prob);  // all-zero normalizer falls back to pi
    CHECK_THROWS_AS(oracle::optimal_behaviour_policy(pi, Vec{-1e-6, 1.0}),
                    std::invalid_argument);
  }
}

TEST_CASE("variance fixed point: degenerate and cross-solver cases") {
  SUBCASE("deterministic MDP under a deterministic policy has zero variance") {
    const TabularMdp m = mdp::make_short_corridor(0.9);
    const TabularPolicy det = mdp::corridor_policy(1.0);
    for (double x : oracle::variance_fixed_point(m, det, det, kInf, kInf))
      CHECK(std::abs(x) <= 1e-10);
  }

  SUBCASE("coverage violations name the state and action") {
    const TabularMdp m = mdp::make_short_corridor();
    CHECK_THROWS_WITH_AS(oracle::variance_fixed_point(m, mdp::corridor_policy(0.59),
                                                      mdp::corridor_policy(1.0), kInf, kInf),
                         doctest::Contains("action 0"), std::invalid_argument);
  }

  SUBCASE("iteration from zero contracts at rate gamma^2 on-policy") {
    const TabularMdp m = mdp::make_random_tabular(4, 3, 0.9, 20);
    const TabularPolicy pi = mdp::make_random_policy(m, 3);
    const auto iters = oracle::variance_iterates(m, pi, pi, kInf, kInf, 25);
    double prev = -1.0;
    for (std::size_t k = 1; k < iters.size(); ++k) {
      const double diff = sup_diff(iters[k], iters[k - 1]);
      if (prev > 1e-9) CHECK(diff / prev <= m.discount * m.discount + 1e-9);
      prev = diff;
    }
    const Vec j = oracle::variance_fixed_point(m, pi, pi, kInf, kInf);
    CHECK(sup_diff(iters.back(), j) <=
          2.0 * std::pow(m.discount, 2.0 * 25) * (sup_diff(j, Vec(j.size(), 0.0)) + 1.0));
  }
}

TEST_CASE("variance gap: epsilon recursion against hand arithmetic") {
  const TabularMdp m = one_state_two_actions(0.9);
  const TabularPolicy pi = rows_policy(2, {{0.6, 0.4}});
  const Vec q_hat = {1.0, 4.0};

  const TabularPolicy mu_hat = oracle::optimal_behaviour_policy(pi, q_hat);
  CHECK(mu_hat.at(0, 0) == doctest::Approx(3.0 / 7.0).epsilon(1e-12));

  const auto [c_gap, eps] = oracle::epsilon_recursion(m, pi, mu_hat, q_hat);
  // Jensen gap: E[q_hat] - (E[sqrt(q_hat)])^2 = 2.2 - 1.4^2
  CHECK(c_gap[0] == doctest::Approx(0.24).epsilon(1e-12));
  // one state: eps = c / (1 - g^2 sum_a pi^2/mu_hat) = 0.24 / (1 - 0.81 * 1.12)
  CHECK(eps[0] == doctest::Approx(0.24 / (1.0 - 0.81 * 1.12)).epsilon(1e-9));

  // constant q_hat per state degenerates to zero gap (up to round-off)
  const auto [c0, e0] = oracle::epsilon_recursion(m, pi, pi, Vec{3.0, 3.0});
  CHECK(std::abs(c0[0]) <= 1e-12);
  CHECK(std::abs(e0[0]) <= 1e-11);
}

TEST_CASE("variance reduction identity: J_mu_hat = J_pi - epsilon") {
  for (std::uint64_t seed : {31ull, 32ull, 33ull}) {
    const TabularMdp m = mdp::make_random_tabular(4, 3, 0.6, seed);
    const TabularPolicy pi = mdp::make_random_policy(m, seed + 100);
    const auto [r_hat, q_hat] = oracle::compute_q_hat(m, pi);
    const TabularPolicy mu_hat = oracle::optimal_behaviour_policy(pi, q_hat);
    const auto [c_gap, eps] = oracle::epsilon_recursion(m, pi, mu_hat, q_hat);

    const Vec j_pi = oracle::variance_fixed_point(m, pi, pi, kInf, kInf);
    const Vec j_mu = oracle::variance_fixed_point(m, pi, mu_hat, kInf, kInf);
    for (int s = 0; s < m.n_states; ++s) {
      CHECK(eps[s] >= 0.0);
      CHECK(std::abs(j_pi[s] - j_mu[s] - eps[s]) <= 1e-8);
    }
  }
}

TEST_CASE("enumeration reproduces the hand-worked PDIS example and v_pi") {
  const TabularMdp m = forward_chain();
  const TabularPolicy pi = rows_policy(2, {{1.0, 0.0}, {0.25, 0.75}, {0.5, 0.5}});
  const TabularPolicy mu = rows_policy(2, {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}});
  const Vec zeros(3, 0.0);

  const auto dists = oracle::enumerate_returns(m, mu, pi, 5, TruncationConfig{1.0, kInf, kInf},
                                               zeros);
  const auto& d0 = dists[0];
  CHECK(std::abs(d0.total_prob() - 1.0) <= 1e-10);

  // the (a0, a0) path has probability 1/4 and PDIS value 2 (1 + 0.9 * 0.5) = 2.9
  bool found = false;
  for (std::size_t i = 0; i < d0.values.size(); ++i)
    if (std::abs(d0.values[i] - 2.9) <= 1e-12 && std::abs(d0.probs[i] - 0.25) <= 1e-12)
      found = true;
  CHECK(found);

  // unbiasedness: the mean is v_pi(0) = 1 + 0.9
  CHECK(d0.mean() == doctest::Approx(1.9).epsilon(1e-12));
  CHECK(dists[2].values == Vec{0.0});  // terminal start: point mass at zero
}

TEST_CASE("factored moment recursion matches brute-force enumeration exactly") {
  const TabularMdp m = mdp::make_random_tabular(3, 2, 0.6, 13);
  const TabularPolicy mu = mdp::make_random_policy(m, 2);
  const TabularPolicy pi = mdp::make_random_policy(m, 3);
  Rng rng(8);
  const Vec v_est = test::random_values(rng, 3);

  const TruncationConfig configs[] = {
      {1.0, kInf, kInf, false}, {0.5, kInf, kInf, false}, {0.0, 1.0, 1.5, false},
      {1.0, 1.2, 2.0, false},
  };
  for (const auto& cfg : configs) {
    const int H = 6;
    const auto dists = oracle::enumerate_returns(m, mu, pi, H, cfg, v_est);
    const auto mom = oracle::tis_moments(m, mu, pi, H, cfg, v_est);
    for (int s = 0; s < m.n_states; ++s) {
      CHECK(std::abs(dists[s].total_prob() - 1.0) <= 1e-10);
      // relative tolerances: uncapped ratio products can make moments large
      CHECK(std::abs(dists[s].mean() - mom.m1[H][s]) <=
            1e-10 * (1.0 + std::abs(mom.m1[H][s])));
      CHECK(std::abs(dists[s].second_moment() - mom.m2[H][s]) <=
            1e-10 * (1.0 + std::abs(mom.m2[H][s])));
    }
  }
}

TEST_CASE("unbiasedness: off-policy TIS mean equals v_pi at machine precision") {
  for (std::uint64_t seed : {41ull, 42ull}) {
    const TabularMdp m = mdp::make_random_tabular(4, 3, 0.8, seed);
    const TabularPolicy pi = mdp::make_random_policy(m, seed * 3);
    const TabularPolicy mu = mdp::make_random_policy(m, seed * 5);
    const Vec v = oracle::policy_evaluation(m, pi);
    for (double lambda : {0.0, 0.5, 1.0}) {
      const auto mom = oracle::tis_moments(m, mu, pi, 40, TruncationConfig{lambda, kInf, kInf},
                                           v);
      // with exact v_pi every TD term is conditionally mean-zero, so the
      // truncation bootstrap cancels and the mean is exact at any horizon
      CHECK(sup_diff(mom.m1[40], v) <= 1e-9);
    }
  }
}

TEST_CASE("on-policy consistency: mu = pi with caps at 1 stays unbiased") {
  const TabularMdp m = mdp::make_random_tabular(4, 3, 0.8, 50);
  const TabularPolicy pi = mdp::make_random_policy(m, 51);
  const Vec v = oracle::policy_evaluation(m, pi);
  for (double lambda : {0.0, 0.7, 1.0}) {
    const auto mom = oracle::tis_moments(m, pi, pi, 40, TruncationConfig{lambda, 1.0, 1.0}, v);
    CHECK(sup_diff(mom.m1[40], v) <= 1e-10);
    const auto mom2 = oracle::tis_moments(m, pi, pi, 40, TruncationConfig{lambda, 1.0, 1.5}, v);
    CHECK(sup_diff(mom2.m1[40], v) <= 1e-10);
  }
}

TEST_CASE("sampling from mu_hat shrinks the PDIS variance by epsilon") {
  for (std::uint64_t seed : {61ull, 62ull, 63ull}) {
    const TabularMdp m = mdp::make_random_tabular(4, 2, 0.6, seed);
    const TabularPolicy pi = mdp::make_random_policy(m, seed + 7);
    const auto [r_hat, q_hat] = oracle::compute_q_hat(m, pi);
    const TabularPolicy mu_hat = oracle::optimal_behaviour_policy(pi, q_hat);
    const auto [c_gap, eps] = oracle::epsilon_recursion(m, pi, mu_hat, q_hat);

    // PDIS is the TIS estimator with all-zero value estimates at lambda 1
    const Vec zeros(m.n_states, 0.0);
    const TruncationConfig cfg{1.0, kInf, kInf, false};
    const int H = 60;
    const auto under_pi = oracle::tis_moments(m, pi, pi, H, cfg, zeros);
    const auto under_mu = oracle::tis_moments(m, mu_hat, pi, H, cfg, zeros);
    for (int s = 0; s < m.n_states; ++s) {
      const double var_pi = under_pi.m2[H][s] - under_pi.m1[H][s] * under_pi.m1[H][s];
      const double var_mu = under_mu.m2[H][s] - under_mu.m1[H][s] * under_mu.m1[H][s];
      CHECK(var_mu <= var_pi + 1e-9);
      CHECK(std::abs((var_pi - var_mu) - eps[s]) <= 1e-8);
    }
  }
}

TEST_CASE("enumeration guard refuses state-space explosions quickly") {
  const TabularMdp m = mdp::make_random_tabular(4, 3, 0.8, 70);
  const TabularPolicy u = TabularPolicy::uniform(4, 3);
  CHECK_THROWS_WITH_AS(oracle::enumerate_returns(m, u, u, 12, TruncationConfig{}, Vec(4, 0.0)),
                       doctest::Contains("guard"), std::runtime_error);
}

TEST_CASE("oracle bundle: invariants, purity and CSV export") {
  const TabularMdp m = mdp::make_random_tabular(4, 3, 0.8, 77);
  const TabularPolicy pi = mdp::make_random_policy(m, 78);
  const oracle::OracleBundle a = oracle::compute_oracle_bundle(m, pi);
  const oracle::OracleBundle b = oracle::compute_oracle_bundle(m, pi);

  CHECK(a.v == b.v);
  CHECK(a.q_hat == b.q_hat);
  CHECK(a.epsilon == b.epsilon);
  CHECK(a.mu_hat.prob == b.mu_hat.prob);

  for (double x : a.q_hat) CHECK(x >= 0.0);
  for (double x : a.epsilon) CHECK(x >= 0.0);
  for (double x : a.c_gap) CHECK(x >= 0.0);
  for (int s = 0; s < m.n_states; ++s) {
    double z = 0.0;
    for (int x = 0; x < m.n_actions; ++x) z += a.mu_hat.at(s, x);
    CHECK(z == doctest::Approx(1.0).epsilon(1e-12));
  }

  std::ostringstream csv;
  oracle::write_oracle_csv(a, csv);
  const std::string text = csv.str();
  CHECK(text.substr(0, text.find('\n')) ==
        "state,action,v,q,nu,r_hat,q_hat,r_tilde,q_tilde,mu_hat,j_pi,c_gap,epsilon");
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + m.n_states * m.n_actions);
}
