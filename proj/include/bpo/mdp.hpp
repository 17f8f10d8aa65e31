#pragma once

#include <span>
#include <string>
#include <vector>

#include "bpo/common.hpp"

namespace bpo::mdp {

/** Finite MDP with deterministic rewards r(s, a) and row-stochastic
 * transitions. Terminal states are absorbing self-loops with zero reward. */
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  Vec transitions;          // [s][a][s'] flattened, row-stochastic per (s, a)
  Vec rewards;              // [s][a]
  Vec initial;              // distribution over start states
  std::vector<char> terminal;  // 1 if absorbing
  double discount = 0.0;

  double p(int s, int a, int s2) const {
    return transitions[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  std::span<const double> row(int s, int a) const {
    return {transitions.data() + (static_cast<std::size_t>(s) * n_actions + a) * n_states,
            static_cast<std::size_t>(n_states)};
  }
  double r(int s, int a) const { return rewards[static_cast<std::size_t>(s) * n_actions + a]; }
  bool is_terminal(int s) const { return terminal[s] != 0; }
};

/** Row-stochastic policy table over a TabularMdp's action set. */
struct TabularPolicy {
  int n_states = 0;
  int n_actions = 0;
  Vec prob;  // [s][a]

  double at(int s, int a) const { return prob[static_cast<std::size_t>(s) * n_actions + a]; }
  std::span<const double> row(int s) const {
    return {prob.data() + static_cast<std::size_t>(s) * n_actions,
            static_cast<std::size_t>(n_actions)};
  }
  static TabularPolicy uniform(int n_states, int n_actions) {
    TabularPolicy pi;
    pi.n_states = n_states;
    pi.n_actions = n_actions;
    pi.prob.assign(static_cast<std::size_t>(n_states) * n_actions,
                   1.0 / static_cast<double>(n_actions));
    return pi;
  }
};

/** Returns human-readable violations (empty when the MDP is well formed).
 * Checks sizes, ~1e-9 row-stochasticity, reward finiteness, the initial
 * distribution, discount range (1.0 is flagged) and that terminal states are
 * absorbing with zero reward. */
std::vector<std::string> validate_mdp(const TabularMdp& mdp);

// throws std::invalid_argument listing all violations
void require_valid(const TabularMdp& mdp);

std::vector<std::string> validate_policy(const TabularMdp& mdp, const TabularPolicy& pi);

/** The four-state aliased corridor: start in state 0, state 3 terminal,
 * reward -1 per step, action effects swapped in state 1, left in state 0 is a
 * no-op. Action 0 is "left", action 1 is "right". */
TabularMdp make_short_corridor(double discount = 0.99);

constexpr int kCorridorLeft = 0;
constexpr int kCorridorRight = 1;

/** Per-action policy features shared by every corridor state (the states are
 * deliberately indistinguishable to a linear policy): left -> [0, 1],
 * right -> [1, 0]. Row a is the feature vector for action a. */
std::vector<Vec> corridor_action_features();

/** Random dense MDP: Dirichlet(1) transition rows, rewards uniform in
 * [-1, 1], uniform initial distribution, no terminal states. Deterministic in
 * (sizes, discount, seed). */
TabularMdp make_random_tabular(int n_states, int n_actions, double discount, std::uint64_t seed);

/** Random full-support policy table (normalised Exp(1) weights). */
TabularPolicy make_random_policy(const TabularMdp& mdp, std::uint64_t seed);

// corridor policy with fixed p(right) in every state; handy for oracle checks
TabularPolicy corridor_policy(double p_right);

}  // namespace bpo::mdp
