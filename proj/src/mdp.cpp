#include "bpo/mdp.hpp"

#include <cmath>
#include <sstream>

namespace bpo::mdp {

std::vector<std::string> validate_mdp(const TabularMdp& mdp) {
  std::vector<std::string> out;
  auto note = [&out](const std::string& s) { out.push_back(s); };

  if (mdp.n_states <= 0 || mdp.n_actions <= 0) {
    note("sizes: n_states and n_actions must be positive");
    return out;
  }
  const auto ns = static_cast<std::size_t>(mdp.n_states);
  const auto na = static_cast<std::size_t>(mdp.n_actions);
  if (mdp.transitions.size() != ns * na * ns)
    note("sizes: transitions has " + std::to_string(mdp.transitions.size()) +
         " entries, expected " + std::to_string(ns * na * ns));
  if (mdp.rewards.size() != ns * na)
    note("sizes: rewards has " + std::to_string(mdp.rewards.size()) + " entries, expected " +
         std::to_string(ns * na));
  if (mdp.initial.size() != ns)
    note("sizes: initial distribution has " + std::to_string(mdp.initial.size()) +
         " entries, expected " + std::to_string(ns));
  if (mdp.terminal.size() != ns)
    note("sizes: terminal flags have " + std::to_string(mdp.terminal.size()) +
         " entries, expected " + std::to_string(ns));
  if (!out.empty()) return out;  // later checks index by size

  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        const double p = mdp.p(s, a, s2);
        if (!(p >= 0.0) || !std::isfinite(p)) {
          std::ostringstream os;
          os << "transitions: p(s'=" << s2 << " | s=" << s << ", a=" << a
             << ") = " << p << " is not a finite non-negative probability";
          note(os.str());
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        std::ostringstream os;
        os << "transitions: row (s=" << s << ", a=" << a << ") sums to " << sum
           << ", expected 1 within 1e-9";
        note(os.str());
      }
      if (!std::isfinite(mdp.r(s, a))) {
        std::ostringstream os;
        os << "rewards: r(s=" << s << ", a=" << a << ") is not finite";
        note(os.str());
      }
    }
  }

  double isum = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) {
    if (!(mdp.initial[s] >= 0.0) || !std::isfinite(mdp.initial[s]))
      note("initial: entry " + std::to_string(s) + " is not a finite non-negative probability");
    isum += mdp.initial[s];
  }
  if (std::abs(isum - 1.0) > 1e-9)
    note("initial: distribution sums to " + std::to_string(isum) + ", expected 1 within 1e-9");

  if (!(mdp.discount >= 0.0) || mdp.discount > 1.0 || !std::isfinite(mdp.discount))
    note("discount: must lie in [0, 1), got " + std::to_string(mdp.discount));
  else if (mdp.discount == 1.0)
    note("discount: 1.0 is only valid for undiscounted episodic solves");

  for (int s = 0; s < mdp.n_states; ++s) {
    if (!mdp.is_terminal(s)) continue;
    for (int a = 0; a < mdp.n_actions; ++a) {
      if (std::abs(mdp.p(s, a, s) - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "terminal: state " << s << " must self-loop under action " << a;
        note(os.str());
      }
      if (mdp.r(s, a) != 0.0) {
        std::ostringstream os;
        os << "terminal: state " << s << " must have zero reward under action " << a;
        note(os.str());
      }
    }
  }
  return out;
}

void require_valid(const TabularMdp& mdp) {
  const auto violations = validate_mdp(mdp);
  if (violations.empty()) return;
  std::string msg = "invalid MDP:";
  for (const auto& v : violations) msg += "\n  " + v;
  throw std::invalid_argument(msg);
}

std::vector<std::string> validate_policy(const TabularMdp& mdp, const TabularPolicy& pi) {
  std::vector<std::string> out;
  if (pi.n_states != mdp.n_states || pi.n_actions != mdp.n_actions) {
    out.push_back("policy: shape (" + std::to_string(pi.n_states) + ", " +
                  std::to_string(pi.n_actions) + ") does not match MDP (" +
                  std::to_string(mdp.n_states) + ", " + std::to_string(mdp.n_actions) + ")");
    return out;
  }
  for (int s = 0; s < pi.n_states; ++s) {
    double sum = 0.0;
    for (int a = 0; a < pi.n_actions; ++a) {
      const double p = pi.at(s, a);
      if (!(p >= 0.0) || !std::isfinite(p))
        out.push_back("policy: pi(a=" + std::to_string(a) + " | s=" + std::to_string(s) +
                      ") is not a finite non-negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      out.push_back("policy: row s=" + std::to_string(s) + " sums to " + std::to_string(sum));
  }
  return out;
}

TabularMdp make_short_corridor(double discount) {
  TabularMdp m;
  m.n_states = 4;
  m.n_actions = 2;
  m.discount = discount;
  m.transitions.assign(4 * 2 * 4, 0.0);
  m.rewards.assign(4 * 2, -1.0);
  m.initial = {1.0, 0.0, 0.0, 0.0};
  m.terminal = {0, 0, 0, 1};

  auto set = [&m](int s, int a, int s2) {
    m.transitions[(static_cast<std::size_t>(s) * 2 + a) * 4 + s2] = 1.0;
  };
  set(0, kCorridorLeft, 0);   // wall
  set(0, kCorridorRight, 1);
  set(1, kCorridorLeft, 2);   // reversed
  set(1, kCorridorRight, 0);  // reversed
  set(2, kCorridorLeft, 1);
  set(2, kCorridorRight, 3);
  set(3, kCorridorLeft, 3);
  set(3, kCorridorRight, 3);
  m.rewards[3 * 2 + kCorridorLeft] = 0.0;
  m.rewards[3 * 2 + kCorridorRight] = 0.0;
  return m;
}

std::vector<Vec> corridor_action_features() {
  return {Vec{0.0, 1.0}, Vec{1.0, 0.0}};  // left, right
}

TabularMdp make_random_tabular(int n_states, int n_actions, double discount, std::uint64_t seed) {
  require(n_states > 0 && n_actions > 0, "make_random_tabular: sizes must be positive");
  require(discount >= 0.0 && discount < 1.0, "make_random_tabular: discount must be in [0, 1)");
  Rng rng(seed);
  TabularMdp m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.discount = discount;
  m.transitions.resize(static_cast<std::size_t>(n_states) * n_actions * n_states);
  m.rewards.resize(static_cast<std::size_t>(n_states) * n_actions);
  m.initial.assign(n_states, 1.0 / n_states);
  m.terminal.assign(n_states, 0);

  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      // Dirichlet(1) row via normalised exponentials
      double total = 0.0;
      const std::size_t base = (static_cast<std::size_t>(s) * n_actions + a) * n_states;
      for (int s2 = 0; s2 < n_states; ++s2) {
        const double e = -std::log(1.0 - rng.uniform());
        m.transitions[base + s2] = e;
        total += e;
      }
      for (int s2 = 0; s2 < n_states; ++s2) m.transitions[base + s2] /= total;
      m.rewards[static_cast<std::size_t>(s) * n_actions + a] = rng.uniform(-1.0, 1.0);
    }
  }
  return m;
}

TabularPolicy make_random_policy(const TabularMdp& mdp, std::uint64_t seed) {
  Rng rng(seed);
  TabularPolicy pi;
  pi.n_states = mdp.n_states;
  pi.n_actions = mdp.n_actions;
  pi.prob.resize(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    double total = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double e = -std::log(1.0 - rng.uniform());
      pi.prob[static_cast<std::size_t>(s) * mdp.n_actions + a] = e;
      total += e;
    }
    for (int a = 0; a < mdp.n_actions; ++a)
      pi.prob[static_cast<std::size_t>(s) * mdp.n_actions + a] /= total;
  }
  return pi;
}

TabularPolicy corridor_policy(double p_right) {
  require(p_right >= 0.0 && p_right <= 1.0, "corridor_policy: p_right must be a probability");
  TabularPolicy pi;
  pi.n_states = 4;
  pi.n_actions = 2;
  pi.prob.assign(8, 0.0);
  for (int s = 0; s < 4; ++s) {
    pi.prob[static_cast<std::size_t>(s) * 2 + kCorridorLeft] = 1.0 - p_right;
    pi.prob[static_cast<std::size_t>(s) * 2 + kCorridorRight] = p_right;
  }
  return pi;
}

}  // namespace bpo::mdp
