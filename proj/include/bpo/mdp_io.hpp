#pragma once

#include <iosfwd>
#include <string>

#include "bpo/mdp.hpp"

namespace bpo::mdp {

/** Plain-text MDP description, one keyword per line, '#' comments:
 *
 *   states 4
 *   actions 2
 *   discount 0.99
 *   initial 1 0 0 0
 *   terminal 3
 *   reward <s> <a> <r>
 *   transition <s> <a> <p(s'=0)> ... <p(s'=n-1)>
 *
 * `terminal` takes any number of ids and may repeat. Terminal states are
 * filled in as zero-reward self-loops automatically; every non-terminal
 * (s, a) needs a reward and a transition line. The result is validated. */
TabularMdp read_mdp_text(std::istream& in);
TabularMdp load_mdp_text(const std::string& path);

void write_mdp_text(const TabularMdp& mdp, std::ostream& out);
void save_mdp_text(const TabularMdp& mdp, const std::string& path);

/** Policy table as one line per state with n_actions probabilities
 * ('#' comments and blank lines allowed). Rows are validated against the
 * MDP's sizes and checked for stochasticity. */
TabularPolicy read_policy_text(std::istream& in, const TabularMdp& mdp);
TabularPolicy load_policy_text(const std::string& path, const TabularMdp& mdp);

void write_policy_text(const TabularPolicy& pi, std::ostream& out);

}  // namespace bpo::mdp
