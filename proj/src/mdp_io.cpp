#include "bpo/mdp_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

namespace bpo::mdp {

namespace {

[[noreturn]] void fail(int line_no, const std::string& what) {
  throw std::invalid_argument("mdp text: line " + std::to_string(line_no) + ": " + what);
}

// strips '#' comments; returns false for blank lines
bool tokenize(const std::string& line, std::vector<std::string>& toks) {
  toks.clear();
  std::istringstream is(line.substr(0, line.find('#')));
  std::string t;
  while (is >> t) toks.push_back(t);
  return !toks.empty();
}

double to_num(const std::string& tok, int line_no) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(tok, &used);
  } catch (const std::exception&) {
    fail(line_no, "expected a number, got '" + tok + "'");
  }
  if (used != tok.size()) fail(line_no, "expected a number, got '" + tok + "'");
  return x;
}

int to_int(const std::string& tok, int line_no) {
  const double x = to_num(tok, line_no);
  const int i = static_cast<int>(x);
  if (static_cast<double>(i) != x) fail(line_no, "expected an integer, got '" + tok + "'");
  return i;
}

}  // namespace

TabularMdp read_mdp_text(std::istream& in) {
  TabularMdp m;
  m.n_states = -1;
  m.n_actions = -1;
  bool have_discount = false, have_initial = false;
  std::vector<int> terminal_ids;
  struct Row {
    int s, a, line_no;
    Vec values;  // single reward or a transition row
  };
  std::vector<Row> rewards, transitions;

  std::string line;
  std::vector<std::string> toks;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!tokenize(line, toks)) continue;
    const std::string& kw = toks[0];
    const std::size_t nargs = toks.size() - 1;

    if (kw == "states" || kw == "actions") {
      if (nargs != 1) fail(line_no, kw + " takes one count");
      const int n = to_int(toks[1], line_no);
      if (n <= 0) fail(line_no, kw + " must be positive");
      (kw == "states" ? m.n_states : m.n_actions) = n;
    } else if (kw == "discount") {
      if (nargs != 1) fail(line_no, "discount takes one value");
      m.discount = to_num(toks[1], line_no);
      have_discount = true;
    } else if (kw == "initial") {
      m.initial.clear();
      for (std::size_t i = 1; i < toks.size(); ++i) m.initial.push_back(to_num(toks[i], line_no));
      have_initial = true;
    } else if (kw == "terminal") {
      for (std::size_t i = 1; i < toks.size(); ++i) terminal_ids.push_back(to_int(toks[i], line_no));
    } else if (kw == "reward" || kw == "transition") {
      if (nargs < 3) fail(line_no, kw + " needs <s> <a> and values");
      Row row;
      row.s = to_int(toks[1], line_no);
      row.a = to_int(toks[2], line_no);
      row.line_no = line_no;
      for (std::size_t i = 3; i < toks.size(); ++i) row.values.push_back(to_num(toks[i], line_no));
      (kw == "reward" ? rewards : transitions).push_back(std::move(row));
    } else {
      fail(line_no, "unknown keyword '" + kw + "'");
    }
  }

  if (m.n_states <= 0) throw std::invalid_argument("mdp text: missing 'states' line");
  if (m.n_actions <= 0) throw std::invalid_argument("mdp text: missing 'actions' line");
  if (!have_discount) throw std::invalid_argument("mdp text: missing 'discount' line");
  if (!have_initial) throw std::invalid_argument("mdp text: missing 'initial' line");
  if (m.initial.size() != static_cast<std::size_t>(m.n_states))
    throw std::invalid_argument("mdp text: initial distribution has " +
                                std::to_string(m.initial.size()) + " entries, expected " +
                                std::to_string(m.n_states));

  const auto ns = static_cast<std::size_t>(m.n_states);
  const auto na = static_cast<std::size_t>(m.n_actions);
  m.terminal.assign(ns, 0);
  for (int t : terminal_ids) {
    if (t < 0 || t >= m.n_states)
      throw std::invalid_argument("mdp text: terminal state " + std::to_string(t) +
                                  " out of range");
    m.terminal[static_cast<std::size_t>(t)] = 1;
  }

  // terminal states are absorbing zero-reward by construction; everything
  // else must be spelled out
  m.rewards.assign(ns * na, 0.0);
  m.transitions.assign(ns * na * ns, 0.0);
  std::vector<char> have_r(ns * na, 0), have_p(ns * na, 0);
  for (int s = 0; s < m.n_states; ++s)
    if (m.is_terminal(s))
      for (int a = 0; a < m.n_actions; ++a) {
        const std::size_t sa = static_cast<std::size_t>(s) * na + static_cast<std::size_t>(a);
        have_r[sa] = have_p[sa] = 1;
        m.transitions[sa * ns + static_cast<std::size_t>(s)] = 1.0;
      }

  auto check_sa = [&m](const Row& row) {
    if (row.s < 0 || row.s >= m.n_states || row.a < 0 || row.a >= m.n_actions)
      fail(row.line_no, "(s=" + std::to_string(row.s) + ", a=" + std::to_string(row.a) +
                            ") out of range");
  };
  for (const auto& row : rewards) {
    check_sa(row);
    if (row.values.size() != 1) fail(row.line_no, "reward takes exactly one value");
    const std::size_t sa = static_cast<std::size_t>(row.s) * na + static_cast<std::size_t>(row.a);
    m.rewards[sa] = row.values[0];
    have_r[sa] = 1;
  }
  for (const auto& row : transitions) {
    check_sa(row);
    if (row.values.size() != ns)
      fail(row.line_no,
           "transition row has " + std::to_string(row.values.size()) + " probabilities, expected " +
               std::to_string(m.n_states));
    const std::size_t sa = static_cast<std::size_t>(row.s) * na + static_cast<std::size_t>(row.a);
    for (std::size_t s2 = 0; s2 < ns; ++s2) m.transitions[sa * ns + s2] = row.values[s2];
    have_p[sa] = 1;
  }

  for (int s = 0; s < m.n_states; ++s)
    for (int a = 0; a < m.n_actions; ++a) {
      const std::size_t sa = static_cast<std::size_t>(s) * na + static_cast<std::size_t>(a);
      if (!have_r[sa])
        throw std::invalid_argument("mdp text: missing reward for (s=" + std::to_string(s) +
                                    ", a=" + std::to_string(a) + ")");
      if (!have_p[sa])
        throw std::invalid_argument("mdp text: missing transition row for (s=" +
                                    std::to_string(s) + ", a=" + std::to_string(a) + ")");
    }

  require_valid(m);
  return m;
}

TabularMdp load_mdp_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open mdp file: " + path);
  return read_mdp_text(in);
}

void write_mdp_text(const TabularMdp& m, std::ostream& out) {
  require_valid(m);
  out << std::setprecision(17);
  out << "states " << m.n_states << "\n";
  out << "actions " << m.n_actions << "\n";
  out << "discount " << m.discount << "\n";
  out << "initial";
  for (double p : m.initial) out << ' ' << p;
  out << "\n";
  bool any_terminal = false;
  for (int s = 0; s < m.n_states; ++s) any_terminal |= m.is_terminal(s);
  if (any_terminal) {
    out << "terminal";
    for (int s = 0; s < m.n_states; ++s)
      if (m.is_terminal(s)) out << ' ' << s;
    out << "\n";
  }
  for (int s = 0; s < m.n_states; ++s) {
    if (m.is_terminal(s)) continue;
    for (int a = 0; a < m.n_actions; ++a) {
      out << "reward " << s << ' ' << a << ' ' << m.r(s, a) << "\n";
      out << "transition " << s << ' ' << a;
      for (double p : m.row(s, a)) out << ' ' << p;
      out << "\n";
    }
  }
}

void save_mdp_text(const TabularMdp& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open file for writing: " + path);
  write_mdp_text(m, out);
  if (!out.flush()) throw std::runtime_error("write failed: " + path);
}

TabularPolicy read_policy_text(std::istream& in, const TabularMdp& mdp) {
  TabularPolicy pi;
  pi.n_states = mdp.n_states;
  pi.n_actions = mdp.n_actions;

  std::string line;
  std::vector<std::string> toks;
  int line_no = 0, rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!tokenize(line, toks)) continue;
    if (toks.size() != static_cast<std::size_t>(mdp.n_actions))
      throw std::invalid_argument("policy text: line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(mdp.n_actions) + " probabilities, got " +
                                  std::to_string(toks.size()));
    for (const auto& t : toks) pi.prob.push_back(to_num(t, line_no));
    ++rows;
  }
  if (rows != mdp.n_states)
    throw std::invalid_argument("policy text: " + std::to_string(rows) + " rows, expected " +
                                std::to_string(mdp.n_states));
  const auto errs = validate_policy(mdp, pi);
  if (!errs.empty()) {
    std::string msg = "policy text:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw std::invalid_argument(msg);
  }
  return pi;
}

TabularPolicy load_policy_text(const std::string& path, const TabularMdp& mdp) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open policy file: " + path);
  return read_policy_text(in, mdp);
}

void write_policy_text(const TabularPolicy& pi, std::ostream& out) {
  out << std::setprecision(17);
  for (int s = 0; s < pi.n_states; ++s) {
    for (int a = 0; a < pi.n_actions; ++a) out << (a ? " " : "") << pi.at(s, a);
    out << "\n";
  }
}

}  // namespace bpo::mdp
