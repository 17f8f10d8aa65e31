// python surface: the exact tabular oracle, the truncated IS lambda-return,
// config-driven training runs and the sampling demo. thin readonly views over
// the C++ structs; heavy lifting stays in bpolab_core.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <stdexcept>

#include "bpo/harness.hpp"
#include "bpo/mdp.hpp"
#include "bpo/mdp_io.hpp"
#include "bpo/oracle.hpp"
#include "bpo/returns.hpp"

namespace py = pybind11;
using namespace bpo;

namespace {

// vector<char> flags cross the boundary as lists of ints
std::vector<int> flags_out(const std::vector<char>& v) {
  return {v.begin(), v.end()};
}

std::vector<char> flags_in(const std::vector<int>& v) {
  std::vector<char> out;
  out.reserve(v.size());
  for (int x : v) out.push_back(x ? 1 : 0);
  return out;
}

/** One-call estimator entry point: builds the flat batch layout from
 * per-step arrays, validates it, and runs the backward recursion. `terminated`
 * has one flag per episode (true: ended in a terminal state; false: cut off,
 * so the matching `bootstrap` entry is used). */
Vec lambda_returns(const Vec& rewards, const Vec& log_mu, const Vec& log_pi,
                   const std::vector<std::size_t>& ep_start, const std::vector<int>& terminated,
                   const Vec& values, const Vec& bootstrap, const ret::TruncationConfig& cfg,
                   double gamma) {
  ret::RolloutBatch b;
  const std::size_t n = rewards.size();
  b.obs.assign(n, Vec{});
  b.state_ids.assign(n, -1);
  b.actions.resize(n);
  b.rewards = rewards;
  b.log_mu = log_mu;
  b.log_pi = log_pi;
  b.done.assign(n, 0);
  b.truncated.assign(n, 0);
  b.ep_start = ep_start;
  if (terminated.size() != b.n_episodes())
    throw std::invalid_argument("lambda_returns: one terminated flag per episode required");
  for (std::size_t e = 0; e < b.n_episodes(); ++e)
    (terminated[e] ? b.done : b.truncated)[b.ep_end(e) - 1] = 1;
  b.check_consistent();
  return ret::tis_td_lambda_returns(b, values, bootstrap, cfg, gamma);
}

}  // namespace

PYBIND11_MODULE(_bpolab, m) {
  m.doc() = "variance-reduced off-policy collection lab: exact tabular oracles, the "
            "truncated IS-weighted lambda return, and the config-driven training harness";

  // --- tabular MDPs and policies -------------------------------------------
  py::class_<mdp::TabularMdp>(m, "TabularMdp")
      .def(py::init<>())
      .def_readwrite("n_states", &mdp::TabularMdp::n_states)
      .def_readwrite("n_actions", &mdp::TabularMdp::n_actions)
      .def_readwrite("transitions", &mdp::TabularMdp::transitions)
      .def_readwrite("rewards", &mdp::TabularMdp::rewards)
      .def_readwrite("initial", &mdp::TabularMdp::initial)
      .def_property(
          "terminal", [](const mdp::TabularMdp& s) { return flags_out(s.terminal); },
          [](mdp::TabularMdp& s, const std::vector<int>& v) { s.terminal = flags_in(v); })
      .def_readwrite("discount", &mdp::TabularMdp::discount)
      .def("p", &mdp::TabularMdp::p)
      .def("r", &mdp::TabularMdp::r)
      .def("is_terminal", &mdp::TabularMdp::is_terminal);

  py::class_<mdp::TabularPolicy>(m, "TabularPolicy")
      .def(py::init<>())
      .def_readwrite("n_states", &mdp::TabularPolicy::n_states)
      .def_readwrite("n_actions", &mdp::TabularPolicy::n_actions)
      .def_readwrite("prob", &mdp::TabularPolicy::prob)
      .def("at", &mdp::TabularPolicy::at)
      .def_static("uniform", &mdp::TabularPolicy::uniform);

  m.def("validate_mdp", &mdp::validate_mdp, "human-readable violations, empty when well formed");
  m.def("make_short_corridor", &mdp::make_short_corridor, py::arg("discount") = 0.99);
  m.def("corridor_policy", &mdp::corridor_policy, py::arg("p_right"));
  m.def("make_random_tabular", &mdp::make_random_tabular, py::arg("n_states"),
        py::arg("n_actions"), py::arg("discount"), py::arg("seed"));
  m.def("make_random_policy", &mdp::make_random_policy, py::arg("mdp"), py::arg("seed"));

  m.def("load_mdp_text", &mdp::load_mdp_text, py::arg("path"));
  m.def("save_mdp_text", &mdp::save_mdp_text, py::arg("mdp"), py::arg("path"));
  m.def("load_policy_text", &mdp::load_policy_text, py::arg("path"), py::arg("mdp"));
  m.def(
      "policy_text",
      [](const mdp::TabularPolicy& pi) {
        std::ostringstream os;
        mdp::write_policy_text(pi, os);
        return os.str();
      },
      py::arg("policy"), "the policy in the text format the CLI reads");

  // --- exact oracle ----------------------------------------------------------
  py::class_<oracle::OracleBundle>(m, "OracleBundle")
      .def_readonly("n_states", &oracle::OracleBundle::n_states)
      .def_readonly("n_actions", &oracle::OracleBundle::n_actions)
      .def_readonly("v", &oracle::OracleBundle::v)
      .def_readonly("q", &oracle::OracleBundle::q)
      .def_readonly("nu", &oracle::OracleBundle::nu)
      .def_readonly("r_hat", &oracle::OracleBundle::r_hat)
      .def_readonly("q_hat", &oracle::OracleBundle::q_hat)
      .def_readonly("r_tilde", &oracle::OracleBundle::r_tilde)
      .def_readonly("q_tilde", &oracle::OracleBundle::q_tilde)
      .def_readonly("j_pi", &oracle::OracleBundle::j_pi)
      .def_readonly("epsilon", &oracle::OracleBundle::epsilon)
      .def_readonly("c_gap", &oracle::OracleBundle::c_gap)
      .def_readonly("mu_hat", &oracle::OracleBundle::mu_hat)
      .def("csv", [](const oracle::OracleBundle& b) {
        std::ostringstream os;
        oracle::write_oracle_csv(b, os);
        return os.str();
      });

  m.def("policy_evaluation", &oracle::policy_evaluation, py::arg("mdp"), py::arg("pi"));
  m.def("episodic_value", &oracle::episodic_value, py::arg("mdp"), py::arg("pi"));
  m.def("q_from_v", &oracle::q_from_v, py::arg("mdp"), py::arg("v"));
  m.def("compute_q_hat", &oracle::compute_q_hat, py::arg("mdp"), py::arg("pi"),
        "returns (r_hat, q_hat)");
  m.def("optimal_behaviour_policy", &oracle::optimal_behaviour_policy, py::arg("pi"),
        py::arg("q_hat"));
  m.def("compute_oracle_bundle", &oracle::compute_oracle_bundle, py::arg("mdp"), py::arg("pi"));

  // --- the return estimator --------------------------------------------------
  py::class_<ret::TruncationConfig>(m, "TruncationConfig")
      .def(py::init([](double lambda, double c_bar, double rho_bar, bool traj) {
             ret::TruncationConfig cfg{lambda, c_bar, rho_bar, traj};
             ret::validate(cfg);
             return cfg;
           }),
           py::arg("lam") = 1.0, py::arg("c_bar") = kInf, py::arg("rho_bar") = kInf,
           py::arg("traj") = false)
      .def_readwrite("lam", &ret::TruncationConfig::lambda)
      .def_readwrite("c_bar", &ret::TruncationConfig::c_bar)
      .def_readwrite("rho_bar", &ret::TruncationConfig::rho_bar)
      .def_readwrite("traj", &ret::TruncationConfig::traj_mode);

  m.def("lambda_returns", &lambda_returns, py::arg("rewards"), py::arg("log_mu"),
        py::arg("log_pi"), py::arg("ep_start"), py::arg("terminated"), py::arg("values"),
        py::arg("bootstrap"), py::arg("cfg"), py::arg("gamma"));

  // --- training harness --------------------------------------------------------
  py::class_<harness::ExperimentConfig>(m, "ExperimentConfig")
      .def_property_readonly("env", [](const harness::ExperimentConfig& c) { return c.env; })
      .def_property_readonly(
          "agent", [](const harness::ExperimentConfig& c) { return agents::agent_name(c.agent); })
      .def_property_readonly(
          "total_phases",
          [](const harness::ExperimentConfig& c) { return c.phase.total_phases; })
      .def("json", &harness::config_to_json);

  m.def("parse_config", &harness::parse_config, py::arg("json_text"));
  m.def("load_config", &harness::load_config, py::arg("path"));

  py::class_<agents::PhaseMetrics>(m, "PhaseMetrics")
      .def_readonly("phase", &agents::PhaseMetrics::phase)
      .def_readonly("env_steps", &agents::PhaseMetrics::env_steps)
      .def_readonly("eval_mean", &agents::PhaseMetrics::eval_mean)
      .def_readonly("eval_se", &agents::PhaseMetrics::eval_se)
      .def_readonly("policy_loss", &agents::PhaseMetrics::policy_loss)
      .def_readonly("value_loss", &agents::PhaseMetrics::value_loss)
      .def_readonly("entropy", &agents::PhaseMetrics::entropy)
      .def_readonly("q_loss", &agents::PhaseMetrics::q_loss)
      .def_readonly("qhat_loss", &agents::PhaseMetrics::qhat_loss)
      .def_readonly("mu_loss", &agents::PhaseMetrics::mu_loss)
      .def_readonly("mean_ratio", &agents::PhaseMetrics::mean_ratio)
      .def_readonly("max_ratio", &agents::PhaseMetrics::max_ratio)
      .def_readonly("trunc_frac", &agents::PhaseMetrics::trunc_frac)
      .def_readonly("qhat_mean", &agents::PhaseMetrics::qhat_mean)
      .def_readonly("qhat_max", &agents::PhaseMetrics::qhat_max);

  py::class_<harness::RunRecord>(m, "RunRecord")
      .def_readonly("seed", &harness::RunRecord::seed)
      .def_readonly("rows", &harness::RunRecord::rows);

  m.def("run_single", &harness::run_single, py::arg("config"), py::arg("seed"),
        py::call_guard<py::gil_scoped_release>(),
        "one deterministic training run; returns the per-phase metric rows");
  m.def("run_experiment", &harness::run_experiment, py::arg("config"), py::arg("seeds"),
        py::arg("out_dir"), py::call_guard<py::gil_scoped_release>(),
        "train every seed, write run_<seed>.csv files plus aggregate.csv");

  py::class_<harness::AggregateRow>(m, "AggregateRow")
      .def_readonly("phase", &harness::AggregateRow::phase)
      .def_readonly("env_steps", &harness::AggregateRow::env_steps)
      .def_readonly("eval_mean", &harness::AggregateRow::eval_mean)
      .def_readonly("eval_se", &harness::AggregateRow::eval_se)
      .def_readonly("n_runs", &harness::AggregateRow::n_runs);

  m.def("aggregate_directory", &harness::aggregate_directory, py::arg("in_dir"));

  py::class_<harness::CompareResult>(m, "CompareResult")
      .def_readonly("mean_a", &harness::CompareResult::mean_a)
      .def_readonly("se_a", &harness::CompareResult::se_a)
      .def_readonly("mean_b", &harness::CompareResult::mean_b)
      .def_readonly("se_b", &harness::CompareResult::se_b)
      .def_readonly("n_a", &harness::CompareResult::n_a)
      .def_readonly("n_b", &harness::CompareResult::n_b)
      .def_readonly("significant", &harness::CompareResult::significant)
      .def_readonly("better", &harness::CompareResult::better)
      .def("__str__", &harness::describe);

  m.def("compare_directories", &harness::compare_directories, py::arg("a_dir"), py::arg("b_dir"));

  py::class_<harness::TailDemoResult>(m, "TailDemoResult")
      .def_readonly("truth", &harness::TailDemoResult::truth)
      .def_readonly("naive_mean", &harness::TailDemoResult::naive_mean)
      .def_readonly("naive_variance", &harness::TailDemoResult::naive_variance)
      .def_readonly("is_mean", &harness::TailDemoResult::is_mean)
      .def_readonly("is_variance", &harness::TailDemoResult::is_variance)
      .def_readonly("naive_estimates", &harness::TailDemoResult::naive_estimates)
      .def_readonly("is_estimates", &harness::TailDemoResult::is_estimates);

  m.def("gaussian_tail_demo", &harness::gaussian_tail_demo, py::arg("n_samples"),
        py::arg("proposal_std"), py::arg("seed"), py::arg("n_trials") = 1000,
        py::call_guard<py::gil_scoped_release>());
}
