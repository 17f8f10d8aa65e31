#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bpo/agents.hpp"

namespace bpo::harness {

/** One experiment = (environment, agent, hyperparameters). Seeds and the
 * output directory come from the command line so one config file can drive
 * many runs. */
struct ExperimentConfig {
  std::string env;  // "shortcorridor" | "pointmass"
  agents::AgentKind agent = agents::AgentKind::reinforce;
  agents::PhaseConfig phase;
  int horizon = 0;                 // 0 picks the environment default
  double noise_scale = 0.05;       // point-mass dynamics noise
  std::int64_t max_env_steps = 0;  // optional collection cap, 0 = phases only
};

void validate(const ExperimentConfig& cfg);

/** Flat JSON object keyed by the hyperparameter-table names (rho_bar, c_bar,
 * traj, n_mu_epochs, polyak_tau, weight_td_update, clip_targets,
 * zero_norm_init, layer_norm, symlog, ...). Unknown keys and type mismatches
 * throw std::invalid_argument naming the key. */
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);  // round-trips through parse_config

/** Env + policy factories for the named environment. Throws on unknown ids. */
agents::TrainSetup make_setup(const ExperimentConfig& cfg, std::uint64_t seed);

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<agents::PhaseMetrics> rows;
};

/** Trains one seed to the phase budget (or max_env_steps). Deterministic in
 * (cfg, seed). */
RunRecord run_single(const ExperimentConfig& cfg, std::uint64_t seed);

// per-run CSV schema; the header is pinned by a golden test
extern const char* const kRunCsvHeader;
extern const char* const kAggregateCsvHeader;

void write_run_csv(const RunRecord& rec, std::ostream& out);
RunRecord read_run_csv(std::istream& in, const std::string& name_for_errors);

/** Runs every seed (parallel jobs, no shared state), writes run_<seed>.csv
 * per seed plus aggregate.csv, and returns the records. */
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::string& out_dir);

struct AggregateRow {
  int phase = 0;
  double env_steps = 0.0;  // mean across runs
  double eval_mean = 0.0;  // mean of per-run eval means
  double eval_se = 0.0;    // standard error across runs
  int n_runs = 0;
};

/** Mean/SE across runs at each phase. Runs must share the same phase grid;
 * otherwise throws listing the offending files. Permutation-invariant. */
std::vector<AggregateRow> aggregate_records(const std::vector<RunRecord>& records,
                                            const std::vector<std::string>& names);
std::vector<AggregateRow> aggregate_directory(const std::string& in_dir);
void write_aggregate_csv(const std::vector<AggregateRow>& rows, std::ostream& out);

/** Final-phase eval comparison between two run directories using a
 * non-overlap rule on mean +/- 1.96 SE intervals (this tool's own stand-in
 * for a significance test; labeled as such in the output). */
struct CompareResult {
  double mean_a = 0.0, se_a = 0.0;
  double mean_b = 0.0, se_b = 0.0;
  int n_a = 0, n_b = 0;
  bool significant = false;  // intervals do not overlap
  int better = 0;            // +1: a ahead, -1: b ahead, 0: tied means
};
CompareResult compare_directories(const std::string& a_dir, const std::string& b_dir);
std::string describe(const CompareResult& r);

/** Estimates P(X > 4), X ~ N(0,1), two ways per trial: naive Monte Carlo
 * under N(0,1) and importance sampling under N(0, proposal_std^2) with
 * weights p/q. Repeats for n_trials to expose the estimator distributions. */
struct TailDemoResult {
  double truth = 0.0;  // closed form via erfc
  double naive_mean = 0.0, naive_variance = 0.0;
  double is_mean = 0.0, is_variance = 0.0;
  Vec naive_estimates;  // one per trial
  Vec is_estimates;
};
TailDemoResult gaussian_tail_demo(int n_samples, double proposal_std, std::uint64_t seed,
                                  int n_trials = 1000);
void write_demo_csv(const TailDemoResult& r, std::ostream& out);

bool verbose();  // BPOLAB_VERBOSE environment switch (progress logging only)

}  // namespace bpo::harness
