// bpolab: train/evaluate the BPO agents, aggregate and compare run
// directories, dump exact tabular oracle tables, and run the Gaussian-tail
// importance-sampling demo. Exits 0 on success; on failure prints a single
// "error: ..." line to stderr and exits 1.

#include <fstream>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "bpo/harness.hpp"
#include "bpo/mdp_io.hpp"
#include "bpo/oracle.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::vector<std::uint64_t>& seeds,
            const std::string& out_dir) {
  const auto cfg = bpo::harness::load_config(config_path);
  const auto records = bpo::harness::run_experiment(cfg, seeds, out_dir);
  std::cout << "wrote " << records.size() << " run(s) and aggregate.csv to " << out_dir << "\n";
  return 0;
}

int cmd_aggregate(const std::string& in_dir, const std::string& out_file) {
  const auto rows = bpo::harness::aggregate_directory(in_dir);
  std::ofstream out(out_file);
  if (!out) throw std::runtime_error("cannot write " + out_file);
  bpo::harness::write_aggregate_csv(rows, out);
  std::cout << "aggregated " << (rows.empty() ? 0 : rows.front().n_runs) << " run(s) over "
            << rows.size() << " phase(s) into " << out_file << "\n";
  return 0;
}

int cmd_compare(const std::string& a_dir, const std::string& b_dir) {
  const auto r = bpo::harness::compare_directories(a_dir, b_dir);
  std::cout << bpo::harness::describe(r);
  return 0;
}

int cmd_demo(int samples, double std_dev, int trials, std::uint64_t seed,
             const std::string& out_file) {
  const auto r = bpo::harness::gaussian_tail_demo(samples, std_dev, seed, trials);
  std::cout << std::setprecision(6);
  std::cout << "P(X > 4), X ~ N(0,1); " << trials << " trial(s) of " << samples
            << " sample(s), proposal N(0, " << std_dev * std_dev << ")\n";
  std::cout << "closed form    " << r.truth << "\n";
  std::cout << "naive estimate " << r.naive_mean << " (variance " << r.naive_variance << ")\n";
  std::cout << "IS estimate    " << r.is_mean << " (variance " << r.is_variance << ")\n";
  if (r.naive_variance > 0.0 && r.is_variance > 0.0)
    std::cout << "variance ratio naive/IS = " << r.naive_variance / r.is_variance << "\n";
  if (!out_file.empty()) {
    std::ofstream out(out_file);
    if (!out) throw std::runtime_error("cannot write " + out_file);
    bpo::harness::write_demo_csv(r, out);
    std::cout << "per-trial estimates written to " << out_file << "\n";
  }
  return 0;
}

int cmd_oracle(const std::string& mdp_path, const std::string& policy_path,
               const std::string& out_file) {
  const auto mdp = bpo::mdp::load_mdp_text(mdp_path);
  const auto pi = policy_path.empty()
                      ? bpo::mdp::TabularPolicy::uniform(mdp.n_states, mdp.n_actions)
                      : bpo::mdp::load_policy_text(policy_path, mdp);
  const auto bundle = bpo::oracle::compute_oracle_bundle(mdp, pi);
  if (out_file.empty()) {
    bpo::oracle::write_oracle_csv(bundle, std::cout);
  } else {
    std::ofstream out(out_file);
    if (!out) throw std::runtime_error("cannot write " + out_file);
    bpo::oracle::write_oracle_csv(bundle, out);
    std::cout << "oracle tables for " << bundle.n_states << " state(s) written to " << out_file
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"behaviour-policy optimization lab"};
  app.require_subcommand(1);

  std::string config_path, out_dir, in_dir, out_file, a_dir, b_dir, mdp_path, policy_path;
  std::vector<std::uint64_t> seeds{0};
  int samples = 1000, trials = 1000;
  double std_dev = 2.0;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "train an agent over one or more seeds");
  run->add_option("--config", config_path, "experiment config (flat JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--seeds", seeds, "comma-separated seed list")->delimiter(',');
  run->add_option("--out", out_dir, "output directory")->required();

  auto* agg = app.add_subcommand("aggregate", "mean/SE across run_*.csv files");
  agg->add_option("--in", in_dir, "directory of run CSVs")->required();
  agg->add_option("--out", out_file, "aggregate CSV path")->required();

  auto* cmp = app.add_subcommand("compare", "final-eval comparison of two run directories");
  cmp->add_option("--a", a_dir, "first run directory")->required();
  cmp->add_option("--b", b_dir, "second run directory")->required();

  auto* demo = app.add_subcommand("demo", "built-in demonstrations");
  demo->require_subcommand(1);
  auto* tail = demo->add_subcommand("gaussian-tail", "tail-probability importance sampling");
  tail->add_option("--samples", samples, "samples per trial")->check(CLI::PositiveNumber);
  tail->add_option("--std", std_dev, "proposal standard deviation")->check(CLI::PositiveNumber);
  tail->add_option("--trials", trials, "independent trials")->check(CLI::PositiveNumber);
  tail->add_option("--seed", seed, "rng seed");
  tail->add_option("--out", out_file, "per-trial CSV path");

  auto* orc = app.add_subcommand("oracle", "dump exact value/variance tables for a tabular MDP");
  orc->add_option("--mdp", mdp_path, "MDP text file")->required()->check(CLI::ExistingFile);
  orc->add_option("--policy", policy_path, "policy text file (default: uniform)")
      ->check(CLI::ExistingFile);
  orc->add_option("--out", out_file, "CSV path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, seeds, out_dir);
    if (agg->parsed()) return cmd_aggregate(in_dir, out_file);
    if (cmp->parsed()) return cmd_compare(a_dir, b_dir);
    if (demo->parsed()) return cmd_demo(samples, std_dev, trials, seed, out_file);
    if (orc->parsed()) return cmd_oracle(mdp_path, policy_path, out_file);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
