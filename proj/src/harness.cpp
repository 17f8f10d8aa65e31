#include "bpo/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace bpo::harness {

namespace fs = std::filesystem;
using nlohmann::json;

bool verbose() {
  const char* v = std::getenv("BPOLAB_VERBOSE");
  return v != nullptr && *v != '\0' && std::string(v) != "0";
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.env != "shortcorridor" && cfg.env != "pointmass")
    throw std::invalid_argument("config: unknown env '" + cfg.env + "'");
  if (cfg.horizon < 0) throw std::invalid_argument("config: horizon must be >= 0");
  if (!(cfg.noise_scale >= 0.0) || !std::isfinite(cfg.noise_scale))
    throw std::invalid_argument("config: noise_scale must be finite and >= 0");
  if (cfg.max_env_steps < 0) throw std::invalid_argument("config: max_env_steps must be >= 0");
  agents::validate_phase_config(cfg.phase);
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: top level must be a JSON object");

  ExperimentConfig cfg;
  auto& ph = cfg.phase;
  bool have_env = false, have_agent = false;

  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "env") {
        cfg.env = value.get<std::string>();
        have_env = true;
      } else if (key == "agent") {
        const auto name = value.get<std::string>();
        const auto kind = agents::parse_agent(name);
        if (!kind) throw std::invalid_argument("config: unknown agent '" + name + "'");
        cfg.agent = *kind;
        have_agent = true;
      } else if (key == "horizon") {
        cfg.horizon = value.get<int>();
      } else if (key == "noise_scale") {
        cfg.noise_scale = value.get<double>();
      } else if (key == "max_env_steps") {
        cfg.max_env_steps = value.get<std::int64_t>();
      } else if (key == "total_phases") {
        ph.total_phases = value.get<int>();
      } else if (key == "num_steps") {
        ph.num_steps = value.get<int>();
      } else if (key == "num_envs") {
        ph.num_envs = value.get<int>();
      } else if (key == "n_epochs") {
        ph.n_epochs = value.get<int>();
      } else if (key == "n_qvf_epochs") {
        ph.n_qvf_epochs = value.get<int>();
      } else if (key == "n_mu_epochs") {
        ph.n_mu_epochs = value.get<int>();
      } else if (key == "batch_size") {
        ph.minibatch_size = value.get<int>();
      } else if (key == "replay_size") {
        ph.buffer_capacity = value.get<int>();
      } else if (key == "fqe_batch_size") {
        ph.fqe.batch_size = value.get<int>();
      } else if (key == "gamma") {
        ph.gamma = value.get<double>();
      } else if (key == "lambda") {
        ph.trunc.lambda = value.get<double>();
      } else if (key == "c_bar") {
        ph.trunc.c_bar = value.get<double>();
      } else if (key == "rho_bar") {
        ph.trunc.rho_bar = value.get<double>();
      } else if (key == "traj") {
        ph.trunc.traj_mode = value.get<bool>();
      } else if (key == "clip_range") {
        ph.clip_eps = value.get<double>();
      } else if (key == "beta_value") {
        ph.beta_value = value.get<double>();
      } else if (key == "beta_ent") {
        ph.beta_ent = value.get<double>();
      } else if (key == "lr") {
        ph.lr = value.get<double>();
      } else if (key == "alpha_max") {
        ph.alpha_max = value.get<double>();
      } else if (key == "alpha_min") {
        ph.alpha_min = value.get<double>();
      } else if (key == "normalize_advantages") {
        ph.normalize_advantages = value.get<bool>();
      } else if (key == "eval_episodes") {
        ph.eval_episodes = value.get<int>();
      } else if (key == "polyak_tau") {
        ph.polyak_tau = value.get<double>();
      } else if (key == "weight_td_update") {
        ph.fqe.weight_td_update = value.get<bool>();
      } else if (key == "clip_targets") {
        ph.fqe.clip_targets = value.get<bool>();
      } else if (key == "pi_samples") {
        ph.fqe.pi_samples = value.get<int>();
      } else if (key == "symlog") {
        ph.fqe.symlog = value.get<bool>();
      } else if (key == "symlog_reg") {
        ph.fqe.symlog_reg = value.get<double>();
      } else if (key == "no_qhat") {
        ph.cont_mu.no_qhat = value.get<bool>();
      } else if (key == "score_correction") {
        ph.cont_mu.score_correction = value.get<bool>();
      } else if (key == "hidden") {
        ph.hidden = value.get<int>();
      } else if (key == "n_hidden") {
        ph.n_hidden = value.get<int>();
      } else if (key == "layer_norm") {
        ph.layer_norm = value.get<bool>();
      } else if (key == "zero_norm_init") {
        ph.zero_init = value.get<bool>();
      } else if (key == "init_log_std") {
        ph.init_log_std = value.get<double>();
      } else {
        throw std::invalid_argument("config: unknown key '" + key + "'");
      }
    } catch (const json::exception& e) {
      throw std::invalid_argument("config: key '" + key + "': " + e.what());
    }
  }
  if (!have_env) throw std::invalid_argument("config: missing required key 'env'");
  if (!have_agent) throw std::invalid_argument("config: missing required key 'agent'");
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  const auto& ph = cfg.phase;
  json j;
  j["env"] = cfg.env;
  j["agent"] = agents::agent_name(cfg.agent);
  j["horizon"] = cfg.horizon;
  j["noise_scale"] = cfg.noise_scale;
  j["max_env_steps"] = cfg.max_env_steps;
  j["total_phases"] = ph.total_phases;
  j["num_steps"] = ph.num_steps;
  j["num_envs"] = ph.num_envs;
  j["n_epochs"] = ph.n_epochs;
  j["n_qvf_epochs"] = ph.n_qvf_epochs;
  j["n_mu_epochs"] = ph.n_mu_epochs;
  j["batch_size"] = ph.minibatch_size;
  j["replay_size"] = ph.buffer_capacity;
  j["fqe_batch_size"] = ph.fqe.batch_size;
  j["gamma"] = ph.gamma;
  j["lambda"] = ph.trunc.lambda;
  j["c_bar"] = ph.trunc.c_bar;
  j["rho_bar"] = ph.trunc.rho_bar;
  j["traj"] = ph.trunc.traj_mode;
  j["clip_range"] = ph.clip_eps;
  j["beta_value"] = ph.beta_value;
  j["beta_ent"] = ph.beta_ent;
  j["lr"] = ph.lr;
  j["alpha_max"] = ph.alpha_max;
  j["alpha_min"] = ph.alpha_min;
  j["normalize_advantages"] = ph.normalize_advantages;
  j["eval_episodes"] = ph.eval_episodes;
  j["polyak_tau"] = ph.polyak_tau;
  j["weight_td_update"] = ph.fqe.weight_td_update;
  j["clip_targets"] = ph.fqe.clip_targets;
  j["pi_samples"] = ph.fqe.pi_samples;
  j["symlog"] = ph.fqe.symlog;
  j["symlog_reg"] = ph.fqe.symlog_reg;
  j["no_qhat"] = ph.cont_mu.no_qhat;
  j["score_correction"] = ph.cont_mu.score_correction;
  j["hidden"] = ph.hidden;
  j["n_hidden"] = ph.n_hidden;
  j["layer_norm"] = ph.layer_norm;
  j["zero_norm_init"] = ph.zero_init;
  j["init_log_std"] = ph.init_log_std;
  // infinities are not valid JSON scalars; the caps are optional anyway
  if (!std::isfinite(ph.trunc.c_bar)) j.erase("c_bar");
  if (!std::isfinite(ph.trunc.rho_bar)) j.erase("rho_bar");
  return j.dump(2) + "\n";
}

agents::TrainSetup make_setup(const ExperimentConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  agents::TrainSetup setup;
  setup.kind = cfg.agent;
  setup.cfg = cfg.phase;
  setup.seed = seed;

  if (cfg.env == "shortcorridor") {
    const int horizon = cfg.horizon > 0 ? cfg.horizon : 400;
    setup.env_factory = [horizon] { return envs::make_short_corridor_env(horizon); };
    // classic aliased-features setup: shared weights over per-action features,
    // started well away from the optimum (p_right ~ 0.05)
    setup.policy_factory = [](Rng&) {
      return std::make_unique<policy::LinearSoftmaxPolicy>(mdp::corridor_action_features(),
                                                           Vec{-1.47, 1.47});
    };
    if (cfg.agent == agents::AgentKind::bpo_reinforce) {
      // the behaviour net needs room to move: a clone of the 2-parameter pi
      // takes ~1e-3 logit steps under adam and can never keep up with pi,
      // so collection drifts far off-policy and the truncated returns go sour
      const auto& ph = cfg.phase;
      approx::MlpConfig mcfg;
      mcfg.in_dim = 1;
      mcfg.out_dim = 2;
      mcfg.hidden = ph.hidden;
      mcfg.n_hidden = ph.n_hidden;
      mcfg.layer_norm = ph.layer_norm;
      mcfg.zero_init_head = ph.zero_init;
      setup.mu_factory = [mcfg](Rng& rng) {
        return std::make_unique<policy::SoftmaxMlpPolicy>(mcfg, rng);
      };
    }
  } else if (cfg.env == "pointmass") {
    const int horizon = cfg.horizon > 0 ? cfg.horizon : 100;
    const double noise = cfg.noise_scale;
    setup.env_factory = [horizon, noise] {
      return std::make_unique<envs::PointMassEnv>(horizon, noise);
    };
    const auto& ph = cfg.phase;
    approx::MlpConfig net;
    net.in_dim = 2;
    net.out_dim = 1;
    net.hidden = ph.hidden;
    net.n_hidden = ph.n_hidden;
    net.layer_norm = ph.layer_norm;
    net.zero_init_head = ph.zero_init;
    const double init_log_std = ph.init_log_std;
    setup.policy_factory = [net, init_log_std](Rng& rng) {
      return std::make_unique<policy::GaussianMlpPolicy>(net, init_log_std, rng);
    };
  }
  return setup;
}

namespace {

void run_into(const ExperimentConfig& cfg, std::uint64_t seed, RunRecord& rec) {
  auto st = agents::make_train_state(make_setup(cfg, seed));
  for (int p = 0; p < cfg.phase.total_phases; ++p) {
    rec.rows.push_back(agents::run_phase(st));
    if (verbose()) {
      const auto& m = rec.rows.back();
      std::cerr << "seed " << seed << " phase " << m.phase << " env_steps " << m.env_steps
                << " eval " << m.eval_mean << " +/- " << m.eval_se << "\n";
    }
    if (cfg.max_env_steps > 0 && st.env_steps >= cfg.max_env_steps) break;
  }
}

}  // namespace

RunRecord run_single(const ExperimentConfig& cfg, std::uint64_t seed) {
  RunRecord rec;
  rec.seed = seed;
  run_into(cfg, seed, rec);
  return rec;
}

const char* const kRunCsvHeader =
    "phase,env_steps,eval_mean,eval_se,policy_loss,value_loss,entropy,q_loss,qhat_loss,mu_loss,"
    "mean_ratio,max_ratio,trunc_frac,qhat_mean,qhat_max";
const char* const kAggregateCsvHeader = "phase,env_steps,eval_mean,eval_se,n_runs";

void write_run_csv(const RunRecord& rec, std::ostream& out) {
  out << kRunCsvHeader << "\n" << std::setprecision(17);
  for (const auto& m : rec.rows) {
    out << m.phase << ',' << m.env_steps << ',' << m.eval_mean << ',' << m.eval_se << ','
        << m.policy_loss << ',' << m.value_loss << ',' << m.entropy << ',' << m.q_loss << ','
        << m.qhat_loss << ',' << m.mu_loss << ',' << m.mean_ratio << ',' << m.max_ratio << ','
        << m.trunc_frac << ',' << m.qhat_mean << ',' << m.qhat_max << "\n";
  }
}

RunRecord read_run_csv(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line) || line != kRunCsvHeader)
    throw std::invalid_argument(name + ": not a run CSV (unexpected header)");
  RunRecord rec;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    agents::PhaseMetrics m;
    if (!(is >> m.phase >> m.env_steps >> m.eval_mean >> m.eval_se >> m.policy_loss >>
          m.value_loss >> m.entropy >> m.q_loss >> m.qhat_loss >> m.mu_loss >> m.mean_ratio >>
          m.max_ratio >> m.trunc_frac >> m.qhat_mean >> m.qhat_max))
      throw std::invalid_argument(name + ": line " + std::to_string(line_no) +
                                  ": malformed row");
    rec.rows.push_back(std::move(m));
  }
  return rec;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::string& out_dir) {
  validate(cfg);
  if (seeds.empty()) throw std::invalid_argument("run_experiment: no seeds given");
  fs::create_directories(out_dir);

  std::vector<RunRecord> records(seeds.size());
  std::vector<std::string> errors(seeds.size());
  std::atomic<std::size_t> next{0};

  // independent jobs: each seed owns its record slot, nothing else is shared
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= seeds.size()) return;
      records[i].seed = seeds[i];
      try {
        run_into(cfg, seeds[i], records[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t n_workers =
      std::min<std::size_t>(seeds.size(), std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::string failures;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto path = fs::path(out_dir) / ("run_" + std::to_string(seeds[i]) + ".csv");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_run_csv(records[i], out);  // partial rows still land on disk on failure
    names.push_back(path.filename().string());
    if (!errors[i].empty()) {
      std::ofstream err(fs::path(out_dir) / ("run_" + std::to_string(seeds[i]) + ".error.txt"));
      err << "error: seed " << seeds[i] << ": " << errors[i] << "\n";
      failures += "seed " + std::to_string(seeds[i]) + ": " + errors[i] + "; ";
    }
  }
  if (!failures.empty()) throw std::runtime_error("run_experiment: " + failures);

  const auto agg = aggregate_records(records, names);
  std::ofstream out(fs::path(out_dir) / "aggregate.csv");
  if (!out) throw std::runtime_error("cannot write aggregate.csv in " + out_dir);
  write_aggregate_csv(agg, out);
  return records;
}

std::vector<AggregateRow> aggregate_records(const std::vector<RunRecord>& records,
                                            const std::vector<std::string>& names) {
  if (records.empty()) throw std::invalid_argument("aggregate: no runs");
  auto name_of = [&](std::size_t i) {
    return i < names.size() ? names[i] : "run " + std::to_string(i);
  };

  const auto& first = records[0];
  std::string misaligned;
  for (std::size_t i = 1; i < records.size(); ++i) {
    bool ok = records[i].rows.size() == first.rows.size();
    for (std::size_t r = 0; ok && r < first.rows.size(); ++r)
      ok = records[i].rows[r].phase == first.rows[r].phase;
    if (!ok) misaligned += " " + name_of(i);
  }
  if (!misaligned.empty())
    throw std::invalid_argument("aggregate: phase grid differs from " + name_of(0) + ":" +
                                misaligned);

  const auto n = static_cast<double>(records.size());
  std::vector<AggregateRow> out(first.rows.size());
  for (std::size_t r = 0; r < first.rows.size(); ++r) {
    auto& row = out[r];
    row.phase = first.rows[r].phase;
    row.n_runs = static_cast<int>(records.size());
    for (const auto& rec : records) {
      row.env_steps += static_cast<double>(rec.rows[r].env_steps) / n;
      row.eval_mean += rec.rows[r].eval_mean / n;
    }
    if (records.size() > 1) {
      double ss = 0.0;
      for (const auto& rec : records) {
        const double d = rec.rows[r].eval_mean - row.eval_mean;
        ss += d * d;
      }
      row.eval_se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
  }
  return out;
}

namespace {

std::vector<std::string> run_csv_paths(const std::string& dir) {
  std::vector<std::string> paths;
  if (!fs::is_directory(dir)) throw std::invalid_argument("not a directory: " + dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("run_", 0) == 0 &&
        entry.path().extension() == ".csv")
      paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw std::invalid_argument("no run_*.csv files in " + dir);
  return paths;
}

std::vector<RunRecord> read_runs(const std::vector<std::string>& paths,
                                 std::vector<std::string>& names) {
  std::vector<RunRecord> records;
  for (const auto& p : paths) {
    std::ifstream in(p);
    if (!in) throw std::invalid_argument("cannot open " + p);
    names.push_back(fs::path(p).filename().string());
    records.push_back(read_run_csv(in, names.back()));
  }
  return records;
}

}  // namespace

std::vector<AggregateRow> aggregate_directory(const std::string& in_dir) {
  std::vector<std::string> names;
  const auto records = read_runs(run_csv_paths(in_dir), names);
  return aggregate_records(records, names);
}

void write_aggregate_csv(const std::vector<AggregateRow>& rows, std::ostream& out) {
  out << kAggregateCsvHeader << "\n" << std::setprecision(17);
  for (const auto& r : rows)
    out << r.phase << ',' << r.env_steps << ',' << r.eval_mean << ',' << r.eval_se << ','
        << r.n_runs << "\n";
}

CompareResult compare_directories(const std::string& a_dir, const std::string& b_dir) {
  auto final_evals = [](const std::string& dir) {
    std::vector<std::string> names;
    const auto records = read_runs(run_csv_paths(dir), names);
    Vec finals;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (records[i].rows.empty())
        throw std::invalid_argument(names[i] + ": run CSV has no rows");
      finals.push_back(records[i].rows.back().eval_mean);
    }
    return finals;
  };
  auto stats = [](const Vec& xs, double& mean, double& se) {
    mean = 0.0;
    for (double x : xs) mean += x / static_cast<double>(xs.size());
    se = 0.0;
    if (xs.size() > 1) {
      double ss = 0.0;
      for (double x : xs) ss += (x - mean) * (x - mean);
      se = std::sqrt(ss / static_cast<double>(xs.size() - 1)) /
           std::sqrt(static_cast<double>(xs.size()));
    }
  };

  CompareResult r;
  const Vec a = final_evals(a_dir), b = final_evals(b_dir);
  r.n_a = static_cast<int>(a.size());
  r.n_b = static_cast<int>(b.size());
  stats(a, r.mean_a, r.se_a);
  stats(b, r.mean_b, r.se_b);
  r.better = r.mean_a > r.mean_b ? 1 : (r.mean_a < r.mean_b ? -1 : 0);
  r.significant = std::abs(r.mean_a - r.mean_b) > 1.96 * (r.se_a + r.se_b);
  return r;
}

std::string describe(const CompareResult& r) {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "final eval A: " << r.mean_a << " +/- " << r.se_a << " SE (" << r.n_a << " runs)\n";
  os << "final eval B: " << r.mean_b << " +/- " << r.se_b << " SE (" << r.n_b << " runs)\n";
  os << "rule: non-overlap of mean +/- 1.96*SE intervals (this tool's stand-in for a "
        "significance test)\n";
  if (r.better == 0)
    os << "verdict: tied means\n";
  else
    os << "verdict: " << (r.better > 0 ? "A" : "B") << " ahead, "
       << (r.significant ? "significant" : "not significant") << " under the interval rule\n";
  return os.str();
}

TailDemoResult gaussian_tail_demo(int n_samples, double proposal_std, std::uint64_t seed,
                                  int n_trials) {
  if (n_samples < 1) throw std::invalid_argument("gaussian_tail_demo: n_samples must be >= 1");
  if (!(proposal_std > 0.0) || !std::isfinite(proposal_std))
    throw std::invalid_argument("gaussian_tail_demo: proposal_std must be positive");
  if (n_trials < 1) throw std::invalid_argument("gaussian_tail_demo: n_trials must be >= 1");

  TailDemoResult r;
  r.truth = 0.5 * std::erfc(4.0 / std::sqrt(2.0));
  r.naive_estimates.reserve(static_cast<std::size_t>(n_trials));
  r.is_estimates.reserve(static_cast<std::size_t>(n_trials));

  Rng rng(seed);
  const double inv_n = 1.0 / static_cast<double>(n_samples);
  for (int trial = 0; trial < n_trials; ++trial) {
    double naive = 0.0, is = 0.0;
    for (int i = 0; i < n_samples; ++i) {
      // common draw: x ~ N(0,1) for the naive estimate, y = std * x for the
      // proposal, so std = 1 makes the two estimators identical sample by sample
      const double x = rng.normal();
      if (x > 4.0) naive += inv_n;
      const double y = proposal_std * x;
      if (y > 4.0) {
        const double w =
            proposal_std * std::exp(0.5 * y * y * (1.0 / (proposal_std * proposal_std) - 1.0));
        is += w * inv_n;
      }
    }
    r.naive_estimates.push_back(naive);
    r.is_estimates.push_back(is);
  }

  auto mean_var = [n_trials](const Vec& xs, double& mean, double& var) {
    mean = 0.0;
    for (double x : xs) mean += x / static_cast<double>(n_trials);
    var = 0.0;
    if (n_trials > 1) {
      for (double x : xs) var += (x - mean) * (x - mean);
      var /= static_cast<double>(n_trials - 1);
    }
  };
  mean_var(r.naive_estimates, r.naive_mean, r.naive_variance);
  mean_var(r.is_estimates, r.is_mean, r.is_variance);
  return r;
}

void write_demo_csv(const TailDemoResult& r, std::ostream& out) {
  out << "trial,naive_estimate,is_estimate\n" << std::setprecision(17);
  for (std::size_t i = 0; i < r.naive_estimates.size(); ++i)
    out << i << ',' << r.naive_estimates[i] << ',' << r.is_estimates[i] << "\n";
}

}  // namespace bpo::harness
