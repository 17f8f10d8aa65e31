#pragma once

#include "bpo/approx.hpp"
#include "bpo/policies.hpp"

namespace bpo::fqe {

struct Transition {
  Vec obs;
  envs::Action action;
  double reward = 0.0;
  double r_hat = 0.0;  // filled by compute_r_hat each phase
  bool r_hat_set = false;
  Vec next_obs;
  bool done = false;  // entered a terminal state: bootstrap value is 0
  double log_mu = 0.0;
  double log_pi = 0.0;  // pi at collection time (diagnostics; training re-evaluates pi)
};

/** Fixed-capacity FIFO ring of transitions with running |r| / |r_hat| maxima
 * (the clip-bound trackers). */
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void add(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return cap_; }
  const Transition& operator[](std::size_t i) const { return data_[i]; }

  void set_r_hat(std::size_t i, double v);
  bool r_hat_filled() const;

  double r_max() const { return r_max_; }
  double r_hat_max() const { return r_hat_max_; }

 private:
  std::size_t cap_;
  std::vector<Transition> data_;
  std::size_t cursor_ = 0;
  double r_max_ = 0.0;
  double r_hat_max_ = 0.0;
};

struct FqeConfig {
  int batch_size = 256;
  bool weight_td_update = true;  // weight each sample by pi_now/mu, batch-normalized to mean 1
  bool clip_targets = true;      // clamp targets at r_max/(1-g) resp. r_hat_max/(1-g^2)
  int pi_samples = 4;            // Monte Carlo size for continuous E_pi[Q(s', .)]
  double symlog_reg = 1.0;       // pull raw outputs toward the Polyak shadow's raw outputs
  bool symlog = true;            // false: plain linear regression (ablation)
};

// q-net input layout: observation features, then one-hot action (discrete)
// or the raw action vector (continuous)
Vec qnet_input(std::span<const double> obs, const envs::Action& a, bool discrete, int n_actions);

// prediction with the output transform and symmetric clip at `bound`
double q_predict(const approx::Mlp& qnet, std::span<const double> obs, const envs::Action& a,
                 bool discrete, int n_actions, const FqeConfig& cfg, double bound);
// second-moment head: floored at zero, clipped into [0, bound]
double qhat_predict(const approx::Mlp& qhat_net, std::span<const double> obs,
                    const envs::Action& a, bool discrete, int n_actions, const FqeConfig& cfg,
                    double bound);

struct EpochStats {
  double mean_loss = 0.0;
  double mean_weight = 1.0;  // after normalization (diagnostic; 1 by construction)
  double max_weight = 1.0;
  int batches = 0;
};

/** One fitted-evaluation epoch on the first-moment head: for each uniformly
 * sampled batch, one-step targets r + g E_{a' ~ pi} Q_shadow(s', a') (zero
 * bootstrap past terminals), squared loss on raw outputs against transformed
 * targets, optional IS weighting, one optimizer step, one Polyak update. */
EpochStats fqe_q_epoch(approx::Mlp& qnet, approx::Polyak& shadow, approx::Adam& opt,
                       const policy::Policy& pi, const ReplayBuffer& buf, const FqeConfig& cfg,
                       double gamma, Rng& rng);

/** Fills r_hat = 2 r Q(s, a) - r^2 for every buffered transition and updates
 * the r_hat clip tracker. */
void compute_r_hat(ReplayBuffer& buf, const approx::Mlp& qnet, const policy::Policy& pi,
                   const FqeConfig& cfg, double gamma);

/** Second-moment analogue of fqe_q_epoch: r -> r_hat, gamma -> gamma^2,
 * targets clipped into [0, r_hat_max/(1-g^2)]. */
EpochStats fqe_qhat_epoch(approx::Mlp& qhat_net, approx::Polyak& shadow, approx::Adam& opt,
                          const policy::Policy& pi, const ReplayBuffer& buf,
                          const FqeConfig& cfg, double gamma, Rng& rng);

}  // namespace bpo::fqe
