#pragma once

#include <memory>

#include "bpo/approx.hpp"
#include "bpo/envs.hpp"

namespace bpo::policy {

/** Parametric action distribution. Parameters are exchanged as flat vectors
 * (get/copy/set) so optimizers, Polyak shadows and archives stay agnostic to
 * the concrete family; gradient accumulators use the same flat layout. */
class Policy {
 public:
  virtual ~Policy() = default;

  virtual bool discrete() const = 0;
  virtual int n_actions() const { return 0; }
  virtual std::unique_ptr<Policy> clone() const = 0;  // deep copy, bitwise-equal params

  virtual std::size_t n_params() const = 0;
  virtual Vec get_params() const = 0;
  virtual void set_params(std::span<const double> p) = 0;

  virtual envs::Action sample(std::span<const double> obs, Rng& rng) const = 0;
  virtual double log_prob(std::span<const double> obs, const envs::Action& a) const = 0;
  // grad += coeff * d log_prob(a | obs) / d params
  virtual void accumulate_logprob_grad(std::span<const double> obs, const envs::Action& a,
                                       double coeff, Vec& grad) const = 0;

  virtual double entropy(std::span<const double> obs) const = 0;
  // grad += coeff * d entropy(obs) / d params
  virtual void accumulate_entropy_grad(std::span<const double> obs, double coeff,
                                       Vec& grad) const = 0;

  // discrete families only; throws std::logic_error otherwise
  virtual Vec action_probs(std::span<const double> obs) const;
  // grad += coeff * d(-sum_a target[a] ln p(a | obs)) / d params
  virtual void accumulate_cross_entropy_grad(std::span<const double> obs,
                                             std::span<const double> target, double coeff,
                                             Vec& grad) const;
};

/** Softmax with per-action logits w . x(a) over fixed action features; the
 * observation is ignored (the aliased-corridor setting, where every state
 * shows the same feature). Parameters are the feature weights. */
class LinearSoftmaxPolicy : public Policy {
 public:
  // empty init_weights means zeros (uniform policy)
  LinearSoftmaxPolicy(std::vector<Vec> action_features, Vec init_weights = {});

  bool discrete() const override { return true; }
  int n_actions() const override { return static_cast<int>(feats_.size()); }
  std::unique_ptr<Policy> clone() const override;

  std::size_t n_params() const override { return w_.size(); }
  Vec get_params() const override { return w_; }
  void set_params(std::span<const double> p) override;

  envs::Action sample(std::span<const double> obs, Rng& rng) const override;
  double log_prob(std::span<const double> obs, const envs::Action& a) const override;
  void accumulate_logprob_grad(std::span<const double> obs, const envs::Action& a, double coeff,
                               Vec& grad) const override;
  double entropy(std::span<const double> obs) const override;
  void accumulate_entropy_grad(std::span<const double> obs, double coeff,
                               Vec& grad) const override;
  Vec action_probs(std::span<const double> obs) const override;
  void accumulate_cross_entropy_grad(std::span<const double> obs, std::span<const double> target,
                                     double coeff, Vec& grad) const override;

 private:
  Vec logits() const;

  std::vector<Vec> feats_;
  Vec w_;
};

/** Softmax over the logits of an MLP on the observation. */
class SoftmaxMlpPolicy : public Policy {
 public:
  SoftmaxMlpPolicy(approx::MlpConfig cfg, Rng& rng);

  bool discrete() const override { return true; }
  int n_actions() const override { return net_.config().out_dim; }
  std::unique_ptr<Policy> clone() const override;

  std::size_t n_params() const override { return net_.n_params(); }
  Vec get_params() const override { return net_.params(); }
  void set_params(std::span<const double> p) override { net_.set_params(p); }

  envs::Action sample(std::span<const double> obs, Rng& rng) const override;
  double log_prob(std::span<const double> obs, const envs::Action& a) const override;
  void accumulate_logprob_grad(std::span<const double> obs, const envs::Action& a, double coeff,
                               Vec& grad) const override;
  double entropy(std::span<const double> obs) const override;
  void accumulate_entropy_grad(std::span<const double> obs, double coeff,
                               Vec& grad) const override;
  Vec action_probs(std::span<const double> obs) const override;
  void accumulate_cross_entropy_grad(std::span<const double> obs, std::span<const double> target,
                                     double coeff, Vec& grad) const override;

 private:
  approx::Mlp net_;
};

/** Diagonal Gaussian: state-dependent mean from an MLP, one learned log-std
 * per action dimension (state-independent). Flat parameter layout is the mean
 * net's parameters followed by the log-std vector. Samples are not squashed;
 * envs clip at their own bounds. */
class GaussianMlpPolicy : public Policy {
 public:
  GaussianMlpPolicy(approx::MlpConfig mean_cfg, double init_log_std, Rng& rng);

  bool discrete() const override { return false; }
  int action_dim() const { return net_.config().out_dim; }
  std::unique_ptr<Policy> clone() const override;

  std::size_t n_params() const override { return net_.n_params() + log_std_.size(); }
  Vec get_params() const override;
  void set_params(std::span<const double> p) override;

  envs::Action sample(std::span<const double> obs, Rng& rng) const override;
  double log_prob(std::span<const double> obs, const envs::Action& a) const override;
  void accumulate_logprob_grad(std::span<const double> obs, const envs::Action& a, double coeff,
                               Vec& grad) const override;
  double entropy(std::span<const double> obs) const override;
  void accumulate_entropy_grad(std::span<const double> obs, double coeff,
                               Vec& grad) const override;

  Vec mean(std::span<const double> obs) const { return net_.predict(obs); }
  const Vec& log_std() const { return log_std_; }

 private:
  approx::Mlp net_;
  Vec log_std_;
};

// numerically stable log-softmax / softmax over raw logits
Vec log_softmax(std::span<const double> logits);
Vec softmax(std::span<const double> logits);

}  // namespace bpo::policy
