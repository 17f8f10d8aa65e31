#include "bpo/policies.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bpo::policy {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

approx::MlpConfig with_linear_head(approx::MlpConfig c) {
  c.head = approx::Head::linear;  // policies read raw logits / means
  return c;
}

void check_discrete_action(int a, int n) {
  require(a >= 0 && a < n,
          "policy: action index " + std::to_string(a) + " outside [0, " + std::to_string(n) +
              ")");
}

}  // namespace

Vec log_softmax(std::span<const double> logits) {
  require(!logits.empty(), "log_softmax: empty logits");
  const double hi = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - hi);
  const double lse = hi + std::log(z);
  Vec out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

Vec softmax(std::span<const double> logits) {
  Vec out = log_softmax(logits);
  for (auto& v : out) v = std::exp(v);
  return out;
}

Vec Policy::action_probs(std::span<const double>) const {
  throw std::logic_error("Policy::action_probs: not a discrete policy");
}

void Policy::accumulate_cross_entropy_grad(std::span<const double>, std::span<const double>,
                                           double, Vec&) const {
  throw std::logic_error("Policy::accumulate_cross_entropy_grad: not a discrete policy");
}

// ---------------------------------------------------------------------------
// LinearSoftmaxPolicy

LinearSoftmaxPolicy::LinearSoftmaxPolicy(std::vector<Vec> action_features, Vec init_weights)
    : feats_(std::move(action_features)) {
  require(feats_.size() >= 2, "LinearSoftmaxPolicy: need at least two actions");
  for (const auto& f : feats_)
    require(f.size() == feats_[0].size(), "LinearSoftmaxPolicy: ragged feature vectors");
  w_ = init_weights.empty() ? Vec(feats_[0].size(), 0.0) : std::move(init_weights);
  require(w_.size() == feats_[0].size(), "LinearSoftmaxPolicy: weight/feature size mismatch");
}

std::unique_ptr<Policy> LinearSoftmaxPolicy::clone() const {
  return std::make_unique<LinearSoftmaxPolicy>(*this);
}

void LinearSoftmaxPolicy::set_params(std::span<const double> p) {
  require(p.size() == w_.size(), "LinearSoftmaxPolicy::set_params: size mismatch");
  w_.assign(p.begin(), p.end());
}

Vec LinearSoftmaxPolicy::logits() const {
  Vec l(feats_.size(), 0.0);
  for (std::size_t a = 0; a < feats_.size(); ++a)
    for (std::size_t i = 0; i < w_.size(); ++i) l[a] += w_[i] * feats_[a][i];
  return l;
}

Vec LinearSoftmaxPolicy::action_probs(std::span<const double>) const { return softmax(logits()); }

envs::Action LinearSoftmaxPolicy::sample(std::span<const double> obs, Rng& rng) const {
  envs::Action a;
  a.index = static_cast<int>(rng.categorical(action_probs(obs)));
  return a;
}

double LinearSoftmaxPolicy::log_prob(std::span<const double>, const envs::Action& a) const {
  check_discrete_action(a.index, n_actions());
  return log_softmax(logits())[a.index];
}

void LinearSoftmaxPolicy::accumulate_logprob_grad(std::span<const double> obs,
                                                  const envs::Action& a, double coeff,
                                                  Vec& grad) const {
  check_discrete_action(a.index, n_actions());
  require(grad.size() == w_.size(), "LinearSoftmaxPolicy: grad size mismatch");
  // d ln p(a) / d logit_k = [k = a] - p_k, chained through logit_k = w . x(k)
  const Vec p = action_probs(obs);
  for (std::size_t k = 0; k < feats_.size(); ++k) {
    const double dk = (static_cast<int>(k) == a.index ? 1.0 : 0.0) - p[k];
    for (std::size_t i = 0; i < w_.size(); ++i) grad[i] += coeff * dk * feats_[k][i];
  }
}

double LinearSoftmaxPolicy::entropy(std::span<const double> obs) const {
  double h = 0.0;
  for (double p : action_probs(obs))
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

void LinearSoftmaxPolicy::accumulate_entropy_grad(std::span<const double> obs, double coeff,
                                                  Vec& grad) const {
  require(grad.size() == w_.size(), "LinearSoftmaxPolicy: grad size mismatch");
  const Vec p = action_probs(obs);
  const double h = entropy(obs);
  // dH / d logit_k = -p_k (ln p_k + H)
  for (std::size_t k = 0; k < feats_.size(); ++k) {
    const double dk = p[k] > 0.0 ? -p[k] * (std::log(p[k]) + h) : 0.0;
    for (std::size_t i = 0; i < w_.size(); ++i) grad[i] += coeff * dk * feats_[k][i];
  }
}

void LinearSoftmaxPolicy::accumulate_cross_entropy_grad(std::span<const double> obs,
                                                        std::span<const double> target,
                                                        double coeff, Vec& grad) const {
  require(target.size() == feats_.size(), "LinearSoftmaxPolicy: target size mismatch");
  require(grad.size() == w_.size(), "LinearSoftmaxPolicy: grad size mismatch");
  // d(-sum_a t_a ln p_a) / d logit_k = p_k sum(t) - t_k
  const Vec p = action_probs(obs);
  double tsum = 0.0;
  for (double t : target) tsum += t;
  for (std::size_t k = 0; k < feats_.size(); ++k) {
    const double dk = p[k] * tsum - target[k];
    for (std::size_t i = 0; i < w_.size(); ++i) grad[i] += coeff * dk * feats_[k][i];
  }
}

// ---------------------------------------------------------------------------
// SoftmaxMlpPolicy

SoftmaxMlpPolicy::SoftmaxMlpPolicy(approx::MlpConfig cfg, Rng& rng)
    : net_(with_linear_head(cfg), rng) {
  require(cfg.out_dim >= 2, "SoftmaxMlpPolicy: need at least two actions");
}

std::unique_ptr<Policy> SoftmaxMlpPolicy::clone() const {
  return std::make_unique<SoftmaxMlpPolicy>(*this);
}

Vec SoftmaxMlpPolicy::action_probs(std::span<const double> obs) const {
  return softmax(net_.raw(obs));
}

envs::Action SoftmaxMlpPolicy::sample(std::span<const double> obs, Rng& rng) const {
  envs::Action a;
  a.index = static_cast<int>(rng.categorical(action_probs(obs)));
  return a;
}

double SoftmaxMlpPolicy::log_prob(std::span<const double> obs, const envs::Action& a) const {
  check_discrete_action(a.index, n_actions());
  return log_softmax(net_.raw(obs))[a.index];
}

void SoftmaxMlpPolicy::accumulate_logprob_grad(std::span<const double> obs,
                                               const envs::Action& a, double coeff,
                                               Vec& grad) const {
  check_discrete_action(a.index, n_actions());
  const Vec p = action_probs(obs);
  Vec g_logits(p.size());
  for (std::size_t k = 0; k < p.size(); ++k)
    g_logits[k] = coeff * ((static_cast<int>(k) == a.index ? 1.0 : 0.0) - p[k]);
  net_.accumulate_raw_grad(obs, g_logits, grad);
}

double SoftmaxMlpPolicy::entropy(std::span<const double> obs) const {
  double h = 0.0;
  for (double p : action_probs(obs))
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

void SoftmaxMlpPolicy::accumulate_entropy_grad(std::span<const double> obs, double coeff,
                                               Vec& grad) const {
  const Vec p = action_probs(obs);
  const double h = entropy(obs);
  Vec g_logits(p.size(), 0.0);
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p[k] > 0.0) g_logits[k] = coeff * (-p[k] * (std::log(p[k]) + h));
  net_.accumulate_raw_grad(obs, g_logits, grad);
}

void SoftmaxMlpPolicy::accumulate_cross_entropy_grad(std::span<const double> obs,
                                                     std::span<const double> target, double coeff,
                                                     Vec& grad) const {
  require(static_cast<int>(target.size()) == n_actions(),
          "SoftmaxMlpPolicy: target size mismatch");
  const Vec p = action_probs(obs);
  double tsum = 0.0;
  for (double t : target) tsum += t;
  Vec g_logits(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) g_logits[k] = coeff * (p[k] * tsum - target[k]);
  net_.accumulate_raw_grad(obs, g_logits, grad);
}

// ---------------------------------------------------------------------------
// GaussianMlpPolicy

GaussianMlpPolicy::GaussianMlpPolicy(approx::MlpConfig mean_cfg, double init_log_std, Rng& rng)
    : net_(with_linear_head(mean_cfg), rng), log_std_(mean_cfg.out_dim, init_log_std) {
  require(std::isfinite(init_log_std), "GaussianMlpPolicy: init_log_std must be finite");
}

std::unique_ptr<Policy> GaussianMlpPolicy::clone() const {
  return std::make_unique<GaussianMlpPolicy>(*this);
}

Vec GaussianMlpPolicy::get_params() const {
  Vec out = net_.params();
  out.insert(out.end(), log_std_.begin(), log_std_.end());
  return out;
}

void GaussianMlpPolicy::set_params(std::span<const double> p) {
  require(p.size() == n_params(), "GaussianMlpPolicy::set_params: size mismatch");
  net_.set_params(p.subspan(0, net_.n_params()));
  const auto tail = p.subspan(net_.n_params());
  log_std_.assign(tail.begin(), tail.end());
}

envs::Action GaussianMlpPolicy::sample(std::span<const double> obs, Rng& rng) const {
  const Vec m = net_.raw(obs);
  envs::Action a;
  a.cont.resize(m.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    a.cont[i] = m[i] + std::exp(log_std_[i]) * rng.normal();
  return a;
}

double GaussianMlpPolicy::log_prob(std::span<const double> obs, const envs::Action& a) const {
  require(a.cont.size() == log_std_.size(), "GaussianMlpPolicy: action dimension mismatch");
  const Vec m = net_.raw(obs);
  double lp = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double z = (a.cont[i] - m[i]) * std::exp(-log_std_[i]);
    lp += -0.5 * kLog2Pi - log_std_[i] - 0.5 * z * z;
  }
  return lp;
}

void GaussianMlpPolicy::accumulate_logprob_grad(std::span<const double> obs,
                                                const envs::Action& a, double coeff,
                                                Vec& grad) const {
  require(a.cont.size() == log_std_.size(), "GaussianMlpPolicy: action dimension mismatch");
  require(grad.size() == n_params(), "GaussianMlpPolicy: grad size mismatch");
  const Vec m = net_.raw(obs);
  Vec g_mean(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double inv_var = std::exp(-2.0 * log_std_[i]);
    const double d = a.cont[i] - m[i];
    g_mean[i] = coeff * d * inv_var;                                  // d lp / d mean_i
    grad[net_.n_params() + i] += coeff * (d * d * inv_var - 1.0);     // d lp / d log_std_i
  }
  net_.accumulate_raw_grad(obs, g_mean, std::span<double>(grad.data(), net_.n_params()));
}

double GaussianMlpPolicy::entropy(std::span<const double>) const {
  double h = 0.0;
  for (double ls : log_std_) h += 0.5 * (kLog2Pi + 1.0) + ls;
  return h;
}

void GaussianMlpPolicy::accumulate_entropy_grad(std::span<const double>, double coeff,
                                                Vec& grad) const {
  require(grad.size() == n_params(), "GaussianMlpPolicy: grad size mismatch");
  for (std::size_t i = 0; i < log_std_.size(); ++i) grad[net_.n_params() + i] += coeff;
}

}  // namespace bpo::policy
