#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bpo/common.hpp"

namespace bpo::approx {

enum class Head { linear, symlog };

struct MlpConfig {
  int in_dim = 1;
  int out_dim = 1;
  int hidden = 64;
  int n_hidden = 2;      // 0 gives a single affine map
  bool layer_norm = false;   // normalize each hidden pre-activation
  bool zero_init_head = false;  // final layer starts at exactly zero
  Head head = Head::linear;
};

/** Fully-connected net with rectified-linear hidden layers, optional layer
 * normalization and an optional symlog output head. Parameters live in one
 * flat vector (affine weights row-major, then bias, then the layer-norm gain
 * and shift when enabled, layer by layer) so optimizers, Polyak shadows and
 * archives can treat every net the same way. Gradients are reverse-mode and
 * exact. */
class Mlp {
 public:
  Mlp(MlpConfig cfg, Rng& rng);

  const MlpConfig& config() const { return cfg_; }
  std::size_t n_params() const { return params_.size(); }
  const Vec& params() const { return params_; }
  Vec& params() { return params_; }
  void set_params(std::span<const double> p);  // size + finiteness checked

  // affine head outputs, before any output transform
  Vec raw(std::span<const double> x) const;
  // head outputs after the transform (symexp for symlog heads)
  Vec predict(std::span<const double> x) const;
  double predict1(std::span<const double> x) const { return predict(x)[0]; }

  /** Adds d(sum_i g_raw[i] raw_i(x))/d(params) into grad. Chain through the
   * output transform (d symexp(u)/du = exp|u|) belongs to the caller. */
  void accumulate_raw_grad(std::span<const double> x, std::span<const double> g_raw,
                           std::span<double> grad) const;

 private:
  struct LayerSpec {
    int in = 0;
    int out = 0;
    bool ln = false;
    bool relu = false;
  };

  MlpConfig cfg_;
  std::vector<LayerSpec> layers_;
  std::vector<std::size_t> offs_;  // parameter offset of each layer
  Vec params_;
};

// derivative of symexp at raw output u; chain factor for symlog heads
inline double symexp_grad(double u) { return std::exp(std::abs(u)); }

/** Normalize to zero mean / unit variance (the layer-norm core, before the
 * learned affine rescale). Exposed for direct property checks. */
Vec normalized(std::span<const double> x, double eps = 1e-10);

/** Clamp a prediction or regression target into the admissible range:
 * [0, bound] for non-negative heads (second moments), [-bound, bound]
 * otherwise. Infinite bound is a no-op. */
double clip_prediction(double y, double bound, bool non_negative);

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-5;
  double max_grad_norm = 0.5;  // global-norm clip; infinity disables
};

class Adam {
 public:
  Adam(std::size_t n_params, AdamConfig cfg);

  /** Clip the gradient's global norm, then apply the bias-corrected
   * adaptive-moment update in place. Throws on non-finite gradients. */
  void step(Vec& params, const Vec& grad);

  std::int64_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  AdamConfig cfg_;
  Vec m_, v_;
  std::int64_t t_ = 0;
};

/** Slow-moving shadow copy: shadow <- (1 - tau) shadow + tau source. */
struct Polyak {
  Vec shadow;
  double tau = 0.02;

  Polyak(std::span<const double> source, double tau_);
  void update(std::span<const double> source);
};

/** Text tensor archive: magic line, then per tensor a "name count" header
 * line followed by `count` hexfloat values. Round-trips bitwise. */
void save_tensors(std::ostream& os,
                  std::span<const std::pair<std::string, const Vec*>> tensors);
std::vector<std::pair<std::string, Vec>> load_tensors(std::istream& is);

/** Max relative error between `analytic` and a central finite difference of
 * `scalar_fn` over every coordinate of `params` (params restored on return).
 * Denominator max(|analytic|, |numeric|, floor) keeps near-zero coordinates
 * from amplifying round-off. */
double max_rel_err_vs_fd(Vec& params, const std::function<double()>& scalar_fn,
                         const Vec& analytic, double h = 1e-5, double floor = 1e-6);

}  // namespace bpo::approx
