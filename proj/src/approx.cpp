#include "bpo/approx.hpp"

#include <cmath>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace bpo::approx {

namespace {

std::size_t layer_param_count(int in, int out, bool ln) {
  return static_cast<std::size_t>(out) * in + out + (ln ? 2 * static_cast<std::size_t>(out) : 0);
}

}  // namespace

Mlp::Mlp(MlpConfig cfg, Rng& rng) : cfg_(cfg) {
  require(cfg.in_dim > 0 && cfg.out_dim > 0, "Mlp: in_dim and out_dim must be positive");
  require(cfg.n_hidden >= 0, "Mlp: n_hidden must be non-negative");
  require(cfg.n_hidden == 0 || cfg.hidden > 0, "Mlp: hidden width must be positive");

  int prev = cfg.in_dim;
  for (int l = 0; l < cfg.n_hidden; ++l) {
    layers_.push_back({prev, cfg.hidden, cfg.layer_norm, true});
    prev = cfg.hidden;
  }
  layers_.push_back({prev, cfg.out_dim, false, false});

  std::size_t total = 0;
  for (const auto& L : layers_) {
    offs_.push_back(total);
    total += layer_param_count(L.in, L.out, L.ln);
  }
  params_.assign(total, 0.0);

  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    double* w = params_.data() + offs_[l];
    const bool zero = (l + 1 == layers_.size()) && cfg.zero_init_head;
    const double limit = std::sqrt(6.0 / (L.in + L.out));
    for (int i = 0; i < L.out * L.in; ++i) w[i] = zero ? 0.0 : rng.uniform(-limit, limit);
    // biases start at zero; layer-norm gain at one, shift at zero
    if (L.ln) {
      double* g = w + static_cast<std::size_t>(L.out) * L.in + L.out;
      for (int i = 0; i < L.out; ++i) g[i] = 1.0;
    }
  }
}

void Mlp::set_params(std::span<const double> p) {
  require(p.size() == params_.size(),
          "Mlp::set_params: expected " + std::to_string(params_.size()) + " values, got " +
              std::to_string(p.size()));
  for (double x : p)
    if (!std::isfinite(x)) throw std::invalid_argument("Mlp::set_params: non-finite parameter");
  params_.assign(p.begin(), p.end());
}

Vec normalized(std::span<const double> x, double eps) {
  require(!x.empty(), "normalized: empty input");
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  const double sigma = std::sqrt(var + eps);
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mean) / sigma;
  return y;
}

namespace {

struct LayerCache {
  Vec input;    // activation entering the layer
  Vec y;        // normalized pre-affine-rescale (layer norm only)
  double sigma = 0.0;
  Vec act_in;   // value entering the ReLU (or the layer output if none)
};

}  // namespace

Vec Mlp::raw(std::span<const double> x) const {
  require(static_cast<int>(x.size()) == cfg_.in_dim,
          "Mlp: input size " + std::to_string(x.size()) + " != in_dim " +
              std::to_string(cfg_.in_dim));
  Vec cur(x.begin(), x.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    const double* w = params_.data() + offs_[l];
    const double* b = w + static_cast<std::size_t>(L.out) * L.in;
    Vec z(L.out);
    for (int o = 0; o < L.out; ++o) {
      double acc = b[o];
      const double* row = w + static_cast<std::size_t>(o) * L.in;
      for (int i = 0; i < L.in; ++i) acc += row[i] * cur[i];
      z[o] = acc;
    }
    if (L.ln) {
      const double* g = b + L.out;
      const double* s = g + L.out;
      Vec y = normalized(z);
      for (int o = 0; o < L.out; ++o) z[o] = g[o] * y[o] + s[o];
    }
    if (L.relu)
      for (auto& v : z) v = v > 0.0 ? v : 0.0;
    cur = std::move(z);
  }
  return cur;
}

Vec Mlp::predict(std::span<const double> x) const {
  Vec out = raw(x);
  if (cfg_.head == Head::symlog)
    for (auto& v : out) v = symexp(v);
  return out;
}

void Mlp::accumulate_raw_grad(std::span<const double> x, std::span<const double> g_raw,
                              std::span<double> grad) const {
  require(static_cast<int>(g_raw.size()) == cfg_.out_dim, "Mlp: g_raw size != out_dim");
  require(grad.size() == params_.size(), "Mlp: grad size != n_params");
  require(static_cast<int>(x.size()) == cfg_.in_dim, "Mlp: input size != in_dim");

  // forward pass, caching what the backward sweep needs
  std::vector<LayerCache> caches(layers_.size());
  Vec cur(x.begin(), x.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    auto& C = caches[l];
    C.input = cur;
    const double* w = params_.data() + offs_[l];
    const double* b = w + static_cast<std::size_t>(L.out) * L.in;
    Vec z(L.out);
    for (int o = 0; o < L.out; ++o) {
      double acc = b[o];
      const double* row = w + static_cast<std::size_t>(o) * L.in;
      for (int i = 0; i < L.in; ++i) acc += row[i] * cur[i];
      z[o] = acc;
    }
    if (L.ln) {
      const double n = static_cast<double>(L.out);
      double mean = 0.0;
      for (double v : z) mean += v;
      mean /= n;
      double var = 0.0;
      for (double v : z) var += (v - mean) * (v - mean);
      var /= n;
      C.sigma = std::sqrt(var + 1e-10);
      C.y.resize(L.out);
      const double* g = b + L.out;
      const double* s = g + L.out;
      for (int o = 0; o < L.out; ++o) {
        C.y[o] = (z[o] - mean) / C.sigma;
        z[o] = g[o] * C.y[o] + s[o];
      }
    }
    C.act_in = z;
    if (L.relu)
      for (auto& v : z) v = v > 0.0 ? v : 0.0;
    cur = std::move(z);
  }

  Vec d(g_raw.begin(), g_raw.end());
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& L = layers_[li];
    const auto& C = caches[li];
    if (L.relu)
      for (int o = 0; o < L.out; ++o)
        if (C.act_in[o] <= 0.0) d[o] = 0.0;

    double* gw = grad.data() + offs_[li];
    double* gb = gw + static_cast<std::size_t>(L.out) * L.in;
    Vec dz;
    if (L.ln) {
      const double* g = params_.data() + offs_[li] + static_cast<std::size_t>(L.out) * L.in +
                        L.out;
      double* gg = gb + L.out;
      double* gs = gg + L.out;
      Vec dy(L.out);
      for (int o = 0; o < L.out; ++o) {
        gg[o] += d[o] * C.y[o];
        gs[o] += d[o];
        dy[o] = d[o] * g[o];
      }
      const double n = static_cast<double>(L.out);
      double mdy = 0.0, mdyy = 0.0;
      for (int o = 0; o < L.out; ++o) {
        mdy += dy[o];
        mdyy += dy[o] * C.y[o];
      }
      mdy /= n;
      mdyy /= n;
      dz.resize(L.out);
      for (int o = 0; o < L.out; ++o) dz[o] = (dy[o] - mdy - C.y[o] * mdyy) / C.sigma;
    } else {
      dz = d;
    }

    const double* w = params_.data() + offs_[li];
    Vec dprev(L.in, 0.0);
    for (int o = 0; o < L.out; ++o) {
      gb[o] += dz[o];
      double* grow = gw + static_cast<std::size_t>(o) * L.in;
      const double* wrow = w + static_cast<std::size_t>(o) * L.in;
      for (int i = 0; i < L.in; ++i) {
        grow[i] += dz[o] * C.input[i];
        dprev[i] += wrow[i] * dz[o];
      }
    }
    d = std::move(dprev);
  }
}

double clip_prediction(double y, double bound, bool non_negative) {
  require(bound >= 0.0, "clip_prediction: bound must be non-negative");  // inf allowed
  const double lo = non_negative ? 0.0 : -bound;
  return std::min(bound, std::max(lo, y));
}

Adam::Adam(std::size_t n_params, AdamConfig cfg) : cfg_(cfg), m_(n_params, 0.0), v_(n_params, 0.0) {
  require(cfg.lr >= 0.0 && cfg.eps > 0.0, "Adam: lr must be >= 0 and eps > 0");
  require(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0,
          "Adam: betas must be in [0, 1)");
}

void Adam::step(Vec& params, const Vec& grad) {
  require(params.size() == m_.size() && grad.size() == m_.size(),
          "Adam: parameter/gradient size mismatch");
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  if (!std::isfinite(sq))
    throw std::invalid_argument("Adam: non-finite gradient (norm^2 = " + std::to_string(sq) +
                                ")");
  double scale = 1.0;
  const double norm = std::sqrt(sq);
  if (std::isfinite(cfg_.max_grad_norm) && norm > cfg_.max_grad_norm && norm > 0.0)
    scale = cfg_.max_grad_norm / norm;

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i] * scale;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
    params[i] -= cfg_.lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + cfg_.eps);
  }
}

Polyak::Polyak(std::span<const double> source, double tau_)
    : shadow(source.begin(), source.end()), tau(tau_) {
  require(tau > 0.0 && tau <= 1.0, "Polyak: tau must be in (0, 1]");
}

void Polyak::update(std::span<const double> source) {
  require(source.size() == shadow.size(), "Polyak: source size mismatch");
  for (std::size_t i = 0; i < shadow.size(); ++i)
    shadow[i] = (1.0 - tau) * shadow[i] + tau * source[i];
}

void save_tensors(std::ostream& os,
                  std::span<const std::pair<std::string, const Vec*>> tensors) {
  os << "bpolab-tensors 1\n";
  const auto flags = os.flags();
  os << std::hexfloat;
  for (const auto& [name, vec] : tensors) {
    require(!name.empty() && name.find_first_of(" \t\n") == std::string::npos,
            "save_tensors: tensor names must be non-empty and whitespace-free");
    os << name << ' ' << std::dec << vec->size() << std::hexfloat << '\n';
    for (std::size_t i = 0; i < vec->size(); ++i)
      os << (*vec)[i] << (i + 1 == vec->size() ? '\n' : ' ');
    if (vec->empty()) os << '\n';
  }
  os.flags(flags);
  if (!os) throw std::runtime_error("save_tensors: write failed");
}

std::vector<std::pair<std::string, Vec>> load_tensors(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "bpolab-tensors" || version != 1)
    throw std::runtime_error("load_tensors: not a bpolab-tensors v1 archive");

  std::vector<std::pair<std::string, Vec>> out;
  std::string name;
  while (is >> name) {
    std::size_t n = 0;
    if (!(is >> n))
      throw std::runtime_error("load_tensors: tensor '" + name + "': missing element count");
    Vec vec(n);
    std::string tok;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(is >> tok))
        throw std::runtime_error("load_tensors: tensor '" + name + "': expected " +
                                 std::to_string(n) + " values, file ended at " +
                                 std::to_string(i));
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);  // strtod handles hexfloat
      if (end == tok.c_str() || *end != '\0' || !std::isfinite(v))
        throw std::runtime_error("load_tensors: tensor '" + name + "': bad value '" + tok +
                                 "'");
      vec[i] = v;
    }
    out.emplace_back(std::move(name), std::move(vec));
  }
  return out;
}

double max_rel_err_vs_fd(Vec& params, const std::function<double()>& scalar_fn,
                         const Vec& analytic, double h, double floor) {
  require(params.size() == analytic.size(), "max_rel_err_vs_fd: size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = scalar_fn();
    params[i] = keep - h;
    const double dn = scalar_fn();
    params[i] = keep;
    const double num = (up - dn) / (2.0 * h);
    const double denom = std::max({std::abs(num), std::abs(analytic[i]), floor});
    worst = std::max(worst, std::abs(num - analytic[i]) / denom);
  }
  return worst;
}

}  // namespace bpo::approx
