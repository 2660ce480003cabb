#include "dlab/teachers/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "dlab/diffusion/schedule.hpp"

namespace dlab::teachers {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

double log_sum_exp(std::span<const double> v) {
  const double hi = *std::max_element(v.begin(), v.end());
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

// Per-component log N(x; mu_k, diag(s_k^2)) + log w_k.
std::vector<double> component_log_joint(const MixtureDensity& p, std::span<const double> x) {
  std::vector<double> out(p.components());
  for (std::size_t k = 0; k < p.components(); ++k) {
    double lp = std::log(p.weights[k]);
    for (std::size_t d = 0; d < p.dim; ++d) {
      const double s = p.stddev(k, d);
      const double z = (x[d] - p.mean(k, d)) / s;
      lp += -0.5 * z * z - std::log(s) - kHalfLog2Pi;
    }
    out[k] = lp;
  }
  return out;
}

std::vector<double> responsibilities(const MixtureDensity& p, std::span<const double> x) {
  auto lj = component_log_joint(p, x);
  const double lse = log_sum_exp(lj);
  for (auto& v : lj) v = std::exp(v - lse);
  return lj;
}

void require_rows(std::size_t n, std::size_t dim, const char* what) {
  if (dim == 0 || n % dim != 0) throw std::invalid_argument(std::string(what) + ": batch not a multiple of dim");
}

}  // namespace

void MixtureDensity::validate() const {
  if (weights.empty()) throw std::invalid_argument("mixture: no components");
  if (dim == 0) throw std::invalid_argument("mixture: dim must be positive");
  if (means.size() != weights.size() * dim || stds.size() != weights.size() * dim) {
    throw std::invalid_argument("mixture: means/stds must have components x dim entries");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("mixture: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("mixture: weights must sum to 1");
  for (double s : stds) {
    if (!(s > 0.0)) throw std::invalid_argument("mixture: stds must be positive");
  }
}

MixtureDensity mixture_1d(std::vector<double> weights, std::vector<double> means, std::vector<double> stds) {
  MixtureDensity p{std::move(weights), std::move(means), std::move(stds), 1};
  p.validate();
  return p;
}

MixtureDensity asymmetric_toy_target() { return mixture_1d({0.75, 0.25}, {-1.2, 2.0}, {0.55, 0.85}); }

MixtureDensity default_2d_target() {
  MixtureDensity p{{0.6, 0.4}, {-1.5, -1.0, 1.5, 1.0}, {0.45, 0.5, 0.55, 0.4}, 2};
  p.validate();
  return p;
}

MixtureDensity select_components(const MixtureDensity& p, std::span<const std::size_t> components) {
  if (components.empty()) throw std::invalid_argument("select_components: empty selection");
  MixtureDensity out;
  out.dim = p.dim;
  double total = 0.0;
  for (auto k : components) {
    if (k >= p.components()) throw std::invalid_argument("select_components: index out of range");
    total += p.weights[k];
  }
  for (auto k : components) {
    out.weights.push_back(p.weights[k] / total);
    for (std::size_t d = 0; d < p.dim; ++d) {
      out.means.push_back(p.mean(k, d));
      out.stds.push_back(p.stddev(k, d));
    }
  }
  return out;
}

double gmm_logdensity(const MixtureDensity& p, std::span<const double> x) {
  if (x.size() != p.dim) throw std::invalid_argument("gmm_logdensity: point has wrong dimension");
  return log_sum_exp(component_log_joint(p, x));
}

std::vector<double> gmm_score(const MixtureDensity& p, std::span<const double> x) {
  if (x.size() != p.dim) throw std::invalid_argument("gmm_score: point has wrong dimension");
  const auto resp = responsibilities(p, x);
  std::vector<double> out(p.dim, 0.0);
  for (std::size_t k = 0; k < p.components(); ++k) {
    for (std::size_t d = 0; d < p.dim; ++d) {
      const double s = p.stddev(k, d);
      out[d] += resp[k] * (p.mean(k, d) - x[d]) / (s * s);
    }
  }
  return out;
}

std::vector<double> gmm_score_batch(const MixtureDensity& p, std::span<const double> x) {
  require_rows(x.size(), p.dim, "gmm_score_batch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); i += p.dim) {
    const auto s = gmm_score(p, x.subspan(i, p.dim));
    std::copy(s.begin(), s.end(), out.begin() + static_cast<std::ptrdiff_t>(i));
  }
  return out;
}

MixtureDensity gmm_marginal(const MixtureDensity& p, double t, double t_min) {
  if (!(t >= t_min && t <= 1.0)) throw std::invalid_argument("gmm_marginal: t outside [t_min, 1]");
  const double a = diffusion::alpha(t), s = diffusion::sigma(t);
  MixtureDensity out = p;
  for (std::size_t i = 0; i < p.means.size(); ++i) {
    out.means[i] = a * p.means[i];
    out.stds[i] = std::sqrt(a * a * p.stds[i] * p.stds[i] + s * s);
  }
  return out;
}

std::vector<double> teacher_xpred(const MixtureDensity& p, std::span<const double> xt, double t, double t_min) {
  require_rows(xt.size(), p.dim, "teacher_xpred");
  const MixtureDensity marginal = gmm_marginal(p, t, t_min);
  const double a = diffusion::alpha(t);
  std::vector<double> out(xt.size(), 0.0);
  for (std::size_t i = 0; i < xt.size(); i += p.dim) {
    const auto x = xt.subspan(i, p.dim);
    const auto resp = responsibilities(marginal, x);
    for (std::size_t k = 0; k < p.components(); ++k) {
      for (std::size_t d = 0; d < p.dim; ++d) {
        const double s2 = p.stddev(k, d) * p.stddev(k, d);
        const double v = marginal.stddev(k, d) * marginal.stddev(k, d);
        const double post = p.mean(k, d) + a * s2 / v * (x[d] - a * p.mean(k, d));
        out[i + d] += resp[k] * post;
      }
    }
  }
  return out;
}

std::vector<double> cfg_combine(std::span<const double> cond, std::span<const double> uncond, double cfg_scale) {
  if (cond.size() != uncond.size()) throw std::invalid_argument("cfg_combine: size mismatch");
  if (cfg_scale < 0.0) throw std::invalid_argument("cfg_combine: cfg_scale must be non-negative");
  std::vector<double> out(cond.size());
  for (std::size_t i = 0; i < cond.size(); ++i) out[i] = cond[i] + cfg_scale * (cond[i] - uncond[i]);
  return out;
}

std::vector<double> sample(const MixtureDensity& p, std::size_t n, RngStream& rng) {
  std::vector<double> out(n * p.dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    std::size_t k = 0;
    double acc = p.weights[0];
    while (u >= acc && k + 1 < p.components()) acc += p.weights[++k];
    for (std::size_t d = 0; d < p.dim; ++d) out[i * p.dim + d] = p.mean(k, d) + p.stddev(k, d) * rng.normal();
  }
  return out;
}

AnalyticTeacher::AnalyticTeacher(MixtureDensity unconditional, GuidanceConfig guidance)
    : unconditional_(std::move(unconditional)), guidance_(std::move(guidance)) {
  unconditional_.validate();
  if (guidance_.cfg_scale < 0.0) throw std::invalid_argument("teacher: cfg_scale must be non-negative");
  if (guidance_.conditional) {
    guidance_.conditional->validate();
    if (guidance_.conditional->dim != unconditional_.dim) {
      throw std::invalid_argument("teacher: conditional mixture dimension mismatch");
    }
  }
}

std::vector<double> AnalyticTeacher::xpred(std::span<const double> xt, double t) const {
  auto uncond = teacher_xpred(unconditional_, xt, t);
  if (!guidance_.conditional) return uncond;
  auto cond = teacher_xpred(*guidance_.conditional, xt, t);
  return cfg_combine(cond, uncond, guidance_.cfg_scale);
}

const MixtureDensity& AnalyticTeacher::target() const {
  return guidance_.conditional ? *guidance_.conditional : unconditional_;
}

}  // namespace dlab::teachers
