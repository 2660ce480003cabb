#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dlab/rng.hpp"

namespace dlab::teachers {

/// Diagonal Gaussian mixture in `dim` dimensions.
/// means and stds are row-major [components, dim].
struct MixtureDensity {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> stds;
  std::size_t dim = 1;

  [[nodiscard]] std::size_t components() const { return weights.size(); }
  [[nodiscard]] double mean(std::size_t k, std::size_t d) const { return means[k * dim + d]; }
  [[nodiscard]] double stddev(std::size_t k, std::size_t d) const { return stds[k * dim + d]; }

  /// Weights sum to 1 within 1e-12, all weights and stds positive, sizes consistent.
  void validate() const;
};

/// 1D mixture from parallel weight/mean/std lists.
MixtureDensity mixture_1d(std::vector<double> weights, std::vector<double> means, std::vector<double> stds);

/// 0.75 N(-1.2, 0.55^2) + 0.25 N(2.0, 0.85^2)
MixtureDensity asymmetric_toy_target();

/// Default 2D two-mode target used by the distillation trainers.
MixtureDensity default_2d_target();

/// Mixture restricted to `components`, weights renormalized. Models a conditional teacher.
MixtureDensity select_components(const MixtureDensity& p, std::span<const std::size_t> components);

/// log p(x) via log-sum-exp. x has `dim` entries.
double gmm_logdensity(const MixtureDensity& p, std::span<const double> x);
/// grad_x log p(x): responsibility-weighted component scores.
std::vector<double> gmm_score(const MixtureDensity& p, std::span<const double> x);
/// Row-wise score for a [n, dim] batch.
std::vector<double> gmm_score_batch(const MixtureDensity& p, std::span<const double> x);

/// Law of x_t = (1 - t) x0 + t eps for x0 ~ p: means alpha mu, variances alpha^2 s^2 + sigma^2.
MixtureDensity gmm_marginal(const MixtureDensity& p, double t, double t_min = 0.02);

/// E[x0 | x_t] for a [n, dim] batch, computed from the closed-form Gaussian
/// posterior of each component. Valid on all of [t_min, 1] including alpha = 0.
std::vector<double> teacher_xpred(const MixtureDensity& p, std::span<const double> xt, double t,
                                  double t_min = 0.02);

/// cond + scale (cond - uncond)
std::vector<double> cfg_combine(std::span<const double> cond, std::span<const double> uncond, double cfg_scale);

/// n draws as a row-major [n, dim] array.
std::vector<double> sample(const MixtureDensity& p, std::size_t n, RngStream& rng);

struct GuidanceConfig {
  double cfg_scale = 0.0;
  std::optional<MixtureDensity> conditional;
};

/// Frozen analytic teacher: mu_base(x_t, t), optionally guidance-combined.
class AnalyticTeacher {
 public:
  explicit AnalyticTeacher(MixtureDensity unconditional, GuidanceConfig guidance = {});

  [[nodiscard]] std::vector<double> xpred(std::span<const double> xt, double t) const;
  [[nodiscard]] const MixtureDensity& density() const { return unconditional_; }
  /// Distribution the guided teacher targets (the conditional mixture when present).
  [[nodiscard]] const MixtureDensity& target() const;
  [[nodiscard]] std::size_t dim() const { return unconditional_.dim; }

 private:
  MixtureDensity unconditional_;
  GuidanceConfig guidance_;
};

}  // namespace dlab::teachers
