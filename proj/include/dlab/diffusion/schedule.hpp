#pragma once

#include <span>
#include <string>
#include <vector>

#include "dlab/autodiff/value.hpp"

namespace dlab::diffusion {

/// Linear interpolation schedule: alpha(t) = 1 - t, sigma(t) = t.
inline double alpha(double t) { return 1.0 - t; }
inline double sigma(double t) { return t; }

inline constexpr double kDefaultTMin = 0.02;

/// Few-step sampling ladder {1000, 960, 889, 727} / 1000.
std::vector<double> default_sampling_ladder();
/// Training noise levels: the sampling ladder with t = 1 replaced by 0.98,
/// since alpha(1) = 0 zeroes the Fisher weight.
std::vector<double> default_train_timesteps();

struct NoiseSchedule {
  double t_min = kDefaultTMin;
  std::vector<double> sampling_ladder = default_sampling_ladder();
  std::vector<double> train_timesteps = default_train_timesteps();

  /// Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
};

/// Ladders must be non-empty, strictly descending and inside (0, 1].
void validate_ladder(std::span<const double> ladder, const std::string& what);

/// c(t) = alpha^2 / sigma^4. Throws for t < t_min or t > 1.
double c_weight(double t, double t_min = kDefaultTMin);

/// x_t = alpha x0 + sigma eps, differentiable in x0. Throws for t outside [t_min, 1].
ad::Value forward_noise(const ad::Value& x0, double t, std::span<const double> eps,
                        double t_min = kDefaultTMin);
std::vector<double> forward_noise(std::span<const double> x0, double t, std::span<const double> eps,
                                  double t_min = kDefaultTMin);

/// s = (alpha mu - x_t) / sigma^2
std::vector<double> score_from_xpred(std::span<const double> mu, std::span<const double> xt, double t);
/// mu = (x_t + sigma^2 s) / alpha; inverse of score_from_xpred for t < 1.
std::vector<double> xpred_from_score(std::span<const double> score, std::span<const double> xt, double t);

}  // namespace dlab::diffusion
