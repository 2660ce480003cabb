#pragma once

#include <span>
#include <vector>

#include "dlab/teachers/mixture.hpp"

namespace dlab::analysis {

/// Uniform grid with trapezoid weights.
struct QuadratureGrid {
  double lo = -7.0;
  double hi = 7.0;
  std::size_t points = 4001;

  void validate() const;
  [[nodiscard]] double spacing() const { return (hi - lo) / static_cast<double>(points - 1); }
  [[nodiscard]] std::vector<double> nodes() const;
  [[nodiscard]] std::vector<double> weights() const;
};

inline constexpr double kDensityFloor = 1e-300;

double trapezoid(std::span<const double> values, const QuadratureGrid& grid);

/// KL(q || p) from density values on the grid (floored at 1e-300 before logs).
double reverse_kl_quadrature(std::span<const double> q, std::span<const double> p, const QuadratureGrid& grid);
/// Integral of q (score_q - score_p)^2.
double fisher_divergence_quadrature(std::span<const double> q, std::span<const double> score_q,
                                    std::span<const double> score_p, const QuadratureGrid& grid);

double reverse_kl_quadrature(const teachers::MixtureDensity& q, const teachers::MixtureDensity& p,
                             const QuadratureGrid& grid = {});
double fisher_divergence_quadrature(const teachers::MixtureDensity& q, const teachers::MixtureDensity& p,
                                    const QuadratureGrid& grid = {});

/// q(x) = 1/2 N(x; m, s^2) + 1/2 N(x; -m, s^2).
struct SymmetricPairModel {
  double m = 1.0;
  double s = 1.2;

  void validate() const;
  [[nodiscard]] teachers::MixtureDensity as_mixture() const;
};

enum class ToyObjective { reverse_kl, fisher };

struct ToyFitOptions {
  ToyObjective objective = ToyObjective::reverse_kl;
  std::size_t steps = 2500;
  double lr = 5e-2;
  double beta1 = 0.0;
  double beta2 = 0.999;
  SymmetricPairModel init{1.0, 1.2};
  QuadratureGrid grid{};
  teachers::MixtureDensity target = teachers::asymmetric_toy_target();
};

struct ToyFitPoint {
  std::size_t step;  // parameters before update `step`; the last point is the final model
  double m;
  double s;
  double objective;
};

struct ToyFitResult {
  std::vector<ToyFitPoint> trajectory;
  SymmetricPairModel fitted;
  double reverse_kl = 0.0;  // of the fitted model, both divergences reported
  double fisher = 0.0;
  bool scale_floor_hit = false;  // s was projected up to 1e-3 at least once
};

inline constexpr double kMinScale = 1e-3;

/// Adam on (m, log s) against the chosen quadrature objective; m is projected to m >= 0 and s to s >= 1e-3.
ToyFitResult toy_fit(const ToyFitOptions& options);

}  // namespace dlab::analysis
