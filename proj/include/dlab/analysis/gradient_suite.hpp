#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dlab::analysis {

/// One loss checked against central differences of its closed form, with every
/// stop-gradient quantity frozen at its base value.
struct GradientCheck {
  std::string loss;
  std::size_t points = 0;
  double max_error_x0 = 0.0;   // generator side (d/dx0)
  double max_error_psi = 0.0;  // fake-score parameters
  double tolerance = 0.0;
  bool pass = false;
};

struct NrRouteCheck {
  std::string predictor;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct GradientSuiteReport {
  std::vector<GradientCheck> losses;
  std::vector<NrRouteCheck> nr_routes;
  bool all_pass = false;
};

inline constexpr double kGradientTolerance = 1e-4;

/// Every objective (fisher, regression, nr, rc, sim, sid, sgmd outer / inner)
/// at `points` random (x0, eps, t, mu_psi) draws, plus the NR autodiff versus
/// explicit-Jacobian route for linear and MLP fake scores.
GradientSuiteReport gradient_oracle_suite(std::uint64_t seed = 0, std::size_t points = 20);

}  // namespace dlab::analysis
