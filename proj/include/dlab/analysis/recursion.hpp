#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dlab::analysis {

enum class DriveKind { zero, constant, random_bounded };

std::string_view to_string(DriveKind d);
DriveKind parse_drive(std::string_view s);

/// r_{k+1} = (1 - eta_psi lambda) r_k + dx0_k with ||dx0_k|| <= eta_theta (A + lambda B).
struct RecursionParams {
  double eta_theta = 0.1;
  double eta_psi = 1.0;
  double lambda = 0.1;
  double A = 0.1;
  double B = 1.0;
  std::vector<double> r0{1.0};
  DriveKind drive = DriveKind::random_bounded;
  std::vector<double> drive_constant;  // constant drive; empty = +bound along the first axis
  std::uint64_t seed = 0;

  /// Throws ContractionError unless 0 < eta_psi lambda <= 1; invalid_argument for other fields.
  void validate() const;
  [[nodiscard]] double contraction() const { return eta_psi * lambda; }
  [[nodiscard]] double drive_bound() const { return eta_theta * (A + lambda * B); }
  [[nodiscard]] std::size_t dim() const { return r0.size(); }
};

class ContractionError : public std::invalid_argument {
 public:
  explicit ContractionError(double eta_psi_lambda);
};

struct RecursionTrajectory {
  std::vector<std::vector<double>> r;  // steps + 1 entries, r[0] = r0
  std::vector<double> r_norm;
  std::vector<double> drive_norm;  // steps entries
};

RecursionTrajectory residual_recursion(const RecursionParams& params, std::size_t steps);

struct Bounds {
  double steady_state;  // eta_theta (A + lambda B) / (eta_psi lambda)
  double staleness;     // eta_theta (A + lambda B)
  double error_proxy;   // steady_state + staleness
  double c1;            // error_proxy = c1 / lambda + c2 lambda + const
  double c2;
  double lambda_star;   // sqrt(c1 / c2), infinite when c2 = 0
};

Bounds bounds(const RecursionParams& params);

struct SweepRow {
  double lambda;
  Bounds b;
};

/// Log-spaced lambda values in [lo, hi]; rows whose eta_psi lambda > 1 are still reported.
std::vector<SweepRow> lambda_sweep(const RecursionParams& params, double lo, double hi, std::size_t count);
/// Indices of strict interior local minima of error_proxy.
std::vector<std::size_t> local_minima(const std::vector<SweepRow>& rows);

struct BoundCheck {
  RecursionParams params;
  double max_residual = 0.0;  // after burn-in
  double steady_bound = 0.0;
  double max_drive = 0.0;
  double staleness_bound = 0.0;
  bool pass = false;
  std::string counterexample;  // empty when pass
};

inline constexpr double kBoundSlack = 1e-9;

BoundCheck verify_bounds(const RecursionParams& params, std::size_t steps = 10000, std::size_t burn_in = 1000);

struct BoundSuite {
  std::vector<BoundCheck> draws;
  bool all_pass = false;
};

/// Random admissible parameters (drive kinds cycled); each draw gets its own stream.
BoundSuite verify_bounds_random(std::uint64_t seed, std::size_t draws = 100, std::size_t steps = 10000,
                                std::size_t burn_in = 1000);

}  // namespace dlab::analysis
