#include "dlab/analysis/recursion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "dlab/rng.hpp"

namespace dlab::analysis {
namespace {

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::string describe(const RecursionParams& p) {
  return fmt::format("eta_theta={} eta_psi={} lambda={} A={} B={} dim={} drive={} seed={}", p.eta_theta, p.eta_psi,
                     p.lambda, p.A, p.B, p.dim(), to_string(p.drive), p.seed);
}

Bounds closed_form(const RecursionParams& p) {
  Bounds b{};
  b.staleness = p.drive_bound();
  b.steady_state = b.staleness / p.contraction();
  b.error_proxy = b.steady_state + b.staleness;
  b.c1 = p.eta_theta * p.A / p.eta_psi;
  b.c2 = p.eta_theta * p.B;
  b.lambda_star = b.c2 > 0.0 ? std::sqrt(b.c1 / b.c2) : std::numeric_limits<double>::infinity();
  return b;
}

}  // namespace

std::string_view to_string(DriveKind d) {
  switch (d) {
    case DriveKind::zero: return "zero";
    case DriveKind::constant: return "constant";
    case DriveKind::random_bounded: return "random";
  }
  return "?";
}

DriveKind parse_drive(std::string_view s) {
  for (auto d : {DriveKind::zero, DriveKind::constant, DriveKind::random_bounded}) {
    if (to_string(d) == s) return d;
  }
  throw std::invalid_argument("unknown drive '" + std::string(s) + "' (expected zero, constant, random)");
}

ContractionError::ContractionError(double eta_psi_lambda)
    : std::invalid_argument(fmt::format(
          "residual recursion needs 0 < eta_psi * lambda <= 1 for contraction (got {})", eta_psi_lambda)) {}

void RecursionParams::validate() const {
  if (!(eta_theta > 0.0)) throw std::invalid_argument("recursion: eta_theta must be positive");
  if (!(eta_psi > 0.0)) throw std::invalid_argument("recursion: eta_psi must be positive");
  if (!(lambda > 0.0)) throw std::invalid_argument("recursion: lambda must be positive");
  if (!(A >= 0.0) || !(B >= 0.0)) throw std::invalid_argument("recursion: A and B must be non-negative");
  if (r0.empty()) throw std::invalid_argument("recursion: r0 must not be empty");
  const double k = contraction();
  if (!(k > 0.0 && k <= 1.0)) throw ContractionError(k);
  if (drive == DriveKind::constant && !drive_constant.empty()) {
    if (drive_constant.size() != r0.size()) throw std::invalid_argument("recursion: drive_constant size != r0 size");
    if (norm(drive_constant) > drive_bound() * (1.0 + 1e-12)) {
      throw std::invalid_argument("recursion: drive_constant exceeds eta_theta (A + lambda B)");
    }
  }
}

RecursionTrajectory residual_recursion(const RecursionParams& params, std::size_t steps) {
  params.validate();
  const std::size_t d = params.dim();
  const double keep = 1.0 - params.contraction();
  const double bound = params.drive_bound();
  std::vector<double> constant = params.drive_constant;
  if (constant.empty()) {
    constant.assign(d, 0.0);
    constant[0] = bound;
  }
  RngStream rng = RngStream(params.seed).split(0x7ec);

  RecursionTrajectory out;
  out.r.reserve(steps + 1);
  out.r.push_back(params.r0);
  out.r_norm.push_back(norm(params.r0));
  std::vector<double> drive(d, 0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    switch (params.drive) {
      case DriveKind::zero: std::fill(drive.begin(), drive.end(), 0.0); break;
      case DriveKind::constant: drive = constant; break;
      case DriveKind::random_bounded: {
        // uniform direction, radius uniform in [0, bound]
        for (auto& v : drive) v = rng.normal();
        const double n = norm(drive);
        const double radius = bound * rng.uniform();
        for (auto& v : drive) v = n > 0.0 ? v / n * radius : 0.0;
        break;
      }
    }
    const auto& prev = out.r.back();
    std::vector<double> next(d);
    for (std::size_t i = 0; i < d; ++i) next[i] = keep * prev[i] + drive[i];
    out.drive_norm.push_back(norm(drive));
    out.r_norm.push_back(norm(next));
    out.r.push_back(std::move(next));
  }
  return out;
}

Bounds bounds(const RecursionParams& params) {
  params.validate();
  return closed_form(params);
}

std::vector<SweepRow> lambda_sweep(const RecursionParams& params, double lo, double hi, std::size_t count) {
  if (!(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("lambda_sweep: need 0 < lo < hi");
  if (count < 2) throw std::invalid_argument("lambda_sweep: need at least 2 points");
  std::vector<SweepRow> rows;
  const double llo = std::log(lo), lhi = std::log(hi);
  for (std::size_t i = 0; i < count; ++i) {
    RecursionParams p = params;
    const double f = static_cast<double>(i) / static_cast<double>(count - 1);
    p.lambda = i == 0 ? lo : i + 1 == count ? hi : std::exp(llo + (lhi - llo) * f);
    // no contraction check here; the closed forms are still defined past eta_psi lambda = 1
    rows.push_back({p.lambda, closed_form(p)});
  }
  return rows;
}

std::vector<std::size_t> local_minima(const std::vector<SweepRow>& rows) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
    const double e = rows[i].b.error_proxy;
    if (e < rows[i - 1].b.error_proxy && e < rows[i + 1].b.error_proxy) out.push_back(i);
  }
  return out;
}

BoundCheck verify_bounds(const RecursionParams& params, std::size_t steps, std::size_t burn_in) {
  if (burn_in >= steps) throw std::invalid_argument("verify_bounds: burn_in must be below steps");
  const auto b = bounds(params);
  const auto traj = residual_recursion(params, steps);
  BoundCheck check;
  check.params = params;
  check.steady_bound = b.steady_state;
  check.staleness_bound = b.staleness;
  std::size_t worst_r = burn_in + 1, worst_d = 0;
  for (std::size_t k = burn_in + 1; k < traj.r_norm.size(); ++k) {
    if (traj.r_norm[k] > check.max_residual) {
      check.max_residual = traj.r_norm[k];
      worst_r = k;
    }
  }
  for (std::size_t k = 0; k < traj.drive_norm.size(); ++k) {
    if (traj.drive_norm[k] > check.max_drive) {
      check.max_drive = traj.drive_norm[k];
      worst_d = k;
    }
  }
  const bool r_ok = check.max_residual <= check.steady_bound + kBoundSlack;
  const bool d_ok = check.max_drive <= check.staleness_bound + kBoundSlack;
  check.pass = r_ok && d_ok;
  if (!r_ok) {
    check.counterexample = fmt::format("{}: |r_{}| = {} > steady bound {}", describe(params), worst_r,
                                       check.max_residual, check.steady_bound);
  } else if (!d_ok) {
    check.counterexample = fmt::format("{}: |dx0_{}| = {} > staleness bound {}", describe(params), worst_d,
                                       check.max_drive, check.staleness_bound);
  }
  return check;
}

BoundSuite verify_bounds_random(std::uint64_t seed, std::size_t draws, std::size_t steps, std::size_t burn_in) {
  const RngStream root(seed);
  BoundSuite suite;
  suite.all_pass = true;
  constexpr DriveKind kinds[] = {DriveKind::zero, DriveKind::constant, DriveKind::random_bounded};
  for (std::size_t i = 0; i < draws; ++i) {
    RngStream rng = root.split(i);
    RecursionParams p;
    p.eta_theta = std::exp(rng.uniform(std::log(1e-3), std::log(1.0)));
    p.eta_psi = std::exp(rng.uniform(std::log(1e-2), std::log(2.0)));
    // eta_psi lambda in [1e-3, 1]
    p.lambda = std::exp(rng.uniform(std::log(1e-3), 0.0)) / p.eta_psi;
    p.A = rng.uniform(0.0, 2.0);
    p.B = rng.uniform(0.0, 2.0);
    p.r0.assign(1 + rng.index(4), 0.0);
    // start inside the steady-state ball so no transient overshoots after burn-in
    const double steady = p.drive_bound() / p.contraction();
    for (auto& v : p.r0) v = rng.uniform(-1.0, 1.0);
    const double n0 = norm(p.r0);
    const double radius = steady * rng.uniform();
    for (auto& v : p.r0) v = n0 > 0.0 ? v / n0 * radius : 0.0;
    p.drive = kinds[i % 3];
    p.seed = rng.next_u64();
    auto check = verify_bounds(p, steps, burn_in);
    suite.all_pass = suite.all_pass && check.pass;
    suite.draws.push_back(std::move(check));
  }
  return suite;
}

}  // namespace dlab::analysis
