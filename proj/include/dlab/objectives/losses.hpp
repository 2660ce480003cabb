#pragma once

#include <span>
#include <vector>

#include "dlab/autodiff/value.hpp"
#include "dlab/diffusion/predictor.hpp"
#include "dlab/teachers/mixture.hpp"

namespace dlab::objectives {

/// Everything one iteration's losses are built from. Rebuilt every step.
///
/// Stop-gradient placement:
///   x_real       = teacher(sg[x_t])          -- a constant on the tape
///   x_fake       = mu_psi(x_t)               -- live input path back to x0
///   x_fake_sg_in = mu_psi(sg[x_t])           -- frozen input; psi path only
///   delta        = x_fake - x_real
///   r            = sg[x0] - x_fake
struct ScorePair {
  ad::Value x0;
  std::vector<double> eps;
  double t = 0.0;
  double c = 0.0;
  ad::Value xt;
  ad::Value x_fake;
  ad::Value x_fake_sg_in;
  ad::Value x_real;
  ad::Value delta;
  ad::Value r;

  [[nodiscard]] std::size_t batch() const { return x0.rows(); }
};

/// Forward-noises x0 at t with eps and evaluates both networks.
ScorePair make_pair(const ad::Value& x0, double t, std::span<const double> eps, const diffusion::XPredictor& fake,
                    const teachers::AnalyticTeacher& teacher, double t_min = 0.02);

/// Pair built directly from predictions, with no network in between (x_fake is
/// used for both the live and frozen-input slots). Used by algebraic checks.
ScorePair make_pair_from_predictions(const ad::Value& x0, const ad::Value& x_fake, const ad::Value& x_real, double t,
                                     double t_min = 0.02);

struct ObjectiveConfig {
  double lambda = 0.1;
  double sid_alpha = 1.0;
  bool dmd_normalize = false;
  int fake_updates = 1;

  void validate() const;
};

// All losses are per-sample squared norms (summed over coordinates) averaged over the batch.

/// 1/2 c(t) ||delta||^2. Gradient w.r.t. x_fake is c(t) delta / batch.
ad::Value fisher_loss(const ScorePair& pair);

/// ||mu_psi(sg[x_t]) - sg[x0]||^2: reaches psi only.
ad::Value fake_regression_loss(const ScorePair& pair);

/// Per-element x_t seed (s_fake - s_real) / batch reproducing the reverse-KL
/// generator gradient. With `normalize`, each sample's seed is divided by
/// mean_d |x_real - x0| + 1e-8.
std::vector<double> dmd_generator_grad(const ScorePair& pair, bool normalize);

/// Pushes dmd_generator_grad back from x_t into `targets`.
void inject_dmd_gradient(const ScorePair& pair, bool normalize, std::span<const ad::Value> targets);

struct SimTerms {
  ad::Value explicit_term;  // L1 = 1/2 c ||delta||^2 (live x_t input)
  ad::Value implicit_term;  // L2 = c <delta_sg_in, x0 - x_fake_sg_in>
};

/// Explicit and implicit terms. In L2 the fake score sees sg[x_t]; the
/// generator reaches L2 only through the x0 in the residual.
SimTerms sim_losses(const ScorePair& pair);
ad::Value sim_loss(const ScorePair& pair);

/// L1 + alpha L2.
ad::Value sid_loss(const ScorePair& pair, double alpha);

/// -1/2 ||r||^2, gradient +r on x_fake (per-sample, before batch averaging).
ad::Value nr_loss(const ScorePair& pair);
/// +1/2 ||r||^2, gradient -r on x_fake.
ad::Value rc_loss(const ScorePair& pair);

/// fisher + lambda nr. Throws for lambda <= 0.
ad::Value sgmd_outer_loss(const ScorePair& pair, double lambda);
/// lambda rc. Throws for lambda <= 0.
ad::Value sgmd_inner_loss(const ScorePair& pair, double lambda);

struct NrGradientReport {
  std::vector<double> autodiff;  // d L_NR / d x0 through x0 -> x_t -> x_fake
  std::vector<double> explicit_route;  // alpha J^T (x0 - x_fake) / batch, J by central differences
  double max_relative_error = 0.0;
};

/// Computes the NR generator-side gradient on x0 two independent ways.
/// x0 and eps are [batch, dim] row-major.
NrGradientReport nr_effective_grad_check(std::span<const double> x0, std::size_t dim, double t,
                                         std::span<const double> eps, const diffusion::XPredictor& fake,
                                         double h = 1e-6);

}  // namespace dlab::objectives
