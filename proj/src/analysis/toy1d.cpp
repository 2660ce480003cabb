#include "dlab/analysis/toy1d.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dlab/autodiff/adam.hpp"
#include "dlab/autodiff/ops.hpp"

namespace dlab::analysis {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

void require_grid_size(std::size_t n, const QuadratureGrid& grid, const char* what) {
  if (n != grid.points) throw std::invalid_argument(std::string(what) + ": values do not match the grid");
}

std::vector<double> evaluate(const teachers::MixtureDensity& p, const std::vector<double>& xs, bool score) {
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const std::span<const double> x(&xs[i], 1);
    out[i] = score ? teachers::gmm_score(p, x)[0] : std::exp(teachers::gmm_logdensity(p, x));
  }
  return out;
}

}  // namespace

void QuadratureGrid::validate() const {
  if (points < 2) throw std::invalid_argument("grid: need at least 2 points");
  if (!(hi > lo)) throw std::invalid_argument("grid: hi must exceed lo");
}

std::vector<double> QuadratureGrid::nodes() const {
  validate();
  std::vector<double> x(points);
  for (std::size_t i = 0; i < points; ++i) x[i] = lo + spacing() * static_cast<double>(i);
  x.back() = hi;
  return x;
}

std::vector<double> QuadratureGrid::weights() const {
  validate();
  std::vector<double> w(points, spacing());
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

double trapezoid(std::span<const double> values, const QuadratureGrid& grid) {
  require_grid_size(values.size(), grid, "trapezoid");
  const auto w = grid.weights();
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) acc += w[i] * values[i];
  return acc;
}

double reverse_kl_quadrature(std::span<const double> q, std::span<const double> p, const QuadratureGrid& grid) {
  require_grid_size(q.size(), grid, "reverse_kl_quadrature");
  require_grid_size(p.size(), grid, "reverse_kl_quadrature");
  std::vector<double> f(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double qi = std::max(q[i], kDensityFloor), pi = std::max(p[i], kDensityFloor);
    f[i] = qi * (std::log(qi) - std::log(pi));
  }
  return trapezoid(f, grid);
}

double fisher_divergence_quadrature(std::span<const double> q, std::span<const double> score_q,
                                    std::span<const double> score_p, const QuadratureGrid& grid) {
  require_grid_size(q.size(), grid, "fisher_divergence_quadrature");
  require_grid_size(score_q.size(), grid, "fisher_divergence_quadrature");
  require_grid_size(score_p.size(), grid, "fisher_divergence_quadrature");
  std::vector<double> f(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double d = score_q[i] - score_p[i];
    f[i] = q[i] * d * d;
  }
  return trapezoid(f, grid);
}

double reverse_kl_quadrature(const teachers::MixtureDensity& q, const teachers::MixtureDensity& p,
                             const QuadratureGrid& grid) {
  const auto xs = grid.nodes();
  return reverse_kl_quadrature(evaluate(q, xs, false), evaluate(p, xs, false), grid);
}

double fisher_divergence_quadrature(const teachers::MixtureDensity& q, const teachers::MixtureDensity& p,
                                    const QuadratureGrid& grid) {
  const auto xs = grid.nodes();
  return fisher_divergence_quadrature(evaluate(q, xs, false), evaluate(q, xs, true), evaluate(p, xs, true), grid);
}

void SymmetricPairModel::validate() const {
  if (!(m >= 0.0)) throw std::invalid_argument("symmetric pair: m must be non-negative");
  if (!(s > 0.0)) throw std::invalid_argument("symmetric pair: s must be positive");
}

teachers::MixtureDensity SymmetricPairModel::as_mixture() const {
  validate();
  return teachers::mixture_1d({0.5, 0.5}, {m, -m}, {s, s});
}

ToyFitResult toy_fit(const ToyFitOptions& options) {
  options.grid.validate();
  options.init.validate();
  options.target.validate();
  if (options.target.dim != 1) throw std::invalid_argument("toy_fit: target must be one-dimensional");

  const auto xs = options.grid.nodes();
  const std::size_t n = xs.size();
  const auto x = ad::Value::constant(xs, {n});
  const auto x2 = ad::Value::constant([&] {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = xs[i] * xs[i];
    return v;
  }(), {n});
  const auto w = ad::Value::constant(options.grid.weights(), {n});
  std::vector<double> log_p_data(n), score_p_data(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> xi(&xs[i], 1);
    log_p_data[i] = teachers::gmm_logdensity(options.target, xi);
    score_p_data[i] = teachers::gmm_score(options.target, xi)[0];
  }
  const auto log_p = ad::Value::constant(log_p_data, {n});
  const auto score_p = ad::Value::constant(score_p_data, {n});

  auto m = ad::Value::variable({options.init.m}, {1});
  auto log_s = ad::Value::variable({std::log(options.init.s)}, {1});

  // log q = -(x^2 + m^2) / (2 s^2) - log s - log sqrt(2 pi) + log cosh(x m / s^2)
  auto objective = [&]() {
    auto inv_s2 = ad::exp(ad::scale(log_s, -2.0));
    auto u = ad::mul(ad::mul(x, m), inv_s2);
    auto quad = ad::mul(ad::add(x2, ad::square(m)), inv_s2);
    auto log_q = ad::add_scalar(ad::sub(ad::sub(ad::log_cosh(u), ad::scale(quad, 0.5)), log_s), -kHalfLog2Pi);
    auto q = ad::exp(log_q);
    if (options.objective == ToyObjective::reverse_kl) return ad::sum(ad::mul(w, ad::mul(q, ad::sub(log_q, log_p))));
    auto score_q = ad::mul(ad::sub(ad::mul(m, ad::tanh(u)), x), inv_s2);
    return ad::sum(ad::mul(w, ad::mul(q, ad::square(ad::sub(score_q, score_p)))));
  };

  ad::Adam opt({m, log_s}, {options.lr, options.beta1, options.beta2, 1e-8});
  ToyFitResult result;
  const double log_floor = std::log(kMinScale);
  for (std::size_t step = 0; step <= options.steps; ++step) {
    auto loss = objective();
    result.trajectory.push_back({step, m.data()[0], std::exp(log_s.data()[0]), loss.item()});
    if (step == options.steps) break;
    opt.zero_grad();
    ad::backward(loss);
    opt.step();
    if (m.data()[0] < 0.0) m.mutable_data()[0] = 0.0;
    if (log_s.data()[0] < log_floor) {
      log_s.mutable_data()[0] = log_floor;
      result.scale_floor_hit = true;
    }
  }
  result.fitted = {m.data()[0], std::exp(log_s.data()[0])};
  const auto q = result.fitted.as_mixture();
  result.reverse_kl = reverse_kl_quadrature(q, options.target, options.grid);
  result.fisher = fisher_divergence_quadrature(q, options.target, options.grid);
  return result;
}

}  // namespace dlab::analysis
