#include "dlab/trainers/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace dlab::trainers {
namespace {

double distance(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t d = 0; d < dim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return std::sqrt(s);
}

double cross_mean(std::span<const double> x, std::span<const double> y, std::size_t dim) {
  const std::size_t n = x.size() / dim, m = y.size() / dim;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < m; ++j) row += distance(&x[i * dim], &y[j * dim], dim);
    acc += row;
  }
  return acc / (static_cast<double>(n) * static_cast<double>(m));
}

double within_mean(std::span<const double> x, std::size_t dim) {
  const std::size_t n = x.size() / dim;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) row += distance(&x[i * dim], &x[j * dim], dim);
    acc += row;
  }
  return 2.0 * acc / (static_cast<double>(n) * static_cast<double>(n - 1));
}

}  // namespace

double energy_distance(std::span<const double> x, std::span<const double> y, std::size_t dim) {
  if (dim == 0 || x.size() % dim != 0 || y.size() % dim != 0) {
    throw std::invalid_argument("energy_distance: sample arrays must be [n, dim]");
  }
  if (x.size() / dim < 2 || y.size() / dim < 2) throw std::invalid_argument("energy_distance: need >= 2 samples each");
  return 2.0 * cross_mean(x, y, dim) - within_mean(x, dim) - within_mean(y, dim);
}

}  // namespace dlab::trainers
