#pragma once

#include <functional>
#include <span>
#include <vector>

namespace dlab::ad {

using ScalarFn = std::function<double(std::span<const double>)>;

/// Central differences, one coordinate at a time.
std::vector<double> finite_diff_grad(const ScalarFn& fn, std::span<const double> point, double h = 1e-5);

/// max_i |a_i - b_i| / max(|b|_inf, floor). Uses the reference vector's scale so
/// that near-zero components do not blow the ratio up.
double max_relative_error(std::span<const double> a, std::span<const double> reference, double floor = 1e-12);

}  // namespace dlab::ad
