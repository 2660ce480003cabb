#pragma once

#include <cstddef>
#include <span>

namespace dlab::trainers {

/// Sample energy distance 2 E|X-Y| - E|X-X'| - E|Y-Y'| between two row-major
/// [n, dim] sample sets. Within-set terms are U-statistics (i != j).
double energy_distance(std::span<const double> x, std::span<const double> y, std::size_t dim);

}  // namespace dlab::trainers
