#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dlab::analysis {

struct IdentityCheck {
  std::string name;
  double max_error = 0.0;  // max |a - b| / max(1, max |b|) over tuples
  double tolerance = 0.0;
  bool pass = false;
  std::string worst_tuple;  // the offending tuple when the check fails
};

struct IdentityReport {
  std::vector<IdentityCheck> checks;
  bool all_pass = false;
};

struct IdentityOptions {
  std::uint64_t seed = 0;
  std::size_t tuples = 50;
  std::size_t dim = 4;
  std::vector<double> alphas{0.0, 0.3, 1.0, 2.0};
};

/// Gradient identities of the SIM / SiD x-prediction rewrites at random
/// (x_fake, x_real, x0, t) tuples, including the coupled case x0 = M x_fake + b.
IdentityReport identity_suite(const IdentityOptions& options = {});

}  // namespace dlab::analysis
