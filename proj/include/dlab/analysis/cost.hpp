#pragma once

namespace dlab::analysis {

/// Per-iteration wall-clock model for the two-backward schedule versus a
/// K-fake-update baseline. Times in seconds.
struct CostModel {
  double t_fwd = 5.0;
  double t_short_bwd = 15.0;
  double t_long_bwd = 30.0;
  int K = 5;
  double unroll_factor = 2.5;       // forward evaluations spent generating x0
  double sgmd_extra_forwards = 4.0;  // fake (live + frozen input), teacher, fake again for the inner step
  double baseline_extra_forwards = 3.0;  // per update: fake, teacher, regression forward

  void validate() const;
};

struct MethodCost {
  double forwards = 0.0;
  int short_backwards = 0;
  int long_backwards = 0;
  double seconds = 0.0;
};

struct CostReport {
  MethodCost sgmd;
  MethodCost baseline;
  double speedup = 0.0;  // baseline.seconds / sgmd.seconds
};

CostReport cost_model(const CostModel& cm = {});

}  // namespace dlab::analysis
