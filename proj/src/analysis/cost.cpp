#include "dlab/analysis/cost.hpp"

#include <stdexcept>

namespace dlab::analysis {

void CostModel::validate() const {
  if (!(t_fwd >= 0.0) || !(t_short_bwd >= 0.0) || !(t_long_bwd >= 0.0)) {
    throw std::invalid_argument("cost model: times must be non-negative");
  }
  if (K < 1) throw std::invalid_argument("cost model: K must be >= 1");
  if (!(unroll_factor >= 0.0) || !(sgmd_extra_forwards >= 0.0) || !(baseline_extra_forwards >= 0.0)) {
    throw std::invalid_argument("cost model: forward counts must be non-negative");
  }
}

CostReport cost_model(const CostModel& cm) {
  cm.validate();
  CostReport out;
  out.sgmd.forwards = cm.unroll_factor + cm.sgmd_extra_forwards;
  out.sgmd.long_backwards = 1;
  out.sgmd.short_backwards = 1;
  out.sgmd.seconds = out.sgmd.forwards * cm.t_fwd + cm.t_long_bwd + cm.t_short_bwd;

  const double updates = 1.0 + cm.K;
  out.baseline.forwards = (cm.unroll_factor + cm.baseline_extra_forwards) * updates;
  out.baseline.long_backwards = 0;
  out.baseline.short_backwards = 1 + cm.K;
  out.baseline.seconds = out.baseline.forwards * cm.t_fwd + updates * cm.t_short_bwd;
  out.speedup = out.sgmd.seconds > 0.0 ? out.baseline.seconds / out.sgmd.seconds : 0.0;
  return out;
}

}  // namespace dlab::analysis
