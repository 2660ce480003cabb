#pragma once

#include <optional>
#include <span>

#include "dlab/diffusion/predictor.hpp"

namespace dlab::diffusion {

/// Deterministic few-step Euler sampler in x-prediction form.
///
/// Starting from x = z at ladder[0], each step predicts x0 and re-noises to the
/// next level reusing the implied noise:
///   x' = alpha(t') x0_hat + sigma(t') (x - alpha(t) x0_hat) / sigma(t).
/// Returns the last x0 prediction. The whole unroll stays on the tape.
///
/// If `grad_step` is set, the unroll runs with frozen predictions up to that
/// step and returns its x0 prediction, so parameters receive gradient through
/// that single generator call.
ad::Value euler_sample(const XPredictor& generator, std::span<const double> ladder, const ad::Value& z,
                       std::optional<std::size_t> grad_step = std::nullopt);

}  // namespace dlab::diffusion
