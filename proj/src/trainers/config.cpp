#include "dlab/trainers/config.hpp"

#include <cmath>

namespace dlab::trainers {
namespace {

std::string join(const std::vector<std::string>& parts) {
  std::string out = "invalid trainer config:";
  for (const auto& p : parts) out += "\n  " + p;
  return out;
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::sgmd: return "sgmd";
    case Method::dmd2: return "dmd2";
    case Method::tsg_fisher: return "tsg_fisher";
    case Method::tsg_sim: return "tsg_sim";
    case Method::sid: return "sid";
  }
  return "?";
}

std::string_view to_string(Truncation t) { return t == Truncation::full_unroll ? "full_unroll" : "last_step"; }

Method parse_method(std::string_view s) {
  for (auto m : {Method::sgmd, Method::dmd2, Method::tsg_fisher, Method::tsg_sim, Method::sid}) {
    if (to_string(m) == s) return m;
  }
  throw std::invalid_argument("unknown method '" + std::string(s) + "' (expected sgmd, dmd2, tsg_fisher, tsg_sim, sid)");
}

Truncation parse_truncation(std::string_view s) {
  if (s == "full_unroll") return Truncation::full_unroll;
  if (s == "last_step") return Truncation::last_step;
  throw std::invalid_argument("unknown truncation '" + std::string(s) + "' (expected full_unroll, last_step)");
}

int default_fake_updates(Method m) { return (m == Method::dmd2 || m == Method::tsg_fisher) ? 5 : 1; }

ConfigError::ConfigError(std::vector<std::string> errs) : std::invalid_argument(join(errs)), errors(std::move(errs)) {}

int TrainerConfig::resolved_fake_updates() const {
  return fake_updates == 0 ? default_fake_updates(method) : fake_updates;
}

void TrainerConfig::validate() const {
  std::vector<std::string> errors;
  auto check = [&](bool ok, const char* field, const std::string& why) {
    if (!ok) errors.push_back(std::string(field) + ": " + why);
  };
  check(lambda > 0.0 && std::isfinite(lambda), "lambda", "must be positive");
  check(std::isfinite(sid_alpha), "sid_alpha", "must be finite");
  check(fake_updates >= 0, "fake_updates", "must be >= 1 (or 0 for auto)");
  const bool single_fake = method == Method::sgmd || method == Method::tsg_sim || method == Method::sid;
  check(!single_fake || fake_updates <= 1, "fake_updates",
        std::string("method ") + std::string(to_string(method)) + " performs exactly one fake-score update");
  check(eta_theta > 0.0, "eta_theta", "must be positive");
  check(eta_psi > 0.0, "eta_psi", "must be positive");
  check(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1", "must be in [0, 1)");
  check(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2", "must be in [0, 1)");
  check(batch_size > 0, "batch_size", "must be positive");
  check(t_min > 0.0 && t_min < 1.0, "t_min", "must be in (0, 1)");
  try {
    diffusion::validate_ladder(sampling_ladder, "sampling_ladder");
  } catch (const std::invalid_argument& e) {
    errors.push_back(std::string("sampling_ladder: ") + e.what());
  }
  check(!train_timesteps.empty(), "train_timesteps", "must not be empty");
  for (double t : train_timesteps) {
    check(t >= t_min && t < 1.0, "train_timesteps", "values must lie in [t_min, 1)");
  }
  try {
    target.validate();
  } catch (const std::invalid_argument& e) {
    errors.push_back(std::string("target: ") + e.what());
  }
  check(cfg_scale >= 0.0, "cfg_scale", "must be non-negative");
  for (auto k : conditional_components) {
    check(k < target.components(), "conditional_components", "index out of range");
  }
  check(surrogate_batch > 0, "surrogate_batch", "must be positive");
  check(surrogate_lr > 0.0, "surrogate_lr", "must be positive");
  check(metric_samples >= 2, "metric_samples", "must be at least 2");
  check(snapshot_samples >= 2, "snapshot_samples", "must be at least 2");
  if (!errors.empty()) throw ConfigError(std::move(errors));
}

teachers::AnalyticTeacher TrainerConfig::make_teacher() const {
  teachers::GuidanceConfig guidance;
  guidance.cfg_scale = cfg_scale;
  if (!conditional_components.empty()) {
    guidance.conditional = teachers::select_components(target, conditional_components);
  }
  return teachers::AnalyticTeacher(target, guidance);
}

}  // namespace dlab::trainers
