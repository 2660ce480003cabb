#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dlab/diffusion/schedule.hpp"
#include "dlab/teachers/mixture.hpp"

namespace dlab::trainers {

enum class Method { sgmd, dmd2, tsg_fisher, tsg_sim, sid };
enum class Truncation { full_unroll, last_step };

std::string_view to_string(Method m);
std::string_view to_string(Truncation t);
Method parse_method(std::string_view s);
Truncation parse_truncation(std::string_view s);

/// Fake-score updates per iteration used when the config leaves K on auto.
int default_fake_updates(Method m);

/// Raised by TrainerConfig::validate; `errors` lists one "field: reason" entry per problem.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  std::vector<std::string> errors;
};

struct TrainerConfig {
  Method method = Method::sgmd;
  double lambda = 0.1;
  double sid_alpha = 1.0;
  int fake_updates = 0;  // 0 = auto (5 for dmd2 / tsg_fisher, 1 otherwise)
  bool dmd_normalize = false;
  double eta_theta = 1e-3;
  double eta_psi = 1e-3;
  double adam_beta1 = 0.0;
  double adam_beta2 = 0.999;
  std::size_t batch_size = 32;
  std::size_t iterations = 2000;
  std::vector<double> sampling_ladder = diffusion::default_sampling_ladder();
  std::vector<double> train_timesteps = diffusion::default_train_timesteps();
  double t_min = diffusion::kDefaultTMin;
  Truncation truncation = Truncation::full_unroll;
  std::uint64_t seed = 0;
  teachers::MixtureDensity target = teachers::default_2d_target();
  double cfg_scale = 0.0;
  std::vector<std::size_t> conditional_components;  // empty = unconditional teacher
  std::vector<std::size_t> generator_hidden{32, 32};
  std::vector<std::size_t> fake_hidden{32, 32};
  std::size_t surrogate_steps = 600;
  std::size_t surrogate_batch = 256;
  double surrogate_lr = 5e-3;
  std::size_t metric_samples = 10000;
  std::size_t snapshot_every = 0;  // 0 = no in-training energy-distance snapshots
  std::size_t snapshot_samples = 2000;
  std::size_t checkpoint_every = 0;  // 0 = initial and final checkpoints only

  /// Resolved K.
  [[nodiscard]] int resolved_fake_updates() const;
  /// Throws ConfigError listing every invalid field.
  void validate() const;
  [[nodiscard]] teachers::AnalyticTeacher make_teacher() const;
};

}  // namespace dlab::trainers
