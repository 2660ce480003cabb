#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <stdexcept>

#include "dlab/autodiff/adam.hpp"
#include "dlab/diffusion/predictor.hpp"
#include "dlab/objectives/losses.hpp"
#include "dlab/rng.hpp"
#include "dlab/trainers/checkpoint.hpp"
#include "dlab/trainers/config.hpp"
#include "dlab/trainers/log.hpp"

namespace dlab::trainers {

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t iteration, const std::string& what);
  std::size_t iteration;
};

/// Random draws of one generator step, exposed for hand-trace tests.
struct StepDraws {
  double t = 0.0;
  std::vector<double> z;
  std::vector<double> eps;
  std::optional<std::size_t> grad_step;  // set under last_step truncation
};

enum class Phase { generator_updated, fake_updated };
using PhaseHook = std::function<void(Phase)>;

/// MLP fitted to the analytic teacher's x-prediction on noised target samples
/// at every sampling and training timestep.
std::unique_ptr<diffusion::MlpPredictor> pretrain_surrogate(const TrainerConfig& config,
                                                            const teachers::AnalyticTeacher& teacher,
                                                            const std::vector<std::size_t>& hidden);

/// Generator G_theta, fake score mu_psi, their optimizers, and the frozen teacher.
///
/// Randomness for iteration i comes from RngStream(seed).split(i), so results
/// depend only on the seed and the iteration index.
class Trainer {
 public:
  /// Builds the teacher and initializes both networks from a pre-regressed surrogate.
  explicit Trainer(TrainerConfig config);
  /// Uses the supplied networks as initial G_theta and mu_psi.
  Trainer(TrainerConfig config, std::unique_ptr<diffusion::XPredictor> generator,
          std::unique_ptr<diffusion::XPredictor> fake);

  /// One iteration of the configured method.
  StepRecord step();

  // Individual update rules. Each advances the iteration counter by one.
  StepRecord sgmd_step();
  StepRecord dmd2_step(int fake_updates);
  StepRecord tsg_fisher_step(int fake_updates);
  StepRecord tsg_sim_step();
  StepRecord sid_step(double alpha);

  /// Draws the next iteration would use.
  [[nodiscard]] StepDraws peek_draws() const { return draws_for(iteration_); }

  /// n generator samples (full ladder, no gradient) from noise drawn from `rng`.
  [[nodiscard]] std::vector<double> sample(std::size_t n, RngStream& rng) const;

  [[nodiscard]] const TrainerConfig& config() const { return config_; }
  [[nodiscard]] const teachers::AnalyticTeacher& teacher() const { return teacher_; }
  [[nodiscard]] const diffusion::XPredictor& generator() const { return *generator_; }
  [[nodiscard]] const diffusion::XPredictor& fake() const { return *fake_; }
  [[nodiscard]] const ad::Adam& generator_optimizer() const { return gen_opt_; }
  [[nodiscard]] const ad::Adam& fake_optimizer() const { return fake_opt_; }
  [[nodiscard]] std::size_t iteration() const { return iteration_; }

  /// Called after every optimizer step; used to audit parameter isolation.
  void set_phase_hook(PhaseHook hook) { hook_ = std::move(hook); }

  [[nodiscard]] Checkpoint checkpoint() const;
  /// Restores parameters, optimizer moments, and the iteration counter.
  void restore(const Checkpoint& ckpt);

 private:
  [[nodiscard]] StepDraws draws_for(std::size_t iteration) const;
  [[nodiscard]] ad::Value generate(const StepDraws& draws) const;
  [[nodiscard]] objectives::ScorePair pair_for(const ad::Value& x0, double t, std::span<const double> eps) const;
  void update_generator(const ad::Value& loss);
  /// K regression updates of mu_psi on sg[x0] with fresh (t, eps); returns the mean loss.
  double fake_regression_updates(const ad::Value& x0, int count);
  StepRecord finish(StepRecord record, const objectives::ScorePair& pair, std::size_t backward_before);
  void require_finite(double v, const char* what) const;
  void step_optimizer(ad::Adam& opt, Phase phase);

  TrainerConfig config_;
  teachers::AnalyticTeacher teacher_;
  std::unique_ptr<diffusion::XPredictor> generator_;
  std::unique_ptr<diffusion::XPredictor> fake_;
  ad::Adam gen_opt_;
  ad::Adam fake_opt_;
  RngStream base_rng_;
  std::size_t iteration_ = 0;
  PhaseHook hook_;
};

}  // namespace dlab::trainers
