#include "dlab/trainers/train.hpp"

#include <fmt/format.h>

#include "dlab/trainers/metrics.hpp"

namespace dlab::trainers {
namespace {

constexpr std::uint64_t kMetricGenerator = 0x3e7a1;
constexpr std::uint64_t kMetricTarget = 0x3e7a2;

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t iteration) {
  return dir / "checkpoints" / fmt::format("ckpt_{:06}.bin", iteration);
}

}  // namespace

double evaluate_energy_distance(const Trainer& trainer, std::size_t n) {
  RngStream base(trainer.config().seed);
  RngStream gen_rng = base.split(kMetricGenerator);
  RngStream target_rng = base.split(kMetricTarget);
  const auto generated = trainer.sample(n, gen_rng);
  const auto reference = teachers::sample(trainer.teacher().target(), n, target_rng);
  return energy_distance(generated, reference, trainer.teacher().dim());
}

TrainResult train(const TrainerConfig& config, const std::optional<std::filesystem::path>& output_dir,
                  const ProgressFn& progress) {
  Trainer trainer(config);
  TrainResult result;
  auto save = [&](bool force) {
    const auto it = trainer.iteration();
    const bool periodic = config.checkpoint_every > 0 && it % config.checkpoint_every == 0;
    if (!output_dir || !(force || periodic)) return;
    const auto path = checkpoint_path(*output_dir, it);
    if (!result.checkpoint_files.empty() && result.checkpoint_files.back() == path) return;
    write_checkpoint(path, trainer.checkpoint());
    result.checkpoint_files.push_back(path);
  };
  if (output_dir) std::filesystem::create_directories(*output_dir / "checkpoints");
  save(true);
  for (std::size_t i = 0; i < config.iterations; ++i) {
    auto record = trainer.step();
    if (config.snapshot_every > 0 && trainer.iteration() % config.snapshot_every == 0) {
      record.energy_distance = evaluate_energy_distance(trainer, config.snapshot_samples);
    }
    if (progress) progress(record);
    result.log.append(record);
    save(false);
  }
  save(true);
  result.final_energy_distance = evaluate_energy_distance(trainer, config.metric_samples);
  result.final_checkpoint = trainer.checkpoint();
  if (output_dir) result.log.write_csv(*output_dir / "train_log.csv");
  return result;
}

}  // namespace dlab::trainers
