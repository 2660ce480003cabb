#pragma once

#include <filesystem>
#include <functional>
#include <optional>

#include "dlab/trainers/trainer.hpp"

namespace dlab::trainers {

struct TrainResult {
  TrainLog log;
  double final_energy_distance = 0.0;
  Checkpoint final_checkpoint;
  std::vector<std::filesystem::path> checkpoint_files;
};

using ProgressFn = std::function<void(const StepRecord&)>;

/// Energy distance between n generator samples and n target samples, using
/// fixed metric streams derived from the config seed.
double evaluate_energy_distance(const Trainer& trainer, std::size_t n);

/// Runs config.iterations steps of the configured method.
///
/// With an output directory, writes train_log.csv and checkpoints
/// checkpoints/ckpt_<iteration>.bin (initial, every checkpoint_every, final).
TrainResult train(const TrainerConfig& config, const std::optional<std::filesystem::path>& output_dir = std::nullopt,
                  const ProgressFn& progress = {});

}  // namespace dlab::trainers
