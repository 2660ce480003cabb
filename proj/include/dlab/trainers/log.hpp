#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dlab::trainers {

/// One iteration's logged quantities.
struct StepRecord {
  std::size_t iteration = 0;
  double t = 0.0;                 // generator-step timestep
  double generator_loss = 0.0;    // objective whose gradient drove the generator
  double fake_loss = 0.0;         // mean fake-score loss over this iteration's fake updates
  double fisher_loss = 0.0;       // 1/2 c ||delta||^2 on the generator pair, for every method
  double r_norm_mean = 0.0;       // batch mean of ||sg[x0] - x_fake||
  double delta_norm_mean = 0.0;   // batch mean of ||x_fake - x_real||
  std::size_t backward_passes = 0;
  std::optional<double> energy_distance;
};

/// Append-only per-iteration log.
class TrainLog {
 public:
  static constexpr const char* kHeader =
      "iteration,t,generator_loss,fake_loss,fisher_loss,r_norm_mean,delta_norm_mean,backward_passes,energy_distance";

  void append(StepRecord record);
  [[nodiscard]] const std::vector<StepRecord>& rows() const { return rows_; }
  [[nodiscard]] std::size_t size() const { return rows_.size(); }
  [[nodiscard]] bool empty() const { return rows_.empty(); }

  /// Header plus one line per row. Doubles use the shortest round-trip form.
  [[nodiscard]] std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
  static std::string csv_row(const StepRecord& r);

 private:
  std::vector<StepRecord> rows_;
};

}  // namespace dlab::trainers
