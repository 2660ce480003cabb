#include "dlab/trainers/log.hpp"

#include <fmt/format.h>

#include <fstream>
#include <stdexcept>

namespace dlab::trainers {

void TrainLog::append(StepRecord record) {
  if (!rows_.empty() && record.iteration <= rows_.back().iteration) {
    throw std::logic_error("TrainLog: iterations must increase");
  }
  rows_.push_back(record);
}

std::string TrainLog::csv_row(const StepRecord& r) {
  std::string ed = r.energy_distance ? fmt::format("{}", *r.energy_distance) : std::string();
  return fmt::format("{},{},{},{},{},{},{},{},{}", r.iteration, r.t, r.generator_loss, r.fake_loss, r.fisher_loss,
                     r.r_norm_mean, r.delta_norm_mean, r.backward_passes, ed);
}

std::string TrainLog::to_csv() const {
  std::string out = std::string(kHeader) + "\n";
  for (const auto& r : rows_) out += csv_row(r) + "\n";
  return out;
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << to_csv();
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace dlab::trainers
