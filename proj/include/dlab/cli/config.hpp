#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlab/analysis/cost.hpp"
#include "dlab/analysis/identities.hpp"
#include "dlab/analysis/recursion.hpp"
#include "dlab/analysis/toy1d.hpp"
#include "dlab/trainers/config.hpp"

namespace dlab::cli {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kSeedEnv = "DISTILL_LAB_SEED";

struct GlobalSection {
  std::optional<std::uint64_t> seed;  // unset: DISTILL_LAB_SEED, then 0
  std::string output_dir = "out";
  std::size_t log_every = 100;
};

struct RecursionSection {
  analysis::RecursionParams params;
  std::size_t steps = 10000;
  std::size_t burn_in = 1000;
  std::size_t draws = 100;
  double sweep_lo = 0.01;
  double sweep_hi = 1.0;
  std::size_t sweep_points = 50;
};

struct GradcheckSection {
  std::size_t points = 20;
};

struct RunConfig {
  GlobalSection global;
  trainers::TrainerConfig trainer;
  analysis::ToyFitOptions toy1d;
  bool toy1d_compare = false;  // also fit the other objective and compare
  RecursionSection recursion;
  analysis::IdentityOptions identity;
  analysis::CostModel cost;
  GradcheckSection gradcheck;

  /// Seed after the flag / file / environment fallback.
  [[nodiscard]] std::uint64_t seed() const { return global.seed.value_or(0); }
};

/// Parse or value error; `line` is 0 for errors not tied to a file line.
class ConfigParseError : public std::runtime_error {
 public:
  ConfigParseError(std::size_t line, const std::string& message);
  std::size_t line;
};

/// Applies one `section.key = value` assignment. Throws ConfigParseError (line 0)
/// for unknown keys or unparsable values.
void set_value(RunConfig& cfg, const std::string& section, const std::string& key, const std::string& value,
               std::size_t line = 0);

/// Parses `[section]` headers and `key = value` lines onto `cfg`. Blank lines and
/// lines starting with '#' or ';' are ignored. Unknown sections and keys are errors.
void parse_config(RunConfig& cfg, const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Fills the seed from DISTILL_LAB_SEED (or 0) when unset, propagates it into
/// every section, and validates. Idempotent.
void resolve(RunConfig& cfg);

/// Every key with its current value, sections in fixed order.
std::string to_text(const RunConfig& cfg);
void save_resolved(const RunConfig& cfg, const std::filesystem::path& path);

}  // namespace dlab::cli
