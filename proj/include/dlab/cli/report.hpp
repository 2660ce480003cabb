#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace dlab::cli {

struct Assertion {
  std::string name;
  nlohmann::json expected;
  nlohmann::json observed;
  double tolerance = 0.0;
  bool pass = false;
};

/// JSON summary written by every subcommand.
class Report {
 public:
  Report(std::string command, std::uint64_t seed) : command_(std::move(command)), seed_(seed) {}

  void add(Assertion a) { assertions_.push_back(std::move(a)); }
  /// pass = |observed - expected| <= tolerance
  void add_near(const std::string& name, double expected, double observed, double tolerance);
  /// pass = observed <= bound
  void add_at_most(const std::string& name, double bound, double observed, double slack = 0.0);
  void add_bool(const std::string& name, bool observed);
  void metric(const std::string& key, nlohmann::json value) { metrics_[key] = std::move(value); }

  [[nodiscard]] bool all_pass() const;
  [[nodiscard]] const std::vector<Assertion>& assertions() const { return assertions_; }
  [[nodiscard]] nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  std::uint64_t seed_;
  std::vector<Assertion> assertions_;
  nlohmann::json metrics_ = nlohmann::json::object();
};

}  // namespace dlab::cli
