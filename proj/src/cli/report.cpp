#include "dlab/cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dlab/cli/config.hpp"

namespace dlab::cli {

void Report::add_near(const std::string& name, double expected, double observed, double tolerance) {
  add({name, expected, observed, tolerance, std::abs(observed - expected) <= tolerance});
}

void Report::add_at_most(const std::string& name, double bound, double observed, double slack) {
  add({name, bound, observed, slack, observed <= bound + slack});
}

void Report::add_bool(const std::string& name, bool observed) { add({name, true, observed, 0.0, observed}); }

bool Report::all_pass() const {
  return std::all_of(assertions_.begin(), assertions_.end(), [](const Assertion& a) { return a.pass; });
}

nlohmann::json Report::to_json() const {
  nlohmann::json j;
  j["command"] = command_;
  j["version"] = kVersion;
  j["seed"] = seed_;
  auto& list = j["assertions"] = nlohmann::json::array();
  for (const auto& a : assertions_) {
    list.push_back({{"name", a.name},
                    {"expected", a.expected},
                    {"observed", a.observed},
                    {"tolerance", a.tolerance},
                    {"pass", a.pass}});
  }
  j["metrics"] = metrics_;
  j["all_pass"] = all_pass();
  return j;
}

void Report::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

}  // namespace dlab::cli
