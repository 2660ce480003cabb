#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "dlab/cli/config.hpp"
#include "dlab/cli/report.hpp"

namespace dlab::cli {

/// Subcommand names in display order.
const std::vector<std::string>& command_names();

// Each command writes config.ini, report.json and its CSVs under
// cfg.global.output_dir and nowhere else. `out` receives human-readable text.
Report cmd_distill(const RunConfig& cfg, std::ostream& out);
Report cmd_toy1d(const RunConfig& cfg, std::ostream& out);
Report cmd_recursion(const RunConfig& cfg, std::ostream& out);
Report cmd_identity(const RunConfig& cfg, std::ostream& out);
Report cmd_cost(const RunConfig& cfg, std::ostream& out);
Report cmd_gradcheck(const RunConfig& cfg, std::ostream& out);

/// Dispatches by name; throws std::invalid_argument for an unknown command.
Report run_command(const std::string& name, const RunConfig& cfg, std::ostream& out);

}  // namespace dlab::cli
