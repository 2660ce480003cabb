#include <deque>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dlab/cli/commands.hpp"

namespace {

struct Override {
  CLI::Option* option;
  std::string section;
  std::string key;
  std::string value;
};

// Flags are kept as strings and go through the same setter as config files.
class Overrides {
 public:
  void add(CLI::App* app, const std::string& flag, const std::string& section, const std::string& key,
           const std::string& help) {
    auto& o = items_.emplace_back(Override{nullptr, section, key, {}});
    o.option = app->add_option(flag, o.value, help);
  }
  // only the selected subcommand's options can have been seen
  void apply(dlab::cli::RunConfig& cfg) const {
    for (const auto& o : items_) {
      if (o.option->count() > 0) dlab::cli::set_value(cfg, o.section, o.key, o.value);
    }
  }

 private:
  std::deque<Override> items_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distillation lab: score-distillation trainers and analysis checks"};
  app.require_subcommand(1);
  std::string config_path;
  bool strict = false;
  std::vector<std::string> sets;
  Overrides overrides;
  app.add_option("-c,--config", config_path, "config file ([section] key = value)")->check(CLI::ExistingFile);
  overrides.add(&app, "--seed", "global", "seed", "random seed (falls back to DISTILL_LAB_SEED, then 0)");
  overrides.add(&app, "-o,--output-dir", "global", "output_dir", "directory for every output file");
  overrides.add(&app, "--log-every", "global", "log_every", "progress print interval (iterations)");
  app.add_flag("--strict", strict, "exit 1 when any report assertion fails");
  app.add_option("--set", sets, "override any key: section.key=value (repeatable)");

  auto* distill = app.add_subcommand("distill", "train a one-step generator against the analytic teacher");
  overrides.add(distill, "--method", "trainer", "method", "sgmd | dmd2 | tsg_fisher | tsg_sim | sid");
  overrides.add(distill, "--lambda", "trainer", "lambda", "residual weight");
  overrides.add(distill, "--sid-alpha", "trainer", "sid_alpha", "SiD alpha");
  overrides.add(distill, "--fake-updates,-K", "trainer", "fake_updates", "fake-score updates per iteration (0 = auto)");
  overrides.add(distill, "--iters", "trainer", "iterations", "training iterations");
  overrides.add(distill, "--batch", "trainer", "batch_size", "batch size");
  overrides.add(distill, "--truncation", "trainer", "truncation", "full_unroll | last_step");

  auto* toy = app.add_subcommand("toy1d", "fit a symmetric pair to the 1D target by reverse KL or Fisher");
  overrides.add(toy, "--objective", "toy1d", "objective", "reverse_kl | fisher");
  overrides.add(toy, "--steps", "toy1d", "steps", "Adam steps");
  overrides.add(toy, "--lr", "toy1d", "lr", "learning rate");
  bool compare = false;
  toy->add_flag("--compare", compare, "fit both objectives and compare them");

  auto* rec = app.add_subcommand("recursion", "residual recursion, closed-form bounds and lambda sweep");
  overrides.add(rec, "--lambda", "recursion", "lambda", "residual weight");
  overrides.add(rec, "--eta-theta", "recursion", "eta_theta", "generator step size");
  overrides.add(rec, "--eta-psi", "recursion", "eta_psi", "fake-score step size");
  overrides.add(rec, "--steps", "recursion", "steps", "simulation steps");
  overrides.add(rec, "--drive", "recursion", "drive", "zero | constant | random");
  overrides.add(rec, "--draws", "recursion", "draws", "random parameter draws");
  std::string sweep;
  rec->add_option("--lambda-sweep", sweep, "lo:hi:n log-spaced sweep");

  auto* id = app.add_subcommand("identity", "SIM / SiD gradient identities");
  overrides.add(id, "--tuples", "identity", "tuples", "random tuples");

  auto* cost = app.add_subcommand("cost", "per-iteration wall-clock model");
  overrides.add(cost, "--t-fwd", "cost", "t_fwd", "seconds per forward evaluation");
  overrides.add(cost, "--t-short", "cost", "t_short_bwd", "seconds per short backward");
  overrides.add(cost, "--t-long", "cost", "t_long_bwd", "seconds per long backward");
  overrides.add(cost, "-K", "cost", "K", "baseline fake-score updates");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference checks of every objective");
  overrides.add(grad, "--points", "gradcheck", "points", "random points per loss");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  const CLI::App* sub = app.get_subcommands().front();

  try {
    dlab::cli::RunConfig cfg = config_path.empty() ? dlab::cli::RunConfig{} : dlab::cli::load_config(config_path);
    overrides.apply(cfg);
    if (compare) cfg.toy1d_compare = true;
    if (!sweep.empty()) {
      const auto a = sweep.find(':'), b = sweep.rfind(':');
      if (a == std::string::npos || a == b) throw std::invalid_argument("--lambda-sweep expects lo:hi:n");
      dlab::cli::set_value(cfg, "recursion", "sweep_lo", sweep.substr(0, a));
      dlab::cli::set_value(cfg, "recursion", "sweep_hi", sweep.substr(a + 1, b - a - 1));
      dlab::cli::set_value(cfg, "recursion", "sweep_points", sweep.substr(b + 1));
    }
    for (const auto& s : sets) {
      const auto dot = s.find('.'), eq = s.find('=');
      if (dot == std::string::npos || eq == std::string::npos || dot > eq) {
        throw std::invalid_argument("--set expects section.key=value, got '" + s + "'");
      }
      dlab::cli::set_value(cfg, s.substr(0, dot), s.substr(dot + 1, eq - dot - 1), s.substr(eq + 1));
    }
    dlab::cli::resolve(cfg);
    const auto report = dlab::cli::run_command(sub->get_name(), cfg, std::cout);
    return strict && !report.all_pass() ? 1 : 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
