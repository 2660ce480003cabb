#include "dlab/cli/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "dlab/analysis/gradient_suite.hpp"
#include "dlab/trainers/train.hpp"

namespace dlab::cli {
namespace fs = std::filesystem;
namespace {

fs::path prepare(const RunConfig& cfg) {
  const fs::path dir(cfg.global.output_dir);
  fs::create_directories(dir);
  save_resolved(cfg, dir / "config.ini");
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

Report finish(Report report, const fs::path& dir, std::ostream& out) {
  report.write(dir / "report.json");
  std::size_t passed = 0;
  for (const auto& a : report.assertions()) passed += a.pass ? 1 : 0;
  fmt::print(out, "{}/{} assertions passed; report at {}\n", passed, report.assertions().size(),
             (dir / "report.json").string());
  return report;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"distill", "toy1d", "recursion", "identity", "cost", "gradcheck"};
  return names;
}

Report cmd_distill(const RunConfig& cfg, std::ostream& out) {
  const auto dir = prepare(cfg);
  Report report("distill", cfg.seed());
  const auto& tc = cfg.trainer;
  report.metric("method", std::string(to_string(tc.method)));
  report.metric("iterations", tc.iterations);
  try {
    const auto result = trainers::train(tc, dir, [&](const trainers::StepRecord& r) {
      if (r.iteration % cfg.global.log_every == 0 || r.iteration + 1 == tc.iterations) {
        fmt::print(out, "iter {:>6}  t={:.3f}  gen={:.6g}  fake={:.6g}  |r|={:.4g}\n", r.iteration, r.t,
                   r.generator_loss, r.fake_loss, r.r_norm_mean);
      }
    });
    bool finite = true;
    double passes = 0.0;
    for (const auto& r : result.log.rows()) {
      finite = finite && std::isfinite(r.generator_loss) && std::isfinite(r.fake_loss) && std::isfinite(r.fisher_loss);
      passes += static_cast<double>(r.backward_passes);
    }
    report.add_bool("training_completed", true);
    report.add_near("logged_iterations", static_cast<double>(tc.iterations), static_cast<double>(result.log.size()), 0.0);
    report.add_bool("losses_finite", finite);
    report.add_bool("energy_distance_finite", std::isfinite(result.final_energy_distance));
    report.metric("final_energy_distance", result.final_energy_distance);
    report.metric("backward_passes_per_iteration", result.log.empty() ? 0.0 : passes / result.log.size());
    report.metric("checkpoints", result.checkpoint_files.size());
    fmt::print(out, "final energy distance {:.6g}\n", result.final_energy_distance);
  } catch (const trainers::TrainingDiverged& e) {
    report.add_bool("training_completed", false);
    report.metric("diverged", e.what());
    fmt::print(out, "{}\n", e.what());
  }
  return finish(std::move(report), dir, out);
}

Report cmd_toy1d(const RunConfig& cfg, std::ostream& out) {
  const auto dir = prepare(cfg);
  Report report("toy1d", cfg.seed());
  auto name = [](analysis::ToyObjective o) { return o == analysis::ToyObjective::fisher ? "fisher" : "reverse_kl"; };
  auto run = [&](analysis::ToyObjective objective) {
    auto opts = cfg.toy1d;
    opts.objective = objective;
    auto r = analysis::toy_fit(opts);
    std::string csv = "step,m,s,objective\n";
    for (const auto& p : r.trajectory) csv += fmt::format("{},{},{},{}\n", p.step, p.m, p.s, p.objective);
    write_text(dir / fmt::format("toy1d_{}.csv", name(objective)), csv);
    const auto& init = r.trajectory.front();
    report.metric(name(objective), {{"m", r.fitted.m},
                                    {"s", r.fitted.s},
                                    {"reverse_kl", r.reverse_kl},
                                    {"fisher", r.fisher},
                                    {"initial_objective", init.objective},
                                    {"steps", opts.steps},
                                    {"scale_floor_hit", r.scale_floor_hit}});
    report.add_at_most(fmt::format("{}_not_above_initialization", name(objective)), init.objective,
                       r.trajectory.back().objective, 1e-12);
    report.add_bool(fmt::format("{}_scale_above_floor", name(objective)), !r.scale_floor_hit);
    fmt::print(out, "{:<10}  m={:.6f}  s={:.6f}  KL={:.6f}  Fisher={:.6f}\n", name(objective), r.fitted.m, r.fitted.s,
               r.reverse_kl, r.fisher);
    return r;
  };
  const auto main = run(cfg.toy1d.objective);
  if (cfg.toy1d_compare) {
    const auto other_objective = cfg.toy1d.objective == analysis::ToyObjective::fisher
                                     ? analysis::ToyObjective::reverse_kl
                                     : analysis::ToyObjective::fisher;
    const auto other = run(other_objective);
    const auto& kl_run = cfg.toy1d.objective == analysis::ToyObjective::reverse_kl ? main : other;
    const auto& fisher_run = cfg.toy1d.objective == analysis::ToyObjective::fisher ? main : other;
    // strict inequality: tolerance 0 on the bound with the smaller value expected
    report.add({"reverse_kl_fit_wins_on_kl", fisher_run.reverse_kl, kl_run.reverse_kl, 0.0,
                kl_run.reverse_kl < fisher_run.reverse_kl});
    report.add({"fisher_fit_wins_on_fisher", kl_run.fisher, fisher_run.fisher, 0.0, fisher_run.fisher < kl_run.fisher});
  }
  return finish(std::move(report), dir, out);
}

Report cmd_recursion(const RunConfig& cfg, std::ostream& out) {
  const auto dir = prepare(cfg);
  Report report("recursion", cfg.seed());
  const auto& rc = cfg.recursion;
  const auto b = analysis::bounds(rc.params);

  const auto traj = analysis::residual_recursion(rc.params, rc.steps);
  std::string csv = "k,r_norm,drive_norm\n";
  for (std::size_t k = 0; k < traj.r_norm.size(); ++k) {
    csv += fmt::format("{},{},{}\n", k, traj.r_norm[k], k < traj.drive_norm.size() ? fmt::format("{}", traj.drive_norm[k]) : "");
  }
  write_text(dir / "recursion_trajectory.csv", csv);

  const auto check = analysis::verify_bounds(rc.params, rc.steps, rc.burn_in);
  report.add_at_most("residual_within_steady_state_bound", check.steady_bound, check.max_residual, analysis::kBoundSlack);
  report.add_at_most("drive_within_staleness_bound", check.staleness_bound, check.max_drive, analysis::kBoundSlack);

  auto zero = rc.params;
  zero.drive = analysis::DriveKind::zero;
  const auto decay = analysis::residual_recursion(zero, std::min<std::size_t>(rc.steps, 200));
  double worst = 0.0;
  const double keep = 1.0 - zero.contraction();
  for (std::size_t k = 0; k < decay.r.size(); ++k) {
    for (std::size_t i = 0; i < zero.dim(); ++i) {
      const double expect = std::pow(keep, static_cast<double>(k)) * zero.r0[i];
      worst = std::max(worst, std::abs(decay.r[k][i] - expect) / std::max(std::abs(zero.r0[i]), 1e-300));
    }
  }
  report.add_near("zero_drive_geometric_decay", 0.0, worst, 1e-12);

  const auto suite = analysis::verify_bounds_random(cfg.seed(), rc.draws, rc.steps, rc.burn_in);
  std::size_t failures = 0;
  nlohmann::json counterexamples = nlohmann::json::array();
  for (const auto& d : suite.draws) {
    if (!d.pass) {
      ++failures;
      counterexamples.push_back(d.counterexample);
    }
  }
  report.add_near("random_draws_within_bounds", 0.0, static_cast<double>(failures), 0.0);

  const auto rows = analysis::lambda_sweep(rc.params, rc.sweep_lo, rc.sweep_hi, rc.sweep_points);
  std::string sweep = "lambda,steady_state,staleness,error_proxy\n";
  for (const auto& r : rows) {
    sweep += fmt::format("{},{},{},{}\n", r.lambda, r.b.steady_state, r.b.staleness, r.b.error_proxy);
  }
  write_text(dir / "lambda_sweep.csv", sweep);
  const auto minima = analysis::local_minima(rows);
  report.add_near("error_proxy_interior_minima", 1.0, static_cast<double>(minima.size()), 0.0);

  report.metric("steady_state", b.steady_state);
  report.metric("staleness", b.staleness);
  report.metric("error_proxy", b.error_proxy);
  report.metric("lambda_star", b.lambda_star);
  report.metric("sweep_argmin_lambda", minima.empty() ? nlohmann::json(nullptr) : nlohmann::json(rows[minima[0]].lambda));
  report.metric("random_draws", suite.draws.size());
  report.metric("counterexamples", counterexamples);
  fmt::print(out, "steady-state bound {:.6g}, staleness {:.6g}, max |r| after burn-in {:.6g}\n", b.steady_state,
             b.staleness, check.max_residual);
  fmt::print(out, "lambda* = {:.6g}; sweep minimum at {}\n", b.lambda_star,
             minima.empty() ? std::string("none") : fmt::format("{:.6g}", rows[minima[0]].lambda));
  return finish(std::move(report), dir, out);
}

Report cmd_identity(const RunConfig& cfg, std::ostream& out) {
  const auto dir = prepare(cfg);
  Report report("identity", cfg.seed());
  const auto r = analysis::identity_suite(cfg.identity);
  std::string csv = "name,max_error,tolerance,pass\n";
  nlohmann::json offending = nlohmann::json::object();
  for (const auto& c : r.checks) {
    csv += fmt::format("{},{},{},{}\n", c.name, c.max_error, c.tolerance, c.pass);
    report.add_at_most(c.name, c.tolerance, c.max_error);
    if (!c.worst_tuple.empty()) offending[c.name] = c.worst_tuple;
    fmt::print(out, "{:<40} {:.3e}  {}\n", c.name, c.max_error, c.pass ? "ok" : "MISMATCH");
  }
  report.metric("tuples", cfg.identity.tuples);
  report.metric("offending_tuples", offending);
  write_text(dir / "identity_checks.csv", csv);
  return finish(std::move(report), dir, out);
}

Report cmd_cost(const RunConfig& cfg, std::ostream& out) {
  const auto dir = prepare(cfg);
  Report report("cost", cfg.seed());
  const auto r = analysis::cost_model(cfg.cost);
  std::string csv = "method,forwards,short_backwards,long_backwards,seconds\n";
  fmt::print(out, "{:<10}{:>10}{:>12}{:>11}{:>10}\n", "method", "forwards", "short_bwd", "long_bwd", "seconds");
  for (const auto& [name, m] : {std::pair{"sgmd", r.sgmd}, std::pair{"baseline", r.baseline}}) {
    csv += fmt::format("{},{},{},{},{}\n", name, m.forwards, m.short_backwards, m.long_backwards, m.seconds);
    fmt::print(out, "{:<10}{:>10}{:>12}{:>11}{:>10}\n", name, m.forwards, m.short_backwards, m.long_backwards,
               m.seconds);
  }
  fmt::print(out, "speedup {:.4g}x (K={})\n", r.speedup, cfg.cost.K);
  write_text(dir / "cost.csv", csv);
  report.add_near("sgmd_backward_passes", 2.0, r.sgmd.short_backwards + r.sgmd.long_backwards, 0.0);
  report.add_near("baseline_backward_passes", 1.0 + cfg.cost.K, r.baseline.short_backwards + r.baseline.long_backwards,
                  0.0);
  report.metric("sgmd_seconds", r.sgmd.seconds);
  report.metric("baseline_seconds", r.baseline.seconds);
  report.metric("sgmd_forwards", r.sgmd.forwards);
  report.metric("baseline_forwards", r.baseline.forwards);
  report.metric("speedup", r.speedup);
  return finish(std::move(report), dir, out);
}

Report cmd_gradcheck(const RunConfig& cfg, std::ostream& out) {
  const auto dir = prepare(cfg);
  Report report("gradcheck", cfg.seed());
  const auto r = analysis::gradient_oracle_suite(cfg.seed(), cfg.gradcheck.points);
  std::string csv = "check,points,max_error_x0,max_error_psi,tolerance,pass\n";
  for (const auto& c : r.losses) {
    csv += fmt::format("{},{},{},{},{},{}\n", c.loss, c.points, c.max_error_x0, c.max_error_psi, c.tolerance, c.pass);
    report.add_at_most(c.loss + "_x0", c.tolerance, c.max_error_x0);
    report.add_at_most(c.loss + "_psi", c.tolerance, c.max_error_psi);
    fmt::print(out, "{:<12} x0 {:.3e}  psi {:.3e}  {}\n", c.loss, c.max_error_x0, c.max_error_psi, c.pass ? "ok" : "FAIL");
  }
  for (const auto& n : r.nr_routes) {
    csv += fmt::format("nr_route_{},{},{},,{},{}\n", n.predictor, cfg.gradcheck.points, n.max_error, n.tolerance, n.pass);
    report.add_at_most("nr_route_" + n.predictor, n.tolerance, n.max_error);
    fmt::print(out, "nr route ({}) {:.3e}  {}\n", n.predictor, n.max_error, n.pass ? "ok" : "FAIL");
  }
  write_text(dir / "gradcheck.csv", csv);
  return finish(std::move(report), dir, out);
}

Report run_command(const std::string& name, const RunConfig& cfg, std::ostream& out) {
  if (name == "distill") return cmd_distill(cfg, out);
  if (name == "toy1d") return cmd_toy1d(cfg, out);
  if (name == "recursion") return cmd_recursion(cfg, out);
  if (name == "identity") return cmd_identity(cfg, out);
  if (name == "cost") return cmd_cost(cfg, out);
  if (name == "gradcheck") return cmd_gradcheck(cfg, out);
  throw std::invalid_argument("unknown command '" + name + "'");
}

}  // namespace dlab::cli
