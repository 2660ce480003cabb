#include "dlab/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace dlab::cli {
namespace {

using Getter = std::function<std::string(const RunConfig&)>;
using Setter = std::function<void(RunConfig&, const std::string&)>;

struct Field {
  std::string section;
  std::string key;
  Getter get;
  Setter set;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("expected a number, got '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

int parse_int(const std::string& s) {
  int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("expected an integer, got '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& s, Parse parse) {
  std::vector<T> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse(trim(item)));
  return out;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

template <typename T>
std::string fmt_list(const std::vector<T>& v) {
  return fmt::format("{}", fmt::join(v, ", "));
}

// Member-pointer helpers; `Sec` is a pointer-to-member giving the section struct.
template <typename S, typename T>
Field number(std::string section, std::string key, S RunConfig::*sec, T S::*member) {
  Getter get = [=](const RunConfig& c) { return fmt::format("{}", c.*sec.*member); };
  Setter set = [=](RunConfig& c, const std::string& v) {
    if constexpr (std::is_same_v<T, double>) {
      c.*sec.*member = parse_double(v);
    } else if constexpr (std::is_same_v<T, int>) {
      c.*sec.*member = parse_int(v);
    } else {
      c.*sec.*member = static_cast<T>(parse_u64(v));
    }
  };
  return {std::move(section), std::move(key), get, set};
}

std::vector<Field> build_schema() {
  using trainers::TrainerConfig;
  std::vector<Field> f;
  f.push_back({"global", "seed", [](const RunConfig& c) { return fmt::format("{}", c.seed()); },
               [](RunConfig& c, const std::string& v) { c.global.seed = parse_u64(v); }});
  f.push_back({"global", "output_dir", [](const RunConfig& c) { return c.global.output_dir; },
               [](RunConfig& c, const std::string& v) {
                 if (v.empty()) throw std::invalid_argument("output_dir must not be empty");
                 c.global.output_dir = v;
               }});
  f.push_back(number("global", "log_every", &RunConfig::global, &GlobalSection::log_every));

  const auto tr = &RunConfig::trainer;
  f.push_back({"trainer", "method", [](const RunConfig& c) { return std::string(to_string(c.trainer.method)); },
               [](RunConfig& c, const std::string& v) { c.trainer.method = trainers::parse_method(v); }});
  f.push_back(number("trainer", "lambda", tr, &TrainerConfig::lambda));
  f.push_back(number("trainer", "sid_alpha", tr, &TrainerConfig::sid_alpha));
  f.push_back(number("trainer", "fake_updates", tr, &TrainerConfig::fake_updates));
  f.push_back({"trainer", "dmd_normalize", [](const RunConfig& c) { return fmt_bool(c.trainer.dmd_normalize); },
               [](RunConfig& c, const std::string& v) { c.trainer.dmd_normalize = parse_bool(v); }});
  f.push_back(number("trainer", "eta_theta", tr, &TrainerConfig::eta_theta));
  f.push_back(number("trainer", "eta_psi", tr, &TrainerConfig::eta_psi));
  f.push_back(number("trainer", "adam_beta1", tr, &TrainerConfig::adam_beta1));
  f.push_back(number("trainer", "adam_beta2", tr, &TrainerConfig::adam_beta2));
  f.push_back(number("trainer", "batch_size", tr, &TrainerConfig::batch_size));
  f.push_back(number("trainer", "iterations", tr, &TrainerConfig::iterations));
  f.push_back({"trainer", "sampling_ladder", [](const RunConfig& c) { return fmt_list(c.trainer.sampling_ladder); },
               [](RunConfig& c, const std::string& v) { c.trainer.sampling_ladder = parse_list<double>(v, parse_double); }});
  f.push_back({"trainer", "train_timesteps", [](const RunConfig& c) { return fmt_list(c.trainer.train_timesteps); },
               [](RunConfig& c, const std::string& v) { c.trainer.train_timesteps = parse_list<double>(v, parse_double); }});
  f.push_back(number("trainer", "t_min", tr, &TrainerConfig::t_min));
  f.push_back({"trainer", "truncation", [](const RunConfig& c) { return std::string(to_string(c.trainer.truncation)); },
               [](RunConfig& c, const std::string& v) { c.trainer.truncation = trainers::parse_truncation(v); }});
  f.push_back({"trainer", "target_dim", [](const RunConfig& c) { return fmt::format("{}", c.trainer.target.dim); },
               [](RunConfig& c, const std::string& v) { c.trainer.target.dim = parse_u64(v); }});
  f.push_back({"trainer", "target_weights", [](const RunConfig& c) { return fmt_list(c.trainer.target.weights); },
               [](RunConfig& c, const std::string& v) { c.trainer.target.weights = parse_list<double>(v, parse_double); }});
  f.push_back({"trainer", "target_means", [](const RunConfig& c) { return fmt_list(c.trainer.target.means); },
               [](RunConfig& c, const std::string& v) { c.trainer.target.means = parse_list<double>(v, parse_double); }});
  f.push_back({"trainer", "target_stds", [](const RunConfig& c) { return fmt_list(c.trainer.target.stds); },
               [](RunConfig& c, const std::string& v) { c.trainer.target.stds = parse_list<double>(v, parse_double); }});
  f.push_back(number("trainer", "cfg_scale", tr, &TrainerConfig::cfg_scale));
  f.push_back({"trainer", "conditional_components",
               [](const RunConfig& c) { return fmt_list(c.trainer.conditional_components); },
               [](RunConfig& c, const std::string& v) {
                 c.trainer.conditional_components = parse_list<std::size_t>(v, parse_u64);
               }});
  f.push_back({"trainer", "generator_hidden", [](const RunConfig& c) { return fmt_list(c.trainer.generator_hidden); },
               [](RunConfig& c, const std::string& v) { c.trainer.generator_hidden = parse_list<std::size_t>(v, parse_u64); }});
  f.push_back({"trainer", "fake_hidden", [](const RunConfig& c) { return fmt_list(c.trainer.fake_hidden); },
               [](RunConfig& c, const std::string& v) { c.trainer.fake_hidden = parse_list<std::size_t>(v, parse_u64); }});
  f.push_back(number("trainer", "surrogate_steps", tr, &TrainerConfig::surrogate_steps));
  f.push_back(number("trainer", "surrogate_batch", tr, &TrainerConfig::surrogate_batch));
  f.push_back(number("trainer", "surrogate_lr", tr, &TrainerConfig::surrogate_lr));
  f.push_back(number("trainer", "metric_samples", tr, &TrainerConfig::metric_samples));
  f.push_back(number("trainer", "snapshot_every", tr, &TrainerConfig::snapshot_every));
  f.push_back(number("trainer", "snapshot_samples", tr, &TrainerConfig::snapshot_samples));
  f.push_back(number("trainer", "checkpoint_every", tr, &TrainerConfig::checkpoint_every));

  using analysis::ToyFitOptions;
  const auto toy = &RunConfig::toy1d;
  f.push_back({"toy1d", "objective",
               [](const RunConfig& c) {
                 return std::string(c.toy1d.objective == analysis::ToyObjective::fisher ? "fisher" : "reverse_kl");
               },
               [](RunConfig& c, const std::string& v) {
                 if (v == "fisher") {
                   c.toy1d.objective = analysis::ToyObjective::fisher;
                 } else if (v == "reverse_kl") {
                   c.toy1d.objective = analysis::ToyObjective::reverse_kl;
                 } else {
                   throw std::invalid_argument("unknown objective '" + v + "' (expected reverse_kl, fisher)");
                 }
               }});
  f.push_back({"toy1d", "compare", [](const RunConfig& c) { return fmt_bool(c.toy1d_compare); },
               [](RunConfig& c, const std::string& v) { c.toy1d_compare = parse_bool(v); }});
  f.push_back(number("toy1d", "steps", toy, &ToyFitOptions::steps));
  f.push_back(number("toy1d", "lr", toy, &ToyFitOptions::lr));
  f.push_back(number("toy1d", "beta1", toy, &ToyFitOptions::beta1));
  f.push_back(number("toy1d", "beta2", toy, &ToyFitOptions::beta2));
  f.push_back({"toy1d", "init_m", [](const RunConfig& c) { return fmt::format("{}", c.toy1d.init.m); },
               [](RunConfig& c, const std::string& v) { c.toy1d.init.m = parse_double(v); }});
  f.push_back({"toy1d", "init_s", [](const RunConfig& c) { return fmt::format("{}", c.toy1d.init.s); },
               [](RunConfig& c, const std::string& v) { c.toy1d.init.s = parse_double(v); }});
  f.push_back({"toy1d", "grid_lo", [](const RunConfig& c) { return fmt::format("{}", c.toy1d.grid.lo); },
               [](RunConfig& c, const std::string& v) { c.toy1d.grid.lo = parse_double(v); }});
  f.push_back({"toy1d", "grid_hi", [](const RunConfig& c) { return fmt::format("{}", c.toy1d.grid.hi); },
               [](RunConfig& c, const std::string& v) { c.toy1d.grid.hi = parse_double(v); }});
  f.push_back({"toy1d", "grid_points", [](const RunConfig& c) { return fmt::format("{}", c.toy1d.grid.points); },
               [](RunConfig& c, const std::string& v) { c.toy1d.grid.points = parse_u64(v); }});

  using analysis::RecursionParams;
  auto rp = [](std::string key, double RecursionParams::*m) {
    return Field{"recursion", key, [=](const RunConfig& c) { return fmt::format("{}", c.recursion.params.*m); },
                 [=](RunConfig& c, const std::string& v) { c.recursion.params.*m = parse_double(v); }};
  };
  const auto rec = &RunConfig::recursion;
  f.push_back(rp("eta_theta", &RecursionParams::eta_theta));
  f.push_back(rp("eta_psi", &RecursionParams::eta_psi));
  f.push_back(rp("lambda", &RecursionParams::lambda));
  f.push_back(rp("A", &RecursionParams::A));
  f.push_back(rp("B", &RecursionParams::B));
  f.push_back({"recursion", "r0", [](const RunConfig& c) { return fmt_list(c.recursion.params.r0); },
               [](RunConfig& c, const std::string& v) { c.recursion.params.r0 = parse_list<double>(v, parse_double); }});
  f.push_back({"recursion", "drive", [](const RunConfig& c) { return std::string(to_string(c.recursion.params.drive)); },
               [](RunConfig& c, const std::string& v) { c.recursion.params.drive = analysis::parse_drive(v); }});
  f.push_back({"recursion", "drive_constant", [](const RunConfig& c) { return fmt_list(c.recursion.params.drive_constant); },
               [](RunConfig& c, const std::string& v) {
                 c.recursion.params.drive_constant = parse_list<double>(v, parse_double);
               }});
  f.push_back(number("recursion", "steps", rec, &RecursionSection::steps));
  f.push_back(number("recursion", "burn_in", rec, &RecursionSection::burn_in));
  f.push_back(number("recursion", "draws", rec, &RecursionSection::draws));
  f.push_back(number("recursion", "sweep_lo", rec, &RecursionSection::sweep_lo));
  f.push_back(number("recursion", "sweep_hi", rec, &RecursionSection::sweep_hi));
  f.push_back(number("recursion", "sweep_points", rec, &RecursionSection::sweep_points));

  const auto id = &RunConfig::identity;
  f.push_back(number("identity", "tuples", id, &analysis::IdentityOptions::tuples));
  f.push_back(number("identity", "dim", id, &analysis::IdentityOptions::dim));
  f.push_back({"identity", "alphas", [](const RunConfig& c) { return fmt_list(c.identity.alphas); },
               [](RunConfig& c, const std::string& v) { c.identity.alphas = parse_list<double>(v, parse_double); }});

  using analysis::CostModel;
  const auto cost = &RunConfig::cost;
  f.push_back(number("cost", "t_fwd", cost, &CostModel::t_fwd));
  f.push_back(number("cost", "t_short_bwd", cost, &CostModel::t_short_bwd));
  f.push_back(number("cost", "t_long_bwd", cost, &CostModel::t_long_bwd));
  f.push_back(number("cost", "K", cost, &CostModel::K));
  f.push_back(number("cost", "unroll_factor", cost, &CostModel::unroll_factor));
  f.push_back(number("cost", "sgmd_extra_forwards", cost, &CostModel::sgmd_extra_forwards));
  f.push_back(number("cost", "baseline_extra_forwards", cost, &CostModel::baseline_extra_forwards));

  f.push_back(number("gradcheck", "points", &RunConfig::gradcheck, &GradcheckSection::points));
  return f;
}

const std::vector<Field>& schema() {
  static const std::vector<Field> s = build_schema();
  return s;
}

}  // namespace

ConfigParseError::ConfigParseError(std::size_t l, const std::string& message)
    : std::runtime_error(l > 0 ? fmt::format("config line {}: {}", l, message) : "config: " + message), line(l) {}

void set_value(RunConfig& cfg, const std::string& section, const std::string& key, const std::string& value,
               std::size_t line) {
  const auto& s = schema();
  const auto it = std::find_if(s.begin(), s.end(), [&](const Field& f) { return f.section == section && f.key == key; });
  if (it == s.end()) throw ConfigParseError(line, fmt::format("unknown key '{}' in section [{}]", key, section));
  try {
    it->set(cfg, value);
  } catch (const std::invalid_argument& e) {
    throw ConfigParseError(line, fmt::format("{}.{}: {}", section, key, e.what()));
  }
}

void parse_config(RunConfig& cfg, const std::string& text) {
  std::set<std::string> sections;
  for (const auto& f : schema()) sections.insert(f.section);
  std::set<std::pair<std::string, std::string>> seen;
  std::istringstream in(text);
  std::string raw, section;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigParseError(line, "unterminated section header");
      section = trim(std::string_view(s).substr(1, s.size() - 2));
      if (!sections.count(section)) throw ConfigParseError(line, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigParseError(line, "expected 'key = value'");
    if (section.empty()) throw ConfigParseError(line, "key outside of any [section]");
    const std::string key = trim(std::string_view(s).substr(0, eq));
    if (key.empty()) throw ConfigParseError(line, "empty key");
    if (!seen.insert({section, key}).second) throw ConfigParseError(line, "duplicate key '" + key + "'");
    set_value(cfg, section, key, trim(std::string_view(s).substr(eq + 1)), line);
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig cfg;
  parse_config(cfg, buf.str());
  return cfg;
}

void resolve(RunConfig& cfg) {
  if (!cfg.global.seed) {
    if (const char* env = std::getenv(kSeedEnv); env != nullptr && *env != '\0') {
      try {
        cfg.global.seed = parse_u64(env);
      } catch (const std::invalid_argument& e) {
        throw ConfigParseError(0, std::string(kSeedEnv) + ": " + e.what());
      }
    } else {
      cfg.global.seed = 0;
    }
  }
  const auto seed = *cfg.global.seed;
  cfg.trainer.seed = seed;
  cfg.recursion.params.seed = seed;
  cfg.identity.seed = seed;

  cfg.trainer.validate();
  cfg.toy1d.grid.validate();
  cfg.toy1d.init.validate();
  cfg.recursion.params.validate();
  if (cfg.recursion.burn_in >= cfg.recursion.steps) {
    throw ConfigParseError(0, "recursion.burn_in must be below recursion.steps");
  }
  if (!(cfg.recursion.sweep_lo > 0.0) || !(cfg.recursion.sweep_hi > cfg.recursion.sweep_lo) ||
      cfg.recursion.sweep_points < 2) {
    throw ConfigParseError(0, "recursion sweep needs 0 < sweep_lo < sweep_hi and sweep_points >= 2");
  }
  if (cfg.identity.tuples == 0 || cfg.identity.dim == 0) throw ConfigParseError(0, "identity tuples and dim must be positive");
  cfg.cost.validate();
  if (cfg.gradcheck.points == 0) throw ConfigParseError(0, "gradcheck.points must be positive");
  if (cfg.global.log_every == 0) throw ConfigParseError(0, "global.log_every must be positive");
}

std::string to_text(const RunConfig& cfg) {
  std::string out = "# distill-lab resolved configuration\n";
  std::string section;
  for (const auto& f : schema()) {
    if (f.section != section) {
      out += fmt::format("{}[{}]\n", section.empty() ? "" : "\n", f.section);
      section = f.section;
    }
    out += fmt::format("{} = {}\n", f.key, f.get(cfg));
  }
  return out;
}

void save_resolved(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_text(cfg);
}

}  // namespace dlab::cli
