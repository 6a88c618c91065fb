#include "caliblab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>

#include <CLI11.hpp>

#include "caliblab/core.hpp"
#include "caliblab/errors.hpp"
#include "caliblab/experiments.hpp"
#include "caliblab/forecasters.hpp"
#include "caliblab/json_io.hpp"
#include "caliblab/measures.hpp"
#include "caliblab/opt_search.hpp"
#include "caliblab/parallel.hpp"

namespace caliblab {

namespace {

struct Settings {
  int threads = 1;
  std::string config;
  std::string output;
  std::string csv;

  std::string input;
  std::string dist;
  std::string forecaster;
  std::string measure;
  std::string mode = "exact";
  std::size_t samples = 10000;
  std::size_t reps = 0;
  std::size_t inner = 0;
  std::uint64_t seed = 0;
  std::string grid;
  bool compressed = false;
  bool report = false;

  std::string family;
  std::size_t T = 0;
  std::string experiment;
  std::string sweep;
  std::size_t trees = 0;
  std::size_t pilot = 0;

  double lo = 0.0;
  double hi = 1.0;
};

struct Cli {
  std::unique_ptr<CLI::App> app;
  std::vector<CLI::App*> subs;
};

Cli make_app(Settings& s) {
  Cli c;
  c.app = std::make_unique<CLI::App>("Calibration measures, forecasters and truthfulness experiments", "caliblab");
  auto& app = *c.app;
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--threads", s.threads, "Worker threads (1 = bit-exact reproducibility)")->check(CLI::PositiveNumber);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", s.config, "JSON file with option values; command-line flags win");
    sub->add_option("--output", s.output, "Write the JSON report here instead of stdout");
    c.subs.push_back(sub);
  };

  auto* measure = app.add_subcommand("measure", "Evaluate a calibration measure on a transcript");
  common(measure);
  measure->add_option("--input", s.input, "Transcript JSON");
  measure->add_option("--measure", s.measure, "Measure name");
  measure->add_option("--mode", s.mode, "exact or mc (mc: ssce only)");
  measure->add_option("--samples", s.samples, "Random subsets for --mode mc");
  measure->add_option("--seed", s.seed, "Seed for --mode mc");

  auto* expected = app.add_subcommand("expected", "Expected measure of a forecaster under a distribution");
  common(expected);
  expected->add_option("--dist", s.dist, "Distribution JSON");
  expected->add_option("--forecaster", s.forecaster, "Forecaster JSON (default: truthful)");
  expected->add_option("--measure", s.measure, "Measure name");
  expected->add_option("--mode", s.mode, "exact (enumeration) or mc");
  expected->add_option("--reps", s.reps, "Replications for --mode mc");
  expected->add_option("--inner", s.inner, "Subsets per replication for Monte Carlo SSCE");
  expected->add_option("--seed", s.seed, "Seed for --mode mc");

  auto* opt = app.add_subcommand("opt", "Minimum expected measure over grid-valued forecasters");
  common(opt);
  opt->add_option("--dist", s.dist, "Distribution JSON");
  opt->add_option("--measure", s.measure, "Measure name");
  opt->add_option("--grid", s.grid, "Comma-separated grid, e.g. 0,0.5,1");
  opt->add_flag("--compressed", s.compressed, "Upper-bound search over (t, ones so far) forecasters");
  opt->add_flag("--report", s.report, "Also report the truthful forecaster's error and the ratio");

  auto* gap = app.add_subcommand("gap", "Truthful vs strategic forecaster on a gap family");
  common(gap);
  gap->add_option("--family", s.family, "triple_block, half_blocks or halfhalf");
  gap->add_option("--measure", s.measure, "Measure name (msr and caldist use bounds)");
  gap->add_option("--T", s.T, "Horizon");
  gap->add_option("--reps", s.reps, "Replications");
  gap->add_option("--inner", s.inner, "Subsets per replication for Monte Carlo SSCE");
  gap->add_option("--seed", s.seed, "Seed");
  gap->add_option("--csv", s.csv, "Per-replication CSV output");

  auto* scaling = app.add_subcommand("scaling", "Scaling and sandwich experiments");
  common(scaling);
  scaling->add_option("--experiment", s.experiment, "alg1_scaling, sandwich or ssce_vs_smce");
  scaling->add_option("--sweep", s.sweep, "Horizons for alg1_scaling, e.g. 96,384,1536,6144");
  scaling->add_option("--T", s.T, "Horizon (sandwich, ssce_vs_smce)");
  scaling->add_option("--reps", s.reps, "Replications");
  scaling->add_option("--seed", s.seed, "Seed");
  scaling->add_option("--trees", s.trees, "Random trees (sandwich)");
  scaling->add_option("--grid", s.grid, "Grid (sandwich)");
  scaling->add_option("--pilot", s.pilot, "Pilot transcripts (ssce_vs_smce)");
  scaling->add_option("--csv", s.csv, "Per-replication CSV output");

  auto* table = app.add_subcommand("table", "Truthful vs strategic value for every measure");
  common(table);
  table->add_option("--T", s.T, "Horizon (multiple of 6)");
  table->add_option("--reps", s.reps, "Replications");
  table->add_option("--inner", s.inner, "Subsets per replication for Monte Carlo SSCE");
  table->add_option("--seed", s.seed, "Seed");
  table->add_option("--csv", s.csv, "Per-replication CSV output");

  auto* diag = app.add_subcommand("diagnostics", "Realized variance, N_t and epochs along a transcript");
  common(diag);
  diag->add_option("--dist", s.dist, "Distribution JSON");
  diag->add_option("--input", s.input, "Transcript JSON");
  diag->add_option("--lo", s.lo, "Interval lower end");
  diag->add_option("--hi", s.hi, "Interval upper end");
  return c;
}

CLI::App* active(const Cli& c) {
  for (auto* sub : c.subs) {
    if (sub->parsed()) return sub;
  }
  return nullptr;
}

std::string config_value(const Json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  if (v.is_array()) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ParameterError("field 'config." + key + "': expected numbers");
      out += (i ? "," : "") + v[i].dump();
    }
    return out;
  }
  throw ParameterError("field 'config." + key + "': unsupported value");
}

// Arguments for config entries the command line did not set. Unknown keys
// are rejected.
std::vector<std::string> config_args(CLI::App* sub, const std::string& path) {
  const Json j = read_json_file(path);
  if (!j.is_object()) throw ParameterError("field 'config': expected an object");
  std::vector<std::string> out;
  for (const auto& [key, value] : j.items()) {
    if (key == "config") throw ParameterError("field 'config.config': nested configs are not supported");
    CLI::Option* o = sub->get_option_no_throw("--" + key);
    if (o == nullptr) throw ParameterError("field 'config." + key + "': unknown field");
    if (o->count() > 0) continue;
    if (value.is_boolean()) {
      if (o->get_expected_min() != 0) throw ParameterError("field 'config." + key + "': expected a value");
      if (value.get<bool>()) out.push_back("--" + key);
      continue;
    }
    out.push_back("--" + key);
    out.push_back(config_value(value, key));
  }
  return out;
}

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw ParameterError("missing required option --" + flag);
}

void emit(const Settings& s, const Json& j, std::ostream& out) {
  if (s.output.empty()) {
    out << j.dump(2) << '\n';
    return;
  }
  std::ofstream f(s.output);
  if (!f) throw ParameterError("cannot write '" + s.output + "'");
  f << j.dump(2) << '\n';
}

void emit_csv(const Settings& s, const ExperimentReport& r) {
  if (s.csv.empty()) return;
  std::ofstream f(s.csv);
  if (!f) throw ParameterError("cannot write '" + s.csv + "'");
  write_csv(r, f);
}

void require_measure(const std::string& name) {
  require(name, "measure");
  if (!is_measure(name)) throw ParameterError("unknown measure '" + name + "'");
}

std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  for (double v : parse_double_list(text, what)) {
    if (!(v >= 1.0) || v != std::floor(v)) throw ParameterError(what + ": expected positive integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

// ---------------------------------------------------------------------------

Json cmd_measure(const Settings& s) {
  require(s.input, "input");
  require_measure(s.measure);
  const Transcript t = transcript_from_json(read_json_file(s.input));
  try {
    if (s.mode == "mc") {
      if (s.measure != "ssce") throw ParameterError("--mode mc is only available for ssce");
      RngStream rng(s.seed, 0);
      return to_json(ssce_mc(t, s.samples, rng));
    }
    if (s.mode != "exact") throw ParameterError("--mode must be exact or mc");
    return to_json(evaluate(s.measure, t));
  } catch (const CapacityError& e) {
    // An exact request beyond its cap is an invalid request for this input.
    throw ParameterError(e.what());
  }
}

Json cmd_expected(const Settings& s) {
  require(s.dist, "dist");
  require_measure(s.measure);
  const OutcomeDistribution d = distribution_from_json(read_json_file(s.dist));
  const Forecaster a = s.forecaster.empty() ? truthful(d) : forecaster_from_json(read_json_file(s.forecaster), &d);
  Json j;
  j["measure"] = s.measure;
  j["forecaster"] = a.name();
  j["T"] = d.depth();
  if (s.mode == "exact") {
    j["value"] = expected_measure(d, a, measure_fn(s.measure));
    j["mode"] = "exact";
    j["stderr"] = 0.0;
    j["reps"] = 0;
    return j;
  }
  if (s.mode != "mc") throw ParameterError("--mode must be exact or mc");
  const std::size_t reps = s.reps == 0 ? 1000 : s.reps;
  RngStream rng(s.seed, 0);
  McEstimate e;
  if (s.measure == "ssce" && d.depth() > caps().ssce) {
    e = mc_expected_ssce(d, a, reps, s.inner == 0 ? 1000 : s.inner, rng);
  } else {
    e = mc_expected_measure(d, a, measure_fn(s.measure), reps, rng);
  }
  j["value"] = e.mean;
  j["mode"] = "monte_carlo";
  j["stderr"] = e.std_error;
  j["reps"] = reps;
  return j;
}

Json cmd_opt(const Settings& s) {
  require(s.dist, "dist");
  require_measure(s.measure);
  require(s.grid, "grid");
  const OutcomeDistribution d = distribution_from_json(read_json_file(s.dist));
  const GridSpec g{parse_double_list(s.grid, "--grid")};
  validate(g);
  const MeasureFn m = measure_fn(s.measure);
  Json j;
  if (s.compressed) {
    const CompressedSearchResult r = opt_compressed_upper(d, m, g);
    j["value"] = r.upper_bound;
    j["bound"] = "upper";
    j["argmin_table"] = r.argmin.as_table().predictions;
  } else {
    const OptResult r = opt_exact(d, m, g);
    j["value"] = r.value;
    j["bound"] = "exact";
    j["argmin_table"] = r.argmin.as_table().predictions;
    if (s.report) {
      const double err = expected_measure(d, truthful(d), m);
      j["err_truthful"] = err;
      if (r.value > 1e-12) {
        j["ratio"] = err / r.value;
      } else {
        j["gap_witnessed"] = err > 1e-12;
      }
    }
  }
  j["grid"] = g.values;
  j["measure"] = s.measure;
  return j;
}

Json cmd_gap(const Settings& s) {
  require(s.family, "family");
  require(s.measure, "measure");
  if (s.T == 0) throw ParameterError("missing required option --T");
  ExperimentParams p;
  p.family = s.family;
  p.measure = s.measure;
  p.T = s.T;
  p.reps = s.reps;
  p.seed = s.seed;
  if (s.inner) p.inner = s.inner;
  const ExperimentReport r = run_named_experiment("gap", p);
  emit_csv(s, r);
  return to_json(r);
}

Json cmd_scaling(const Settings& s) {
  require(s.experiment, "experiment");
  if (s.experiment != "alg1_scaling" && s.experiment != "sandwich" && s.experiment != "ssce_vs_smce") {
    throw ParameterError("--experiment must be alg1_scaling, sandwich or ssce_vs_smce");
  }
  ExperimentParams p;
  p.T = s.T;
  p.reps = s.reps;
  p.seed = s.seed;
  if (!s.sweep.empty()) p.sweep = parse_size_list(s.sweep, "--sweep");
  if (s.trees) p.trees = s.trees;
  if (!s.grid.empty()) p.grid = parse_double_list(s.grid, "--grid");
  p.pilot = s.pilot;
  const ExperimentReport r = run_named_experiment(s.experiment, p);
  emit_csv(s, r);
  return to_json(r);
}

struct TableRow {
  const char* measure;
  const char* family;
};

Json cmd_table(const Settings& s) {
  const std::size_t T = s.T == 0 ? 120 : s.T;
  if (T % 6 != 0) throw ParameterError("--T must be a multiple of 6");
  const TableRow rows[] = {{"ece", "triple_block"},  {"msr", "triple_block"},  {"smce", "half_blocks"},
                           {"caldist", "half_blocks"}, {"intce", "half_blocks"}, {"kce", "half_blocks"},
                           {"ucal", "halfhalf"},      {"ssce", "half_blocks"}};
  Json out;
  out["T"] = T;
  out["reps"] = s.reps == 0 ? 500 : s.reps;
  out["seed"] = s.seed;
  out["rows"] = Json::array();
  ExperimentReport all;
  all.params.seed = s.seed;
  for (const auto& row : rows) {
    ExperimentParams p;
    p.family = row.family;
    p.measure = row.measure;
    p.T = T;
    p.reps = s.reps == 0 ? 500 : s.reps;
    p.seed = s.seed;
    p.inner = s.inner == 0 ? 200 : s.inner;
    const ExperimentReport r = run_named_experiment("gap", p);
    const double tm = r.derived.at("truthful_mean");
    const double sm = r.derived.at("strategic_mean");
    const double se = r.derived.at("truthful_stderr") + r.derived.at("strategic_stderr");
    std::string verdict;
    if (r.derived.at("strategic_nonzero") == 0.0 && tm > 1e-9) {
      verdict = "strategic_zero";
    } else if (tm - sm > 3.0 * se) {
      verdict = "strategic_better";
    } else {
      verdict = "truthful_not_worse";
    }
    Json j;
    j["measure"] = row.measure;
    j["family"] = row.family;
    j["truthful_value"] = tm;
    j["strategic_value"] = sm;
    j["verdict"] = verdict;
    out["rows"].push_back(j);
    for (auto rr : r.rows) {
      rr.arm = std::string(row.measure) + ":" + rr.arm;
      all.rows.push_back(rr);
    }
  }
  emit_csv(s, all);
  return out;
}

Json cmd_diagnostics(const Settings& s) {
  require(s.dist, "dist");
  require(s.input, "input");
  const OutcomeDistribution d = distribution_from_json(read_json_file(s.dist));
  const Transcript t = transcript_from_json(read_json_file(s.input));
  return to_json(diagnostics(d, t, Interval{s.lo, s.hi}));
}

Json dispatch(const std::string& name, const Settings& s) {
  if (name == "measure") return cmd_measure(s);
  if (name == "expected") return cmd_expected(s);
  if (name == "opt") return cmd_opt(s);
  if (name == "gap") return cmd_gap(s);
  if (name == "scaling") return cmd_scaling(s);
  if (name == "table") return cmd_table(s);
  if (name == "diagnostics") return cmd_diagnostics(s);
  throw ParameterError("unknown subcommand '" + name + "'");
}

int parse_into(Cli& c, std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  std::reverse(args.begin(), args.end());
  try {
    c.app->parse(args);
  } catch (const CLI::CallForHelp&) {
    out << c.app->help();
    return -1;
  } catch (const CLI::CallForAllHelp&) {
    out << c.app->help("", CLI::AppFormatMode::All);
    return -1;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    caps() = Caps{};
    if (const char* env = std::getenv("CALIBLAB_CAP_OVERRIDE"); env != nullptr && *env != '\0') {
      caps() = parse_caps(env);
    }

    Settings first;
    Cli c1 = make_app(first);
    if (int rc = parse_into(c1, args, out, err); rc != kExitOk) return rc < 0 ? kExitOk : rc;
    CLI::App* sub = active(c1);
    if (sub == nullptr) throw ParameterError("missing subcommand");

    Settings s;
    Cli c2 = make_app(s);
    std::vector<std::string> full = args;
    if (!first.config.empty()) {
      // Config entries go right after the subcommand name; entries already
      // set on the command line were skipped.
      const std::vector<std::string> extra = config_args(sub, first.config);
      const auto pos = std::find(full.begin(), full.end(), sub->get_name());
      full.insert(pos + 1, extra.begin(), extra.end());
    }
    if (int rc = parse_into(c2, full, out, err); rc != kExitOk) return rc < 0 ? kExitOk : rc;

    set_threads(s.threads);
    emit(s, dispatch(sub->get_name(), s), out);
    return kExitOk;
  } catch (const CapacityError& e) {
    err << "capacity error: " << e.what() << '\n';
    return kExitCapacity;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const InternalError& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace caliblab
