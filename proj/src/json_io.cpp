#include "caliblab/json_io.hpp"

#include <charconv>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "caliblab/errors.hpp"
#include "caliblab/forecasters.hpp"

namespace caliblab {

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& msg) {
  throw ParameterError("field '" + field + "': " + msg);
}

void require_object(const Json& j, const std::string& what) {
  if (!j.is_object()) field_error(what, "expected an object");
}

void reject_unknown(const Json& j, const std::string& what, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) field_error(what + "." + key, "unknown field");
  }
}

const Json& need(const Json& j, const std::string& what, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) field_error(what + "." + key, "missing");
  return *it;
}

double as_double(const Json& j, const std::string& field) {
  if (!j.is_number()) field_error(field, "expected a number");
  return j.get<double>();
}

std::uint64_t as_u64(const Json& j, const std::string& field) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
    field_error(field, "expected a nonnegative integer");
  }
  return j.get<std::uint64_t>();
}

std::string as_string(const Json& j, const std::string& field) {
  if (!j.is_string()) field_error(field, "expected a string");
  return j.get<std::string>();
}

std::vector<double> as_doubles(const Json& j, const std::string& field) {
  if (!j.is_array()) field_error(field, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_double(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

Bits as_bits(const Json& j, const std::string& field) {
  if (!j.is_array()) field_error(field, "expected an array of 0/1 values");
  Bits out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string f = field + "[" + std::to_string(i) + "]";
    const double v = as_double(j[i], f);
    if (v != 0.0 && v != 1.0) field_error(f, "outcome must be 0 or 1");
    out.push_back(static_cast<Bit>(v));
  }
  return out;
}

// Re-labels ParameterErrors from constructors with the field they came from.
template <class Fn>
auto with_field(const std::string& field, Fn&& fn) {
  try {
    return fn();
  } catch (const CapacityError&) {
    throw;
  } catch (const ParameterError& e) {
    field_error(field, e.what());
  }
}

}  // namespace

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParameterError(what + ": malformed JSON: " + e.what());
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str(), path);
}

Transcript transcript_from_json(const Json& j) {
  require_object(j, "transcript");
  reject_unknown(j, "transcript", {"x", "p"});
  Bits x = as_bits(need(j, "transcript", "x"), "transcript.x");
  std::vector<double> p = as_doubles(need(j, "transcript", "p"), "transcript.p");
  return with_field("transcript", [&] { return Transcript(std::move(x), std::move(p)); });
}

Json to_json(const Transcript& t) {
  Json j;
  j["x"] = Json::array();
  for (Bit b : t.x()) j["x"].push_back(static_cast<int>(b));
  j["p"] = std::vector<double>(t.p().begin(), t.p().end());
  return j;
}

OutcomeDistribution distribution_from_json(const Json& j) {
  require_object(j, "distribution");
  const std::string type = as_string(need(j, "distribution", "type"), "distribution.type");
  if (type == "product") {
    reject_unknown(j, "distribution", {"type", "pstar"});
    auto pstar = as_doubles(need(j, "distribution", "pstar"), "distribution.pstar");
    return with_field("distribution.pstar", [&] { return OutcomeDistribution::product(std::move(pstar)); });
  }
  if (type == "tree") {
    reject_unknown(j, "distribution", {"type", "depth", "conditionals"});
    const auto depth = as_u64(need(j, "distribution", "depth"), "distribution.depth");
    auto c = as_doubles(need(j, "distribution", "conditionals"), "distribution.conditionals");
    return with_field("distribution.conditionals", [&] {
      return OutcomeDistribution::tree(static_cast<std::size_t>(depth), std::move(c));
    });
  }
  if (type == "hashed") {
    reject_unknown(j, "distribution", {"type", "depth", "seed", "grid"});
    const auto depth = as_u64(need(j, "distribution", "depth"), "distribution.depth");
    const auto seed = as_u64(need(j, "distribution", "seed"), "distribution.seed");
    std::vector<double> grid;
    if (j.contains("grid")) grid = as_doubles(j["grid"], "distribution.grid");
    return with_field("distribution", [&] {
      return OutcomeDistribution::hashed_tree(static_cast<std::size_t>(depth), seed, std::move(grid));
    });
  }
  field_error("distribution.type", "expected product, tree or hashed (got '" + type + "')");
}

Json to_json(const OutcomeDistribution& d) {
  Json j;
  if (const auto* p = d.as_product()) {
    j["type"] = "product";
    j["pstar"] = p->pstar;
  } else if (const auto* t = d.as_tree()) {
    j["type"] = "tree";
    j["depth"] = t->depth;
    j["conditionals"] = t->conditionals;
  } else {
    const auto* h = d.as_hashed();
    j["type"] = "hashed";
    j["depth"] = h->depth;
    j["seed"] = h->seed;
    j["grid"] = h->grid;
  }
  return j;
}

Forecaster forecaster_from_json(const Json& j, const OutcomeDistribution* dist) {
  require_object(j, "forecaster");
  const std::string type = as_string(need(j, "forecaster", "type"), "forecaster.type");
  if (type == "table") {
    reject_unknown(j, "forecaster", {"type", "depth", "predictions"});
    const auto depth = as_u64(need(j, "forecaster", "depth"), "forecaster.depth");
    auto p = as_doubles(need(j, "forecaster", "predictions"), "forecaster.predictions");
    return with_field("forecaster.predictions", [&] {
      validate_predictions(p);
      return Forecaster::table(static_cast<std::size_t>(depth), std::move(p));
    });
  }
  if (type != "named") field_error("forecaster.type", "expected table or named (got '" + type + "')");
  reject_unknown(j, "forecaster", {"type", "name", "params"});
  const std::string name = as_string(need(j, "forecaster", "name"), "forecaster.name");
  const Json params = j.contains("params") ? j["params"] : Json::object();
  require_object(params, "forecaster.params");

  if (name == "truthful") {
    reject_unknown(params, "forecaster.params", {"dist"});
    if (params.contains("dist")) return truthful(distribution_from_json(params["dist"]));
    if (!dist) field_error("forecaster.params.dist", "truthful needs a distribution");
    return truthful(*dist);
  }
  if (name == "constant") {
    reject_unknown(params, "forecaster.params", {"alpha"});
    const double a = as_double(need(params, "forecaster.params", "alpha"), "forecaster.params.alpha");
    return with_field("forecaster.params.alpha", [&] { return constant(a); });
  }
  if (name == "sidestep") {
    reject_unknown(params, "forecaster.params", {});
    return sidestep_blocks();
  }
  if (name == "ucal_strategic") {
    reject_unknown(params, "forecaster.params", {});
    return ucal_strategic();
  }
  if (name == "algorithm1") {
    reject_unknown(params, "forecaster.params", {"pstar"});
    if (params.contains("pstar")) {
      auto pstar = as_doubles(params["pstar"], "forecaster.params.pstar");
      return with_field("forecaster.params.pstar", [&] { return algorithm1(std::move(pstar)); });
    }
    if (!dist || !dist->as_product()) {
      field_error("forecaster.params.pstar", "algorithm1 needs pstar or a product distribution");
    }
    return algorithm1(dist->as_product()->pstar);
  }
  field_error("forecaster.name", "unknown forecaster '" + name + "'");
}

Json to_json(const Forecaster& a) {
  Json j;
  if (a.is_table()) {
    j["type"] = "table";
    j["depth"] = a.as_table().depth;
    j["predictions"] = a.as_table().predictions;
  } else {
    j["type"] = "named";
    j["name"] = a.name();
  }
  return j;
}

Json to_json(const MeasureReport& r) {
  Json j;
  j["name"] = r.name;
  j["value"] = r.value;
  j["mode"] = to_string(r.mode);
  j["stderr"] = r.std_error;
  j["samples"] = r.samples;
  return j;
}

MeasureReport measure_report_from_json(const Json& j) {
  require_object(j, "report");
  reject_unknown(j, "report", {"name", "value", "mode", "stderr", "samples"});
  MeasureReport r;
  r.name = as_string(need(j, "report", "name"), "report.name");
  r.value = as_double(need(j, "report", "value"), "report.value");
  const std::string mode = as_string(need(j, "report", "mode"), "report.mode");
  if (mode == "exact") {
    r.mode = Mode::exact;
  } else if (mode == "monte_carlo") {
    r.mode = Mode::monte_carlo;
  } else {
    field_error("report.mode", "expected exact or monte_carlo");
  }
  r.std_error = as_double(need(j, "report", "stderr"), "report.stderr");
  r.samples = static_cast<std::size_t>(as_u64(need(j, "report", "samples"), "report.samples"));
  return r;
}

Json to_json(const DiagnosticsReport& r) {
  Json j;
  j["interval"] = {r.interval.lo, r.interval.hi};
  j["var_path"] = r.var_path;
  j["n_path"] = r.n_path;
  j["gamma_var"] = r.gamma_var;
  j["epochs"] = r.epochs;
  return j;
}

Json to_json(const RunningStats& s) {
  Json j;
  j["n"] = s.n;
  j["mean"] = s.mean;
  j["sd"] = s.sd();
  j["min"] = s.min;
  j["max"] = s.max;
  return j;
}

Json to_json(const ExperimentReport& r) {
  Json j;
  j["name"] = r.name;
  Json p;
  p["T"] = r.params.T;
  p["reps"] = r.params.reps;
  p["seed"] = r.params.seed;
  if (!r.params.family.empty()) p["family"] = r.params.family;
  if (!r.params.measure.empty()) p["measure"] = r.params.measure;
  if (!r.params.sweep.empty()) p["sweep"] = r.params.sweep;
  if (!r.params.grid.empty()) p["grid"] = r.params.grid;
  j["parameters"] = p;
  j["arms"] = Json::array();
  for (const auto& a : r.arms) {
    Json arm;
    arm["arm"] = a.arm;
    arm["T"] = a.T;
    arm["mean"] = a.stats.mean;
    arm["stderr"] = a.std_error;
    arm["min"] = a.stats.min;
    arm["max"] = a.stats.max;
    arm["n"] = a.stats.n;
    j["arms"].push_back(arm);
  }
  j["derived"] = Json::object();
  for (const auto& [k, v] : r.derived) j["derived"][k] = v;
  return j;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size()) {
      throw ParameterError(what + ": '" + item + "' is not a number");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ParameterError(what + ": empty list");
  return out;
}

}  // namespace caliblab
