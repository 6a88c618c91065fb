#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "caliblab/core.hpp"
#include "caliblab/experiments.hpp"
#include "caliblab/measures.hpp"
#include "caliblab/opt_search.hpp"

namespace caliblab {

using Json = nlohmann::ordered_json;

// Parse errors throw ParameterError naming the offending field. Unknown keys
// are rejected.
Json read_json_file(const std::string& path);
Json parse_json(const std::string& text, const std::string& what);

// {"x": [0, 1, ...], "p": [0.5, ...]}
Transcript transcript_from_json(const Json& j);
Json to_json(const Transcript& t);

// {"type": "product", "pstar": [...]}
// {"type": "tree", "depth": T, "conditionals": [...]}  (heap order)
// {"type": "hashed", "depth": T, "seed": s, "grid": [...]}  (grid optional)
OutcomeDistribution distribution_from_json(const Json& j);
Json to_json(const OutcomeDistribution& d);

// {"type": "table", "depth": T, "predictions": [...]}
// {"type": "named", "name": "truthful|constant|sidestep|algorithm1|ucal_strategic", "params": {...}}
// truthful uses `dist` unless params carries its own "dist"; constant takes
// "alpha"; algorithm1 takes "pstar" (defaulting to the product dist's pstar).
Forecaster forecaster_from_json(const Json& j, const OutcomeDistribution* dist = nullptr);
// Tables serialize directly; named rules serialize by name only.
Json to_json(const Forecaster& a);

Json to_json(const MeasureReport& r);
MeasureReport measure_report_from_json(const Json& j);

Json to_json(const DiagnosticsReport& r);
Json to_json(const RunningStats& s);
Json to_json(const ExperimentReport& r);

// Comma-separated doubles, e.g. "0,0.5,1".
std::vector<double> parse_double_list(const std::string& text, const std::string& what);

}  // namespace caliblab
