#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "modescatter/continuation.hpp"
#include "modescatter/dtn.hpp"
#include "modescatter/scatdata.hpp"

namespace modescatter {

using json = nlohmann::ordered_json;

/// Builds a scenario from its JSON description (see README). T' defaults to
/// T + 2; resolution_scale multiplies nx1 and divides h. Throws ParseError
/// for malformed input and InvalidScenarioError for inconsistent geometry.
Scenario scenario_from_json(const json& j, double resolution_scale = 1.0);
Scenario load_scenario(const std::filesystem::path& path, double resolution_scale = 1.0);

/// Sampled form of a scenario: grid metadata {nx1, nx2, T, Tprime, h} and the
/// row-major medium (and conductor mask); loadable with scenario_from_json.
json scenario_to_json(const Scenario& s);

/// Field dump: grid metadata plus row-major [re, im] pairs.
json field_to_json(const Field& f, double T, double T_prime);

json dataset_to_json(const ScatteringDataset& ds);
ScatteringDataset dataset_from_json(const json& j);
/// One row per entry: side,n,m,k,re,im,abs,propagating.
std::string dataset_to_csv(const ScatteringDataset& ds);

json model_to_json(const ContinuationModel& m);
json dtn_family_to_json(const std::vector<DtNMatrix>& family);
/// Rows t,x1,re,im.
std::string trace_to_csv(const TimeTraceSet& t);

/// Reads a JSON document; ParseError names the path on failure.
json read_json(const std::filesystem::path& path);

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

}  // namespace modescatter
