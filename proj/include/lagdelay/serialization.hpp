#pragma once

/** @file
 * JSON encoding of designs, problems and reports.
 */

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "lagdelay/analysis.hpp"
#include "lagdelay/design.hpp"
#include "lagdelay/estimators.hpp"
#include "lagdelay/signal.hpp"

namespace lagdelay {

using Json = nlohmann::ordered_json;

/// Parses a JSON file. Syntax errors become Error(io) with a
/// `path:line:column:` prefix.
Json read_json_file(const std::filesystem::path& path);
void write_json_file(const Json& doc, const std::filesystem::path& path);

/// 64-bit FNV-1a of the compact dump, as 16 hex digits.
std::string config_hash(const Json& doc);

Json design_to_json(const InputDesign& design);
InputDesign design_from_json(const Json& doc);

Json problem_to_json(const DesignProblem& problem);
DesignProblem problem_from_json(const Json& doc);

Json constraints_to_json(const ConstraintReport& report);
Json estimate_to_json(const DelayEstimate& estimate);
Json crlb_to_json(const CrlbReport& report);
Json bias_prediction_to_json(const BiasPrediction& prediction);
/// per_method, histogram and crlb blocks of a benchmark report.
Json mc_stats_to_json(const McStats& stats);

LaguerreOptions laguerre_options_from_json(const Json& doc);
MlOptions ml_options_from_json(const Json& doc);
FreqInterpOptions freq_options_from_json(const Json& doc);

}  // namespace lagdelay
