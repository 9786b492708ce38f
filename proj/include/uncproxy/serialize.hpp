#pragma once

// JSON and CSV encodings of the library's data types.

#include <span>
#include <string>

#include "json.hpp"
#include "uncproxy/calibration.hpp"
#include "uncproxy/evaluation.hpp"
#include "uncproxy/matrix.hpp"
#include "uncproxy/mlp.hpp"
#include "uncproxy/synth.hpp"

namespace uncproxy {

using Json = nlohmann::ordered_json;

inline constexpr int kParamsFormatVersion = 1;

// {"version":1,"layers":[{"rows","cols","weights","bias","activation"}]}
Json params_to_json(const NetworkParams& params);
// Throws format on any schema violation.
NetworkParams params_from_json(const Json& doc);

Json synth_config_to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(const Json& doc);

Json calibration_report_to_json(const CalibrationReport& report);
Json correlation_to_json(const CorrelationResult& r);
Json ttest_to_json(const TTestResult& t);
Json rejection_curve_to_json(const RejectionCurve& curve);
Json percentile_curve_to_json(std::span<const PercentilePoint> curve);
Json histogram_to_json(const DensityHistogram& h);

// Features CSV: header `id,f_0,...,f_{D-1}`.
std::string format_features(std::span<const std::string> ids, const Matrix& features);
struct FeatureTable {
    std::vector<std::string> ids;
    Matrix features;
};
FeatureTable parse_features(std::string_view text);

std::string reliability_csv(std::span<const ReliabilityBin> bins);

}  // namespace uncproxy
