#pragma once

// The experiment flow behind the `uncproxy` command line:
//
//   synth    -> features.csv, labels.csv, dataset.json
//   train    -> params_<model>.json, loss_trace_<model>.csv
//   predict  -> predictions_<model>.jsonl
//   analyze  -> report.json plus CSV mirrors of every plot-facing array
//
// Baseline and UncNet share one training run; they differ only in whether
// dropout stays on at inference time.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "uncproxy/annotations.hpp"
#include "uncproxy/calibration.hpp"
#include "uncproxy/error.hpp"
#include "uncproxy/mlp.hpp"
#include "uncproxy/serialize.hpp"
#include "uncproxy/synth.hpp"
#include "uncproxy/uncertainty.hpp"

namespace uncproxy {

inline constexpr const char* kLibraryVersion = "0.1.0";

enum class Mode { baseline, uncnet, both };
enum class Split { train, val, test };

const char* to_string(Mode m) noexcept;
const char* to_string(Split s) noexcept;
Mode parse_mode(std::string_view s);

struct SplitFractions {
    double train = 0.8;
    double val = 0.1;  // test takes the rest
};

// Deterministic split from a 64-bit FNV-1a hash of the id, mixed and mapped to [0, 1).
Split assign_split(std::string_view sample_id, const SplitFractions& fractions);

struct DataPaths {
    std::filesystem::path features;
    std::filesystem::path labels;
    std::filesystem::path sidecar;
};

struct RunConfig {
    std::uint64_t seed = 0;
    Mode mode = Mode::both;
    std::filesystem::path output_dir = "out";
    DataPaths paths;
    LabelSchema schema;
    std::optional<SynthConfig> synth;

    TrainConfig train;
    std::vector<std::size_t> hidden{64, 64};
    bool exclude_ood_from_training = true;
    SplitFractions splits;

    CalibrationConfig calibration;
    std::string analysis_split = "test";  // train | val | test | all
    std::vector<double> coverages{0.5, 0.6, 0.7, 0.75, 0.8, 0.9, 1.0};
    double table_coverage = 0.75;
    std::size_t k_extremes = 10;
    std::size_t histogram_bins = 20;

    unsigned threads = 0;  // 0 = hardware concurrency; never echoed into outputs
};

struct CliOverrides {
    std::optional<Mode> mode;
    std::optional<std::filesystem::path> output_dir;
    std::optional<std::uint64_t> seed;
};

// Config errors raise usage.
RunConfig parse_run_config(const Json& doc, const CliOverrides& overrides = {});
RunConfig load_run_config(const std::filesystem::path& path, const CliOverrides& overrides = {});
// Effective configuration (defaults filled in), embedded in every report.
Json run_config_to_json(const RunConfig& cfg);

struct PredictionRecord {
    std::string sample_id;
    Matrix probs;  // T x C (UncNet) or 1 x C (Baseline)
    std::vector<double> mean_probs;
    std::optional<UncertaintyTriple> uncertainty;
};

std::string prediction_record_to_line(const PredictionRecord& record, Mode model);
// Throws format when T or C is inconsistent across records.
std::vector<PredictionRecord> parse_prediction_log(std::string_view text);

std::filesystem::path params_path(const RunConfig& cfg, Mode model);
std::filesystem::path predictions_path(const RunConfig& cfg, Mode model);
std::filesystem::path report_path(const RunConfig& cfg);

void cmd_synth(const RunConfig& cfg, std::ostream& log);
void cmd_train(const RunConfig& cfg, std::ostream& log);
void cmd_predict(const RunConfig& cfg, std::ostream& log);
void cmd_analyze(const RunConfig& cfg, std::ostream& log);

// Evaluates one sample the way cmd_predict does.
PredictionRecord predict_sample(const NetworkParams& params, std::span<const double> x, std::size_t index,
                                const std::string& id, Mode model, const RunConfig& cfg);

// Builds the analysis report from in-memory inputs (used by cmd_analyze).
struct AnalysisInputs {
    std::vector<AnnotationRecord> records;
    std::vector<std::uint8_t> is_ood;  // aligned with records; empty if unknown
    std::optional<std::vector<PredictionRecord>> baseline;
    std::optional<std::vector<PredictionRecord>> uncnet;
};

struct AnalysisOutputs {
    Json report;
    std::vector<std::pair<std::string, std::string>> csv_files;  // file name, contents
};

AnalysisOutputs analyze(const RunConfig& cfg, const AnalysisInputs& inputs);

// Maps an error kind onto the documented exit codes (2 usage, 3 data, 4 numerical).
int exit_code_for(ErrorKind kind) noexcept;

// Entry point shared by the executable and the tests.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace uncproxy
