#pragma once

// Calibration metrics over <annotation, sample> pairs: every single vote is
// scored against the model's probability vector for that sample.

#include <span>
#include <string>
#include <vector>

#include "uncproxy/annotations.hpp"

namespace uncproxy {

struct SamplePrediction {
    std::string sample_id;
    std::vector<double> probs;
};

struct PairSample {
    std::string sample_id;
    std::size_t label_class = 0;
    std::vector<double> pred_probs;
};

struct ReliabilityBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    double avg_confidence = 0.0;  // 0 for empty bins
    double accuracy = 0.0;        // 0 for empty bins
};

struct CalibrationConfig {
    std::size_t bins = 10;    // B, for reliability/ECE/MCE/SCE
    std::size_t ranges = 10;  // R, for ACE/TACE
    double epsilon = 0.01;    // TACE threshold
    std::size_t quantiles = 10;  // Q, for the BCE-vs-uncertainty curve

    void validate() const;
};

struct CalibrationReport {
    double bce = 0.0;
    double ece = 0.0;
    double mce = 0.0;
    double sce = 0.0;
    double ace = 0.0;
    double tace = 0.0;
    std::vector<ReliabilityBin> bins;
    CalibrationConfig config;
    std::size_t n_pairs = 0;
    // Classes with no confidence above epsilon; they contribute 0 to TACE.
    std::vector<std::size_t> tace_empty_classes;
};

// One group per prediction, in prediction order; within a sample, pairs are
// ordered by class. Throws join if a prediction has no record and
// unlabeled-sample if a record has no votes.
std::vector<std::vector<PairSample>> expand_pairs_grouped(std::span<const SamplePrediction> predictions,
                                                          std::span<const AnnotationRecord> records);
std::vector<PairSample> expand_pairs(std::span<const SamplePrediction> predictions,
                                     std::span<const AnnotationRecord> records);

double brier(std::span<const PairSample> pairs);
// Same quantity computed from vote counts without materializing pairs.
double brier_from_counts(std::span<const SamplePrediction> predictions, std::span<const AnnotationRecord> records);

// Index of the largest entry; lowest index wins ties.
std::size_t argmax(std::span<const double> v);

// Equal-width bin of `value` on [0, 1]; bins are [lo, hi) and the last bin is closed.
std::size_t bin_index(double value, std::size_t bins);

std::vector<ReliabilityBin> reliability_diagram(std::span<const PairSample> pairs, std::size_t bins);
double ece(std::span<const PairSample> pairs, std::size_t bins);
double mce(std::span<const PairSample> pairs, std::size_t bins);
double sce(std::span<const PairSample> pairs, std::size_t bins);
double ace(std::span<const PairSample> pairs, std::size_t ranges);

struct TaceResult {
    double value = 0.0;
    std::vector<std::size_t> empty_classes;
};
TaceResult tace_detail(std::span<const PairSample> pairs, std::size_t ranges, double epsilon);
double tace(std::span<const PairSample> pairs, std::size_t ranges, double epsilon);

CalibrationReport calibration_report(std::span<const PairSample> pairs, const CalibrationConfig& config);

struct PercentilePoint {
    double percentile = 0.0;  // upper edge of the group, in percent
    double mean_uncertainty = 0.0;
    double bce = 0.0;
    std::size_t n_samples = 0;
    std::size_t n_pairs = 0;
};

// Sorts samples by uncertainty (ties by sample order), cuts them into Q
// near-equal-count groups (the first n mod Q groups take one extra sample) and
// reports the Brier error of each non-empty group's pairs.
std::vector<PercentilePoint> bce_vs_uncertainty_percentile(std::span<const std::vector<PairSample>> pairs_by_sample,
                                                           std::span<const double> uncertainty, std::size_t quantiles);

// Sizes of `ranges` near-equal-count index blocks covering n items.
std::vector<std::size_t> equal_count_sizes(std::size_t n, std::size_t ranges);

}  // namespace uncproxy
