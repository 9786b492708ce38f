#pragma once

#include <span>
#include <string>
#include <vector>

#include "uncproxy/annotations.hpp"
#include "uncproxy/calibration.hpp"

namespace uncproxy {

struct CorrelationResult {
    double r = 0.0;
    double p_value = 1.0;  // two-sided
    std::size_t n = 0;
};

struct TTestResult {
    double t_statistic = 0.0;
    double df = 0.0;
    double p_value = 1.0;  // two-sided
};

struct RejectionPoint {
    double coverage = 0.0;
    double accuracy = 0.0;  // percent
    std::size_t n_kept = 0;
};

struct RejectionCurve {
    std::vector<RejectionPoint> points;
};

struct Extremes {
    std::vector<std::string> lowest;   // ascending uncertainty
    std::vector<std::string> highest;  // descending uncertainty
};

// Nats; q is clipped at 1e-12 and 0 ln 0 = 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);
double jsd(std::span<const double> p, std::span<const double> q);

CorrelationResult pearson(std::span<const double> x, std::span<const double> y);
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);
// Two independent samples with unequal variances (Welch-Satterthwaite df).
TTestResult welch_ttest(std::span<const double> a, std::span<const double> b);

// Percentage of samples whose predicted argmax equals the soft-label argmax
// (lowest index wins ties on both sides).
double accuracy(std::span<const SamplePrediction> predictions, std::span<const SoftLabel> labels);

// For each coverage q keeps the round(qN) least-uncertain samples (ties by
// index, rounding half away from zero) and reports their accuracy.
RejectionCurve rejection_curve(std::span<const SamplePrediction> predictions, std::span<const SoftLabel> labels,
                               std::span<const double> uncertainty, std::span<const double> coverages);

Extremes rank_extremes(std::span<const std::string> ids, std::span<const double> uncertainty, std::size_t k);

double mean(std::span<const double> v);

}  // namespace uncproxy
