#pragma once

// Synthetic soft-labeled classification data: equal-prior isotropic Gaussian
// components with a closed-form posterior, and simulated crowd annotators
// who vote by sampling that posterior.
//
// Sample i draws everything from the stream (seed, synth_sample, i): the
// class, then the D feature noises, then the annotators' votes. The OOD subset
// is the round(ood_fraction * N) samples with the smallest first draw of
// stream (seed, synth_ood, i), ties by index. OOD samples get ood_shift added
// to their features after the posterior and the votes are computed.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uncproxy/annotations.hpp"
#include "uncproxy/matrix.hpp"

namespace uncproxy {

struct SynthConfig {
    std::size_t n_samples = 1000;
    std::size_t n_classes = 4;
    std::size_t feature_dim = 2;
    std::vector<std::vector<double>> component_means;  // n_classes x feature_dim
    double component_scale = 1.0;
    std::size_t annotators_k = 10;
    double ood_fraction = 0.0;
    std::vector<double> ood_shift;  // feature_dim; may be empty when ood_fraction == 0
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthDataset {
    Matrix features;
    Matrix true_posteriors;
    std::vector<std::vector<std::int64_t>> annotation_counts;
    std::vector<std::uint8_t> is_ood;
    std::vector<std::string> sample_ids;

    std::size_t size() const noexcept { return sample_ids.size(); }
    // Records with `n_excluded` zero-filled auxiliary columns.
    std::vector<AnnotationRecord> records(std::size_t n_excluded = 0) const;
};

std::vector<double> true_posterior(std::span<const double> x, const SynthConfig& config);
SynthDataset generate(const SynthConfig& config);

std::string synth_sample_id(std::size_t index);

}  // namespace uncproxy
