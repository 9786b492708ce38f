#pragma once

// Crowd vote counts, soft labels and annotator disagreement.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace uncproxy {

struct LabelSchema {
    std::vector<std::string> class_names;
    // Auxiliary vote columns ("unknown", "NF") dropped before normalization.
    std::vector<std::string> excluded_columns;

    void validate() const;
    std::size_t num_classes() const noexcept { return class_names.size(); }
};

struct AnnotationRecord {
    std::string sample_id;
    std::vector<std::int64_t> counts;           // one per schema class
    std::vector<std::int64_t> excluded_counts;  // one per excluded column

    std::int64_t total() const noexcept;  // votes over schema classes only
};

struct SoftLabel {
    std::string sample_id;
    std::vector<double> probs;
    double disagreement = 0.0;
};

// Probability that two independent draws from `probs` differ: 1 - sum p_c^2.
double disagreement(std::span<const double> probs);

SoftLabel normalize_counts(const AnnotationRecord& record, const LabelSchema& schema);
std::vector<SoftLabel> normalize_all(std::span<const AnnotationRecord> records, const LabelSchema& schema);

// Reads a labels CSV with header `id,<classes...>[,<excluded...>]`.
// Column order in the file is free; every schema class must be present and
// excluded columns may be absent (counted as zero).
std::vector<AnnotationRecord> load_labels(const std::filesystem::path& path, const LabelSchema& schema);
std::vector<AnnotationRecord> parse_labels(std::string_view text, const LabelSchema& schema);
std::string format_labels(std::span<const AnnotationRecord> records, const LabelSchema& schema);

struct DensityHistogram {
    std::vector<double> edges;      // bins + 1 edges spanning [0, 1]
    std::vector<double> densities;  // count / (N * width)
    std::vector<std::size_t> counts;
};

DensityHistogram disagreement_histogram(std::span<const double> values, std::size_t bins);

}  // namespace uncproxy
