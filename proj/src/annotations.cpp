#include "uncproxy/annotations.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>

#include "uncproxy/error.hpp"
#include "uncproxy/io.hpp"
#include "uncproxy/uncertainty.hpp"

namespace uncproxy {

void LabelSchema::validate() const {
    if (class_names.empty()) fail(ErrorKind::invalid_input, "schema has no classes");
    std::set<std::string> seen;
    for (const auto& name : class_names)
        if (name.empty() || name == "id" || !seen.insert(name).second)
            fail(ErrorKind::invalid_input, "schema class names must be unique, non-empty and not 'id': '" + name + "'");
    for (const auto& name : excluded_columns)
        if (name.empty() || name == "id" || !seen.insert(name).second)
            fail(ErrorKind::invalid_input, "excluded column clashes with another column: '" + name + "'");
}

std::int64_t AnnotationRecord::total() const noexcept {
    std::int64_t s = 0;
    for (auto c : counts) s += c;
    return s;
}

double disagreement(std::span<const double> probs) {
    const auto p = checked_simplex(probs);
    double sq = 0.0;
    for (double v : p) sq += v * v;
    const double d = 1.0 - sq;
    return d > 0.0 ? d : 0.0;
}

SoftLabel normalize_counts(const AnnotationRecord& record, const LabelSchema& schema) {
    if (record.counts.size() != schema.num_classes() || record.excluded_counts.size() != schema.excluded_columns.size())
        fail(ErrorKind::invalid_input, "sample " + record.sample_id + ": count vector does not match the schema");
    for (auto c : record.counts)
        if (c < 0) fail(ErrorKind::invalid_input, "sample " + record.sample_id + ": negative vote count");
    const std::int64_t total = record.total();
    if (total <= 0) fail(ErrorKind::unlabeled_sample, "sample " + record.sample_id + " has no votes on schema classes");

    SoftLabel label{record.sample_id, std::vector<double>(record.counts.size()), 0.0};
    for (std::size_t c = 0; c < record.counts.size(); ++c)
        label.probs[c] = static_cast<double>(record.counts[c]) / static_cast<double>(total);
    label.disagreement = disagreement(label.probs);
    return label;
}

std::vector<SoftLabel> normalize_all(std::span<const AnnotationRecord> records, const LabelSchema& schema) {
    std::vector<SoftLabel> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(normalize_counts(r, schema));
    return out;
}

std::vector<AnnotationRecord> parse_labels(std::string_view text, const LabelSchema& schema) {
    schema.validate();
    const auto lines = io::split_lines(text);
    if (lines.empty()) fail(ErrorKind::parse, "labels file is empty (no header)");

    const auto header = io::split_fields(lines[0]);
    std::optional<std::size_t> id_col;
    std::vector<std::optional<std::size_t>> class_col(schema.num_classes());
    std::vector<std::optional<std::size_t>> excl_col(schema.excluded_columns.size());
    for (std::size_t j = 0; j < header.size(); ++j) {
        const std::string_view name = header[j];
        if (name == "id") {
            id_col = j;
            continue;
        }
        auto cit = std::find(schema.class_names.begin(), schema.class_names.end(), name);
        if (cit != schema.class_names.end()) {
            class_col[static_cast<std::size_t>(cit - schema.class_names.begin())] = j;
            continue;
        }
        auto eit = std::find(schema.excluded_columns.begin(), schema.excluded_columns.end(), name);
        if (eit != schema.excluded_columns.end()) {
            excl_col[static_cast<std::size_t>(eit - schema.excluded_columns.begin())] = j;
            continue;
        }
        fail(ErrorKind::schema_mismatch, "labels header has unexpected column '" + std::string(name) + "'");
    }
    for (std::size_t c = 0; c < class_col.size(); ++c)
        if (!class_col[c]) fail(ErrorKind::schema_mismatch, "labels header lacks class column '" + schema.class_names[c] + "'");

    std::vector<AnnotationRecord> records;
    records.reserve(lines.size() - 1);
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const std::size_t line_no = li + 1;
        const auto fields = io::split_fields(lines[li]);
        if (fields.size() != header.size())
            fail(ErrorKind::parse, "line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                                       " fields, found " + std::to_string(fields.size()));
        AnnotationRecord rec;
        rec.sample_id = id_col ? std::string(fields[*id_col]) : std::to_string(li - 1);
        auto read_count = [&](std::size_t col) {
            const auto v = io::parse_int(fields[col], line_no);
            if (v < 0)
                fail(ErrorKind::invalid_input, "line " + std::to_string(line_no) + ": negative vote count");
            return static_cast<std::int64_t>(v);
        };
        for (const auto& col : class_col) rec.counts.push_back(read_count(*col));
        for (const auto& col : excl_col) rec.excluded_counts.push_back(col ? read_count(*col) : 0);
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<AnnotationRecord> load_labels(const std::filesystem::path& path, const LabelSchema& schema) {
    return parse_labels(io::read_file(path), schema);
}

std::string format_labels(std::span<const AnnotationRecord> records, const LabelSchema& schema) {
    std::string out = "id";
    for (const auto& n : schema.class_names) out += "," + n;
    for (const auto& n : schema.excluded_columns) out += "," + n;
    out += '\n';
    for (const auto& r : records) {
        out += r.sample_id;
        for (auto c : r.counts) out += "," + std::to_string(c);
        for (std::size_t j = 0; j < schema.excluded_columns.size(); ++j)
            out += "," + std::to_string(j < r.excluded_counts.size() ? r.excluded_counts[j] : 0);
        out += '\n';
    }
    return out;
}

DensityHistogram disagreement_histogram(std::span<const double> values, std::size_t bins) {
    if (values.empty()) fail(ErrorKind::empty_input, "histogram of no values");
    if (bins == 0) fail(ErrorKind::invalid_input, "histogram needs at least one bin");
    DensityHistogram h;
    h.counts.assign(bins, 0);
    for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(static_cast<double>(b) / static_cast<double>(bins));
    for (double v : values) {
        if (!(v >= 0.0 && v <= 1.0)) fail(ErrorKind::invalid_input, "histogram value outside [0, 1]");
        auto b = std::min(static_cast<std::size_t>(v * static_cast<double>(bins)), bins - 1);
        while (b > 0 && v < h.edges[b]) --b;
        while (b + 1 < bins && v >= h.edges[b + 1]) ++b;
        ++h.counts[b];
    }
    const auto n = static_cast<double>(values.size());
    for (std::size_t b = 0; b < bins; ++b)
        h.densities.push_back(static_cast<double>(h.counts[b]) / (n * (h.edges[b + 1] - h.edges[b])));
    return h;
}

}  // namespace uncproxy
