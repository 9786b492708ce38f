#include "uncproxy/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "uncproxy/error.hpp"

namespace uncproxy {

namespace {

std::size_t check_pairs(std::span<const PairSample> pairs) {
    if (pairs.empty()) fail(ErrorKind::empty_input, "calibration metric over no pairs");
    const std::size_t C = pairs.front().pred_probs.size();
    if (C == 0) fail(ErrorKind::invalid_input, "pair has an empty probability vector");
    for (const auto& p : pairs) {
        if (p.pred_probs.size() != C) fail(ErrorKind::invalid_input, "pairs disagree on the class count");
        if (p.label_class >= C) fail(ErrorKind::invalid_input, "pair label outside the class range");
    }
    return C;
}

void require_positive(std::size_t n, const char* what) {
    if (n == 0) fail(ErrorKind::invalid_input, std::string(what) + " must be at least 1");
}

double squared_distance_to_onehot(std::span<const double> probs, std::size_t label) {
    double s = 0.0;
    for (std::size_t c = 0; c < probs.size(); ++c) {
        const double y = c == label ? 1.0 : 0.0;
        s += (y - probs[c]) * (y - probs[c]);
    }
    return s;
}

struct ScoredConfidence {
    double confidence;
    bool hit;
};

// Sum over equal-count ranges of |accuracy - confidence| for one class;
// `items` must already be sorted by confidence.
double range_gap_sum(std::span<const ScoredConfidence> items, std::size_t ranges) {
    double total = 0.0;
    std::size_t start = 0;
    for (std::size_t size : equal_count_sizes(items.size(), ranges)) {
        if (size == 0) continue;
        double conf = 0.0;
        double hits = 0.0;
        for (std::size_t j = start; j < start + size; ++j) {
            conf += items[j].confidence;
            hits += items[j].hit ? 1.0 : 0.0;
        }
        const auto n = static_cast<double>(size);
        total += std::abs(hits / n - conf / n);
        start += size;
    }
    return total;
}

std::vector<ScoredConfidence> class_confidences(std::span<const PairSample> pairs, std::size_t c, double above) {
    std::vector<ScoredConfidence> items;
    for (const auto& p : pairs)
        if (p.pred_probs[c] > above) items.push_back({p.pred_probs[c], p.label_class == c});
    std::stable_sort(items.begin(), items.end(),
                     [](const ScoredConfidence& a, const ScoredConfidence& b) { return a.confidence < b.confidence; });
    return items;
}

}  // namespace

void CalibrationConfig::validate() const {
    require_positive(bins, "bin count");
    require_positive(ranges, "range count");
    if (!(epsilon >= 0.0 && epsilon < 1.0)) fail(ErrorKind::invalid_input, "epsilon must lie in [0, 1)");
    if (quantiles < 2) fail(ErrorKind::invalid_input, "quantile count must be at least 2");
}

std::vector<std::size_t> equal_count_sizes(std::size_t n, std::size_t ranges) {
    require_positive(ranges, "range count");
    std::vector<std::size_t> sizes(ranges, n / ranges);
    for (std::size_t r = 0; r < n % ranges; ++r) ++sizes[r];
    return sizes;
}

std::vector<std::vector<PairSample>> expand_pairs_grouped(std::span<const SamplePrediction> predictions,
                                                          std::span<const AnnotationRecord> records) {
    std::unordered_map<std::string, const AnnotationRecord*> by_id;
    for (const auto& r : records) by_id.emplace(r.sample_id, &r);

    std::vector<std::vector<PairSample>> groups;
    groups.reserve(predictions.size());
    for (const auto& pred : predictions) {
        const auto it = by_id.find(pred.sample_id);
        if (it == by_id.end()) fail(ErrorKind::join, "no annotation record for sample " + pred.sample_id);
        const AnnotationRecord& rec = *it->second;
        if (rec.counts.size() != pred.probs.size())
            fail(ErrorKind::invalid_input, "sample " + pred.sample_id + ": class count differs between prediction and labels");
        if (rec.total() <= 0) fail(ErrorKind::unlabeled_sample, "sample " + pred.sample_id + " has no votes");
        std::vector<PairSample> group;
        for (std::size_t c = 0; c < rec.counts.size(); ++c) {
            if (rec.counts[c] < 0) fail(ErrorKind::invalid_input, "sample " + pred.sample_id + ": negative vote count");
            for (std::int64_t k = 0; k < rec.counts[c]; ++k) group.push_back({pred.sample_id, c, pred.probs});
        }
        groups.push_back(std::move(group));
    }
    return groups;
}

std::vector<PairSample> expand_pairs(std::span<const SamplePrediction> predictions,
                                     std::span<const AnnotationRecord> records) {
    std::vector<PairSample> flat;
    for (auto& group : expand_pairs_grouped(predictions, records))
        std::move(group.begin(), group.end(), std::back_inserter(flat));
    return flat;
}

double brier(std::span<const PairSample> pairs) {
    check_pairs(pairs);
    double s = 0.0;
    for (const auto& p : pairs) s += squared_distance_to_onehot(p.pred_probs, p.label_class);
    return s / static_cast<double>(pairs.size());
}

double brier_from_counts(std::span<const SamplePrediction> predictions, std::span<const AnnotationRecord> records) {
    std::unordered_map<std::string, const AnnotationRecord*> by_id;
    for (const auto& r : records) by_id.emplace(r.sample_id, &r);
    double weighted = 0.0;
    std::int64_t n_pairs = 0;
    for (const auto& pred : predictions) {
        const auto it = by_id.find(pred.sample_id);
        if (it == by_id.end()) fail(ErrorKind::join, "no annotation record for sample " + pred.sample_id);
        const auto& counts = it->second->counts;
        for (std::size_t c = 0; c < counts.size(); ++c) {
            weighted += static_cast<double>(counts[c]) * squared_distance_to_onehot(pred.probs, c);
            n_pairs += counts[c];
        }
    }
    if (n_pairs == 0) fail(ErrorKind::empty_input, "no votes to score");
    return weighted / static_cast<double>(n_pairs);
}

std::size_t argmax(std::span<const double> v) {
    if (v.empty()) fail(ErrorKind::invalid_input, "argmax of an empty vector");
    std::size_t best = 0;
    for (std::size_t c = 1; c < v.size(); ++c)
        if (v[c] > v[best]) best = c;
    return best;
}

std::size_t bin_index(double value, std::size_t bins) {
    const auto B = static_cast<double>(bins);
    std::size_t b = value <= 0.0 ? 0 : std::min(static_cast<std::size_t>(value * B), bins - 1);
    // Snap to the edges b / B exactly, so the guess from value * B cannot
    // disagree with the interval definition through rounding.
    while (b > 0 && value < static_cast<double>(b) / B) --b;
    while (b + 1 < bins && value >= static_cast<double>(b + 1) / B) ++b;
    return b;
}

std::vector<ReliabilityBin> reliability_diagram(std::span<const PairSample> pairs, std::size_t bins) {
    check_pairs(pairs);
    require_positive(bins, "bin count");
    std::vector<ReliabilityBin> out(bins);
    std::vector<double> conf_sum(bins, 0.0), hit_sum(bins, 0.0);
    for (std::size_t b = 0; b < bins; ++b) {
        out[b].lo = static_cast<double>(b) / static_cast<double>(bins);
        out[b].hi = static_cast<double>(b + 1) / static_cast<double>(bins);
    }
    for (const auto& p : pairs) {
        const std::size_t top = argmax(p.pred_probs);
        const double conf = p.pred_probs[top];
        const std::size_t b = bin_index(conf, bins);
        ++out[b].count;
        conf_sum[b] += conf;
        hit_sum[b] += top == p.label_class ? 1.0 : 0.0;
    }
    for (std::size_t b = 0; b < bins; ++b) {
        if (out[b].count == 0) continue;
        const auto n = static_cast<double>(out[b].count);
        out[b].avg_confidence = conf_sum[b] / n;
        out[b].accuracy = hit_sum[b] / n;
    }
    return out;
}

double ece(std::span<const PairSample> pairs, std::size_t bins) {
    const auto diagram = reliability_diagram(pairs, bins);
    const auto n = static_cast<double>(pairs.size());
    double e = 0.0;
    for (const auto& b : diagram)
        if (b.count > 0) e += static_cast<double>(b.count) / n * std::abs(b.accuracy - b.avg_confidence);
    return e;
}

double mce(std::span<const PairSample> pairs, std::size_t bins) {
    double m = 0.0;
    for (const auto& b : reliability_diagram(pairs, bins))
        if (b.count > 0) m = std::max(m, std::abs(b.accuracy - b.avg_confidence));
    return m;
}

double sce(std::span<const PairSample> pairs, std::size_t bins) {
    const std::size_t C = check_pairs(pairs);
    require_positive(bins, "bin count");
    const auto n = static_cast<double>(pairs.size());
    double total = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        std::vector<std::size_t> count(bins, 0);
        std::vector<double> conf_sum(bins, 0.0), hit_sum(bins, 0.0);
        for (const auto& p : pairs) {
            const std::size_t b = bin_index(p.pred_probs[c], bins);
            ++count[b];
            conf_sum[b] += p.pred_probs[c];
            hit_sum[b] += p.label_class == c ? 1.0 : 0.0;
        }
        for (std::size_t b = 0; b < bins; ++b) {
            if (count[b] == 0) continue;
            const auto nb = static_cast<double>(count[b]);
            total += nb / n * std::abs(hit_sum[b] / nb - conf_sum[b] / nb);
        }
    }
    return total / static_cast<double>(C);
}

double ace(std::span<const PairSample> pairs, std::size_t ranges) {
    const std::size_t C = check_pairs(pairs);
    require_positive(ranges, "range count");
    double total = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        // Every confidence counts for ACE, including exact zeros.
        const auto items = class_confidences(pairs, c, -1.0);
        total += range_gap_sum(items, ranges);
    }
    return total / static_cast<double>(C * ranges);
}

TaceResult tace_detail(std::span<const PairSample> pairs, std::size_t ranges, double epsilon) {
    const std::size_t C = check_pairs(pairs);
    require_positive(ranges, "range count");
    if (!(epsilon >= 0.0 && epsilon < 1.0)) fail(ErrorKind::invalid_input, "epsilon must lie in [0, 1)");
    TaceResult result;
    double total = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        const auto items = class_confidences(pairs, c, epsilon);
        if (items.empty()) {
            result.empty_classes.push_back(c);
            continue;
        }
        total += range_gap_sum(items, ranges);
    }
    result.value = total / static_cast<double>(C * ranges);
    return result;
}

double tace(std::span<const PairSample> pairs, std::size_t ranges, double epsilon) {
    return tace_detail(pairs, ranges, epsilon).value;
}

CalibrationReport calibration_report(std::span<const PairSample> pairs, const CalibrationConfig& config) {
    config.validate();
    CalibrationReport r;
    r.config = config;
    r.n_pairs = pairs.size();
    r.bce = brier(pairs);
    r.bins = reliability_diagram(pairs, config.bins);
    r.ece = ece(pairs, config.bins);
    r.mce = mce(pairs, config.bins);
    r.sce = sce(pairs, config.bins);
    r.ace = ace(pairs, config.ranges);
    auto t = tace_detail(pairs, config.ranges, config.epsilon);
    r.tace = t.value;
    r.tace_empty_classes = std::move(t.empty_classes);
    return r;
}

std::vector<PercentilePoint> bce_vs_uncertainty_percentile(std::span<const std::vector<PairSample>> pairs_by_sample,
                                                           std::span<const double> uncertainty, std::size_t quantiles) {
    if (pairs_by_sample.empty()) fail(ErrorKind::empty_input, "BCE curve over no samples");
    if (uncertainty.size() != pairs_by_sample.size())
        fail(ErrorKind::invalid_input, "uncertainty list is not aligned with the samples");
    if (quantiles < 2) fail(ErrorKind::invalid_input, "quantile count must be at least 2");

    std::vector<std::size_t> order(uncertainty.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return uncertainty[a] < uncertainty[b]; });

    std::vector<PercentilePoint> curve;
    std::size_t start = 0;
    const auto sizes = equal_count_sizes(order.size(), quantiles);
    for (std::size_t g = 0; g < quantiles; ++g) {
        const std::size_t size = sizes[g];
        PercentilePoint pt;
        pt.percentile = 100.0 * static_cast<double>(g + 1) / static_cast<double>(quantiles);
        pt.n_samples = size;
        double unc_sum = 0.0;
        double sq_sum = 0.0;
        for (std::size_t j = start; j < start + size; ++j) {
            const std::size_t i = order[j];
            unc_sum += uncertainty[i];
            for (const auto& p : pairs_by_sample[i]) sq_sum += squared_distance_to_onehot(p.pred_probs, p.label_class);
            pt.n_pairs += pairs_by_sample[i].size();
        }
        start += size;
        if (size == 0 || pt.n_pairs == 0) continue;
        pt.mean_uncertainty = unc_sum / static_cast<double>(size);
        pt.bce = sq_sum / static_cast<double>(pt.n_pairs);
        curve.push_back(pt);
    }
    return curve;
}

}  // namespace uncproxy
