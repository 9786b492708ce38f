#include "uncproxy/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uncproxy/error.hpp"
#include "uncproxy/special.hpp"

namespace uncproxy {

namespace {

constexpr double kLogClip = 1e-12;

void require_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b) fail(ErrorKind::invalid_input, std::string(what) + ": inputs differ in length");
}

void require_aligned(std::span<const SamplePrediction> predictions, std::span<const SoftLabel> labels) {
    if (predictions.empty()) fail(ErrorKind::empty_input, "accuracy over no samples");
    require_same_length(predictions.size(), labels.size(), "accuracy");
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i].sample_id != labels[i].sample_id)
            fail(ErrorKind::join, "prediction " + predictions[i].sample_id + " is aligned with label " + labels[i].sample_id);
}

bool is_hit(const SamplePrediction& pred, const SoftLabel& label) {
    return argmax(pred.probs) == argmax(label.probs);
}

std::vector<std::size_t> ascending_order(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    return order;
}

double sample_variance(std::span<const double> v, double m) {
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace

double mean(std::span<const double> v) {
    if (v.empty()) fail(ErrorKind::empty_input, "mean of no values");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    require_same_length(p.size(), q.size(), "kl_divergence");
    double kl = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c)
        if (p[c] > 0.0) kl += p[c] * std::log(p[c] / std::max(q[c], kLogClip));
    return kl;
}

double jsd(std::span<const double> p, std::span<const double> q) {
    require_same_length(p.size(), q.size(), "jsd");
    // Accumulated term by term with the two arguments in a fixed order, so
    // swapping p and q yields the same float operations.
    double s = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
        const double lo = std::min(p[c], q[c]);
        const double hi = std::max(p[c], q[c]);
        const double m = 0.5 * (lo + hi);
        if (m <= 0.0) continue;
        double term = 0.0;
        if (lo > 0.0) term += lo * std::log(lo / m);
        if (hi > 0.0) term += hi * std::log(hi / m);
        s += term;
    }
    return 0.5 * s;
}

CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
    require_same_length(x.size(), y.size(), "pearson");
    if (x.size() < 3) fail(ErrorKind::invalid_input, "pearson needs at least 3 points");
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) fail(ErrorKind::degenerate_input, "pearson input has zero variance");

    CorrelationResult res;
    res.n = x.size();
    res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    if (std::abs(res.r) >= 1.0) {
        res.p_value = 0.0;
        return res;
    }
    const double df = static_cast<double>(res.n - 2);
    const double t = res.r * std::sqrt(df / (1.0 - res.r * res.r));
    res.p_value = student_t_two_sided_p(t, df);
    return res;
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
    require_same_length(a.size(), b.size(), "paired_ttest");
    if (a.size() < 2) fail(ErrorKind::invalid_input, "paired t-test needs at least 2 pairs");
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    const double md = mean(diff);
    const double var = sample_variance(diff, md);
    if (!(var > 0.0)) fail(ErrorKind::degenerate_input, "paired differences have zero variance");
    const auto n = static_cast<double>(diff.size());
    TTestResult res;
    res.t_statistic = md / (std::sqrt(var) / std::sqrt(n));
    res.df = n - 1.0;
    res.p_value = student_t_two_sided_p(res.t_statistic, res.df);
    return res;
}

TTestResult welch_ttest(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) fail(ErrorKind::invalid_input, "Welch t-test needs at least 2 values per group");
    const double ma = mean(a);
    const double mb = mean(b);
    const double va = sample_variance(a, ma) / static_cast<double>(a.size());
    const double vb = sample_variance(b, mb) / static_cast<double>(b.size());
    if (!(va + vb > 0.0)) fail(ErrorKind::degenerate_input, "both groups have zero variance");
    TTestResult res;
    res.t_statistic = (ma - mb) / std::sqrt(va + vb);
    res.df = (va + vb) * (va + vb) /
             (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
    res.p_value = student_t_two_sided_p(res.t_statistic, res.df);
    return res;
}

double accuracy(std::span<const SamplePrediction> predictions, std::span<const SoftLabel> labels) {
    require_aligned(predictions, labels);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) hits += is_hit(predictions[i], labels[i]) ? 1 : 0;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(predictions.size());
}

RejectionCurve rejection_curve(std::span<const SamplePrediction> predictions, std::span<const SoftLabel> labels,
                               std::span<const double> uncertainty, std::span<const double> coverages) {
    require_aligned(predictions, labels);
    require_same_length(predictions.size(), uncertainty.size(), "rejection_curve");
    const auto order = ascending_order(uncertainty);
    const auto n = static_cast<double>(predictions.size());

    RejectionCurve curve;
    for (std::size_t j = 0; j < coverages.size(); ++j) {
        const double q = coverages[j];
        if (!(q > 0.0 && q <= 1.0)) fail(ErrorKind::invalid_coverage, "coverage must lie in (0, 1]");
        if (j > 0 && !(q > coverages[j - 1])) fail(ErrorKind::invalid_coverage, "coverages must be strictly increasing");
        const auto kept = static_cast<std::size_t>(std::round(q * n));
        if (kept == 0) fail(ErrorKind::invalid_coverage, "coverage " + std::to_string(q) + " keeps no samples");
        std::size_t hits = 0;
        for (std::size_t r = 0; r < kept; ++r) hits += is_hit(predictions[order[r]], labels[order[r]]) ? 1 : 0;
        curve.points.push_back({q, 100.0 * static_cast<double>(hits) / static_cast<double>(kept), kept});
    }
    return curve;
}

Extremes rank_extremes(std::span<const std::string> ids, std::span<const double> uncertainty, std::size_t k) {
    require_same_length(ids.size(), uncertainty.size(), "rank_extremes");
    if (k > ids.size()) fail(ErrorKind::invalid_input, "k exceeds the number of samples");
    const auto up = ascending_order(uncertainty);
    std::vector<std::size_t> down(ids.size());
    std::iota(down.begin(), down.end(), std::size_t{0});
    std::stable_sort(down.begin(), down.end(), [&](std::size_t a, std::size_t b) { return uncertainty[a] > uncertainty[b]; });
    Extremes e;
    for (std::size_t j = 0; j < k; ++j) {
        e.lowest.push_back(ids[up[j]]);
        e.highest.push_back(ids[down[j]]);
    }
    return e;
}

}  // namespace uncproxy
