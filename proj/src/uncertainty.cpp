#include "uncproxy/uncertainty.hpp"

#include <cmath>

#include "uncproxy/error.hpp"

namespace uncproxy {

std::vector<double> checked_simplex(std::span<const double> p) {
    if (p.empty()) fail(ErrorKind::invalid_input, "probability vector is empty");
    double sum = 0.0;
    for (double v : p) {
        if (!std::isfinite(v) || v < -1e-9)
            fail(ErrorKind::invalid_input, "probability entry out of range: " + std::to_string(v));
        sum += v;
    }
    if (std::abs(sum - 1.0) > kSimplexTolerance)
        fail(ErrorKind::invalid_input, "probabilities sum to " + std::to_string(sum));
    std::vector<double> out(p.size());
    for (std::size_t c = 0; c < p.size(); ++c) out[c] = p[c] > 0.0 ? p[c] / sum : 0.0;
    return out;
}

McPrediction::McPrediction(std::string sample_id, Matrix probs)
    : sample_id_(std::move(sample_id)), probs_(std::move(probs)), mean_(probs_.cols(), 0.0) {
    if (probs_.rows() == 0 || probs_.cols() == 0)
        fail(ErrorKind::invalid_input, "MC prediction needs at least one pass and one class");
    for (std::size_t t = 0; t < probs_.rows(); ++t) {
        auto row = probs_.row(t);
        const auto fixed = checked_simplex(row);
        std::copy(fixed.begin(), fixed.end(), row.begin());
        for (std::size_t c = 0; c < row.size(); ++c) mean_[c] += row[c];
    }
    const auto T = static_cast<double>(probs_.rows());
    for (double& m : mean_) m /= T;
}

double entropy(std::span<const double> p) {
    const auto q = checked_simplex(p);
    double h = 0.0;
    for (double v : q)
        if (v > 0.0) h -= v * std::log(v);
    return h > 0.0 ? h : 0.0;
}

double total_uncertainty(const McPrediction& mc) { return entropy(mc.mean_probs()); }

double aleatoric_uncertainty(const McPrediction& mc) {
    double sum = 0.0;
    for (std::size_t t = 0; t < mc.passes(); ++t) sum += entropy(mc.probs().row(t));
    return sum / static_cast<double>(mc.passes());
}

UncertaintyTriple decompose(const McPrediction& mc) {
    UncertaintyTriple u;
    u.u_aleatoric = aleatoric_uncertainty(mc);
    if (mc.passes() == 1) {
        u.u_epistemic = 0.0;
        u.u_total = u.u_aleatoric;
        return u;
    }
    u.u_epistemic = total_uncertainty(mc) - u.u_aleatoric;
    // Stored total is the sum of the stored parts, so the identity is exact.
    u.u_total = u.u_aleatoric + u.u_epistemic;
    return u;
}

}  // namespace uncproxy
