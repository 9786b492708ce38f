#pragma once

// Entropy-based decomposition of Monte Carlo predictions. All values in nats.

#include <span>
#include <string>
#include <vector>

#include "uncproxy/matrix.hpp"

namespace uncproxy {

// Tolerance on a probability vector's sum before it is rejected; smaller
// deviations are renormalized away.
inline constexpr double kSimplexTolerance = 1e-6;

// T stochastic softmax rows for one sample and their column mean.
class McPrediction {
public:
    McPrediction() = default;
    // Validates and renormalizes each row, then computes the mean row.
    McPrediction(std::string sample_id, Matrix probs);

    const std::string& sample_id() const noexcept { return sample_id_; }
    const Matrix& probs() const noexcept { return probs_; }
    std::span<const double> mean_probs() const noexcept { return mean_; }
    std::size_t passes() const noexcept { return probs_.rows(); }
    std::size_t classes() const noexcept { return probs_.cols(); }

private:
    std::string sample_id_;
    Matrix probs_;
    std::vector<double> mean_;
};

struct UncertaintyTriple {
    double u_total = 0.0;
    double u_aleatoric = 0.0;
    double u_epistemic = 0.0;

    friend bool operator==(const UncertaintyTriple&, const UncertaintyTriple&) = default;
};

// Returns a copy of p on the simplex. Entries below -1e-9 or a sum off by more
// than kSimplexTolerance raise invalid-input.
std::vector<double> checked_simplex(std::span<const double> p);

double entropy(std::span<const double> p);
double total_uncertainty(const McPrediction& mc);
double aleatoric_uncertainty(const McPrediction& mc);
UncertaintyTriple decompose(const McPrediction& mc);

}  // namespace uncproxy
