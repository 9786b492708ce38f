#pragma once

#include <vector>

#include "uncproxy/calibration.hpp"
#include "uncproxy/rng.hpp"

namespace calgen {

// Predictions whose top class is right with probability equal to its
// confidence. Confidence is uniform on (1/C, 1); the rest of the mass is
// spread evenly so the top class stays the argmax.
inline std::vector<uncproxy::PairSample> calibrated_pairs(std::uint64_t seed, std::size_t n, std::size_t C) {
    uncproxy::Rng rng(seed);
    std::vector<uncproxy::PairSample> pairs;
    pairs.reserve(n);
    const double lo = 1.0 / static_cast<double>(C);
    for (std::size_t i = 0; i < n; ++i) {
        const double conf = lo + (1.0 - lo) * (0.001 + 0.998 * rng.uniform01());
        const std::size_t top = rng.index(C);
        std::vector<double> p(C, (1.0 - conf) / static_cast<double>(C - 1));
        p[top] = conf;
        std::size_t label = top;
        if (!rng.bernoulli(conf)) {
            label = rng.index(C - 1);
            if (label >= top) ++label;
        }
        pairs.push_back({std::to_string(i), label, std::move(p)});
    }
    return pairs;
}

}  // namespace calgen
