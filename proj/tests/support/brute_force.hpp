#pragma once

// Straight-line reference implementations used as test oracles. They avoid
// the library's helpers on purpose: bins are found by scanning every edge,
// and equal-count ranges by explicit rank counting instead of sorting.

#include <cmath>
#include <cstddef>
#include <vector>

#include "uncproxy/calibration.hpp"
#include "uncproxy/mlp.hpp"
#include "uncproxy/rng.hpp"

namespace brute {

using uncproxy::PairSample;

inline bool in_bin(double v, std::size_t b, std::size_t B) {
    const double lo = static_cast<double>(b) / static_cast<double>(B);
    const double hi = static_cast<double>(b + 1) / static_cast<double>(B);
    return b + 1 == B ? (v >= lo && v <= hi) : (v >= lo && v < hi);
}

inline std::size_t top_class(const std::vector<double>& p) {
    std::size_t best = 0;
    for (std::size_t c = 0; c < p.size(); ++c)
        if (p[c] > p[best]) best = c;
    return best;
}

struct BinStats {
    std::size_t n = 0;
    double gap = 0.0;
};

inline std::vector<BinStats> top_label_bins(const std::vector<PairSample>& pairs, std::size_t B) {
    std::vector<BinStats> out(B);
    for (std::size_t b = 0; b < B; ++b) {
        double conf = 0.0, hits = 0.0;
        for (const auto& p : pairs) {
            const std::size_t t = top_class(p.pred_probs);
            if (!in_bin(p.pred_probs[t], b, B)) continue;
            ++out[b].n;
            conf += p.pred_probs[t];
            hits += t == p.label_class ? 1.0 : 0.0;
        }
        if (out[b].n) out[b].gap = std::abs(hits / out[b].n - conf / out[b].n);
    }
    return out;
}

inline double ece(const std::vector<PairSample>& pairs, std::size_t B) {
    double e = 0.0;
    for (const auto& s : top_label_bins(pairs, B))
        if (s.n) e += static_cast<double>(s.n) / static_cast<double>(pairs.size()) * s.gap;
    return e;
}

inline double mce(const std::vector<PairSample>& pairs, std::size_t B) {
    double m = 0.0;
    for (const auto& s : top_label_bins(pairs, B))
        if (s.n && s.gap > m) m = s.gap;
    return m;
}

inline double sce(const std::vector<PairSample>& pairs, std::size_t B) {
    const std::size_t C = pairs.front().pred_probs.size();
    double total = 0.0;
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t b = 0; b < B; ++b) {
            double n = 0.0, conf = 0.0, hits = 0.0;
            for (const auto& p : pairs) {
                if (!in_bin(p.pred_probs[c], b, B)) continue;
                n += 1.0;
                conf += p.pred_probs[c];
                hits += p.label_class == c ? 1.0 : 0.0;
            }
            if (n > 0) total += n / static_cast<double>(pairs.size()) * std::abs(hits / n - conf / n);
        }
    return total / static_cast<double>(C);
}

// Adaptive calibration for one class. Ranks break ties by pair index; range r
// holds ranks [r*floor(n/R) + min(r, n mod R), ...).
inline double class_range_gaps(const std::vector<PairSample>& pairs, std::size_t c, std::size_t R, double above,
                               bool* empty) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        if (pairs[i].pred_probs[c] > above) members.push_back(i);
    const std::size_t n = members.size();
    *empty = n == 0;
    std::vector<std::size_t> rank(n, 0);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            const double va = pairs[members[a]].pred_probs[c], vb = pairs[members[b]].pred_probs[c];
            if (vb < va || (vb == va && b < a)) ++rank[a];
        }
    double total = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
        const std::size_t lo = r * (n / R) + std::min(r, n % R);
        const std::size_t size = n / R + (r < n % R ? 1 : 0);
        if (size == 0) continue;
        double conf = 0.0, hits = 0.0;
        for (std::size_t rk = lo; rk < lo + size; ++rk)
            for (std::size_t a = 0; a < n; ++a)
                if (rank[a] == rk) {
                    conf += pairs[members[a]].pred_probs[c];
                    hits += pairs[members[a]].label_class == c ? 1.0 : 0.0;
                }
        total += std::abs(hits / size - conf / size);
    }
    return total;
}

inline double ace(const std::vector<PairSample>& pairs, std::size_t R) {
    const std::size_t C = pairs.front().pred_probs.size();
    double total = 0.0;
    bool empty = false;
    for (std::size_t c = 0; c < C; ++c) total += class_range_gaps(pairs, c, R, -1.0, &empty);
    return total / static_cast<double>(C * R);
}

inline double tace(const std::vector<PairSample>& pairs, std::size_t R, double eps) {
    const std::size_t C = pairs.front().pred_probs.size();
    double total = 0.0;
    bool empty = false;
    for (std::size_t c = 0; c < C; ++c) total += class_range_gaps(pairs, c, R, eps, &empty);
    return total / static_cast<double>(C * R);
}

// Random pairs with Dirichlet(1)-like predictions and a sprinkling of exact
// ties so ranking order matters.
inline std::vector<PairSample> random_pairs(std::uint64_t seed, std::size_t n, std::size_t C) {
    uncproxy::Rng rng(seed);
    std::vector<PairSample> pairs;
    std::vector<double> previous;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> p(C);
        if (!previous.empty() && rng.uniform01() < 0.1) {
            p = previous;
        } else {
            double s = 0.0;
            for (auto& v : p) s += v = -std::log(1.0 - rng.uniform01());
            for (auto& v : p) v /= s;
        }
        previous = p;
        pairs.push_back({"s" + std::to_string(i), rng.index(C), p});
    }
    return pairs;
}

// Forward pass written out loop by loop, applied to plain vectors.
inline std::vector<double> forward(const uncproxy::NetworkParams& net, const std::vector<double>& x,
                                   const uncproxy::DropoutMasks* masks) {
    std::vector<double> a = x;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& L = net.layers[k];
        if (masks && k > 0)
            for (std::size_t j = 0; j < a.size(); ++j)
                a[j] = masks->masks[k - 1][j] ? a[j] / (1.0 - masks->p) : 0.0;
        std::vector<double> z(L.out_dim());
        for (std::size_t r = 0; r < L.out_dim(); ++r) {
            double s = L.bias[r];
            for (std::size_t c = 0; c < L.in_dim(); ++c) s += L.weight(r, c) * a[c];
            z[r] = s;
        }
        if (L.activation == uncproxy::Activation::relu)
            for (auto& v : z) v = v > 0.0 ? v : 0.0;
        a = z;
    }
    return a;
}

}  // namespace brute
