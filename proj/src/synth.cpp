#include "uncproxy/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uncproxy/error.hpp"
#include "uncproxy/mlp.hpp"
#include "uncproxy/rng.hpp"

namespace uncproxy {

void SynthConfig::validate() const {
    if (n_samples == 0) fail(ErrorKind::invalid_input, "n_samples must be positive");
    if (n_classes < 2) fail(ErrorKind::invalid_input, "n_classes must be at least 2");
    if (feature_dim == 0) fail(ErrorKind::invalid_input, "feature_dim must be positive");
    if (annotators_k == 0) fail(ErrorKind::invalid_input, "annotators_k must be at least 1");
    if (!(component_scale > 0.0) || !std::isfinite(component_scale))
        fail(ErrorKind::invalid_input, "component_scale must be positive");
    if (component_means.size() != n_classes) fail(ErrorKind::invalid_input, "need one component mean per class");
    for (const auto& mu : component_means) {
        if (mu.size() != feature_dim) fail(ErrorKind::invalid_input, "component mean has the wrong dimension");
        for (double v : mu)
            if (!std::isfinite(v)) fail(ErrorKind::invalid_input, "component mean is not finite");
    }
    if (!(ood_fraction >= 0.0 && ood_fraction < 1.0)) fail(ErrorKind::invalid_input, "ood_fraction must lie in [0, 1)");
    if (ood_fraction > 0.0 && ood_shift.size() != feature_dim)
        fail(ErrorKind::invalid_input, "ood_shift must have feature_dim entries");
}

std::string synth_sample_id(std::size_t index) {
    std::string digits = std::to_string(index);
    if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
    return "s" + digits;
}

std::vector<AnnotationRecord> SynthDataset::records(std::size_t n_excluded) const {
    std::vector<AnnotationRecord> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i)
        out.push_back({sample_ids[i], annotation_counts[i], std::vector<std::int64_t>(n_excluded, 0)});
    return out;
}

std::vector<double> true_posterior(std::span<const double> x, const SynthConfig& config) {
    const double inv_two_var = 1.0 / (2.0 * config.component_scale * config.component_scale);
    std::vector<double> logits(config.component_means.size());
    for (std::size_t c = 0; c < logits.size(); ++c) {
        const auto& mu = config.component_means[c];
        if (mu.size() != x.size()) fail(ErrorKind::invalid_input, "feature vector does not match the component means");
        double d2 = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) d2 += (x[j] - mu[j]) * (x[j] - mu[j]);
        logits[c] = -d2 * inv_two_var;
    }
    return softmax(logits);
}

SynthDataset generate(const SynthConfig& config) {
    config.validate();
    const std::size_t N = config.n_samples;
    const std::size_t C = config.n_classes;
    const std::size_t D = config.feature_dim;

    SynthDataset ds;
    ds.features = Matrix(N, D);
    ds.true_posteriors = Matrix(N, C);
    ds.annotation_counts.assign(N, std::vector<std::int64_t>(C, 0));
    ds.is_ood.assign(N, 0);
    ds.sample_ids.reserve(N);

    for (std::size_t i = 0; i < N; ++i) {
        ds.sample_ids.push_back(synth_sample_id(i));
        Rng rng(config.seed, {stream_tag::synth_sample, i});
        const std::size_t cls = rng.index(C);
        auto x = ds.features.row(i);
        for (std::size_t j = 0; j < D; ++j) x[j] = config.component_means[cls][j] + config.component_scale * rng.normal();
        const auto post = true_posterior(x, config);
        std::ranges::copy(post, ds.true_posteriors.row(i).begin());
        for (std::size_t a = 0; a < config.annotators_k; ++a) {
            const double u = rng.uniform01();
            double cum = 0.0;
            std::size_t vote = C - 1;
            for (std::size_t c = 0; c < C; ++c) {
                cum += post[c];
                if (u < cum) {
                    vote = c;
                    break;
                }
            }
            ++ds.annotation_counts[i][vote];
        }
    }

    const auto n_ood = static_cast<std::size_t>(std::round(config.ood_fraction * static_cast<double>(N)));
    if (n_ood > 0) {
        std::vector<std::uint64_t> keys(N);
        for (std::size_t i = 0; i < N; ++i) keys[i] = Rng(config.seed, {stream_tag::synth_ood, i}).next();
        std::vector<std::size_t> order(N);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
        for (std::size_t j = 0; j < n_ood; ++j) {
            const std::size_t i = order[j];
            ds.is_ood[i] = 1;
            auto x = ds.features.row(i);
            for (std::size_t d = 0; d < D; ++d) x[d] += config.ood_shift[d];
        }
    }
    return ds;
}

}  // namespace uncproxy
