#include "doctest.h"

#include <cmath>

#include "uncproxy/error.hpp"
#include "uncproxy/synth.hpp"

using namespace uncproxy;

namespace {

SynthConfig small(std::uint64_t seed) {
    SynthConfig c;
    c.n_samples = 2000;
    c.n_classes = 3;
    c.feature_dim = 2;
    c.component_means = {{0.0, 0.0}, {2.0, 0.0}, {0.0, 2.0}};
    c.component_scale = 1.0;
    c.annotators_k = 10;
    c.ood_fraction = 0.1;
    c.ood_shift = {5.0, 5.0};
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("true posterior in closed form") {
    SynthConfig c = small(0);
    c.n_classes = 2;
    c.component_means = {{0.0, 0.0}, {2.0, 0.0}};
    const auto mid = true_posterior(std::vector<double>{1.0, 0.5}, c);
    CHECK(mid[0] == doctest::Approx(0.5).epsilon(1e-15));
    // logits 0 and -2: p0 = 1 / (1 + e^-2)
    const auto at0 = true_posterior(std::vector<double>{0.0, 0.0}, c);
    CHECK(at0[0] == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-15));
}

TEST_CASE("generation is deterministic and seed-sensitive") {
    const auto a = generate(small(3));
    const auto b = generate(small(3));
    const auto c = generate(small(4));
    CHECK(a.features == b.features);
    CHECK(a.annotation_counts == b.annotation_counts);
    CHECK(a.is_ood == b.is_ood);
    CHECK_FALSE(a.features == c.features);
    CHECK(a.sample_ids[42] == "s000042");
}

TEST_CASE("votes sum to K and follow the posterior") {
    const auto ds = generate(small(5));
    double expected = 0.0, observed = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::int64_t total = 0;
        for (auto v : ds.annotation_counts[i]) total += v;
        CHECK(total == 10);
        expected += 10.0 * ds.true_posteriors(i, 0);
        observed += static_cast<double>(ds.annotation_counts[i][0]);
    }
    // Sum of 20000 votes; standard deviation below sqrt(20000 / 4).
    CHECK(std::abs(observed - expected) < 4.0 * std::sqrt(5000.0));
}

TEST_CASE("OOD subset has the requested size and shifted features") {
    const auto ds = generate(small(6));
    std::size_t n_ood = 0;
    double ood_mean = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.is_ood[i]) {
            ++n_ood;
            ood_mean += ds.features(i, 0);
        }
    CHECK(n_ood == 200);
    CHECK(ood_mean / 200.0 > 4.0);

    // The shift is applied after the labels, so labels ignore it.
    SynthConfig no_shift = small(6);
    no_shift.ood_fraction = 0.0;
    const auto plain = generate(no_shift);
    CHECK(plain.annotation_counts == ds.annotation_counts);
}

TEST_CASE("invalid synthetic configurations") {
    SynthConfig c = small(1);
    c.component_means.pop_back();
    CHECK_THROWS_AS(generate(c), Error);
    c = small(1);
    c.ood_shift = {1.0};
    CHECK_THROWS_AS(generate(c), Error);
    c = small(1);
    c.ood_fraction = 1.0;
    CHECK_THROWS_AS(generate(c), Error);
}
