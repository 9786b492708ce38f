#include "doctest.h"

#include <cmath>

#include "support/brute_force.hpp"
#include "support/gradient_check.hpp"
#include "uncproxy/error.hpp"
#include "uncproxy/mlp.hpp"
#include "uncproxy/rng.hpp"

using namespace uncproxy;

TEST_CASE("softmax examples") {
    const auto u = softmax(std::vector<double>{0.0, 0.0, 0.0});
    for (double v : u) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    const auto p = softmax(std::vector<double>{1.0, 2.0, 3.0});
    CHECK(p[0] == doctest::Approx(0.09003057317038046).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(0.24472847105479764).epsilon(1e-14));
    CHECK(p[2] == doctest::Approx(0.6652409557748219).epsilon(1e-14));
    // Large logits must not overflow.
    const auto big = softmax(std::vector<double>{1000.0, 1000.0});
    CHECK(big[0] == doctest::Approx(0.5));
    const auto shifted = softmax(std::vector<double>{1001.0, 1002.0, 1003.0});
    for (std::size_t c = 0; c < 3; ++c) CHECK(shifted[c] == doctest::Approx(p[c]).epsilon(1e-14));
}

TEST_CASE("analytic gradient matches central differences") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto pr = gradcheck::small_problem(seed);
        CHECK(gradcheck::max_relative_error(pr.params, pr.batch, 0.01, pr.masks) < 1e-4);
        CHECK(gradcheck::max_relative_error(pr.params, pr.batch, 0.0, {}) < 1e-4);
    }
}

TEST_CASE("loss on a hand-sized network") {
    NetworkParams net;
    net.layers.push_back({Matrix(2, 2, {1.0, 0.0, 0.0, 1.0}), {0.0, 0.0}, Activation::identity});
    const Batch batch{Matrix(1, 2, {0.0, 0.0}), Matrix(1, 2, {1.0, 0.0})};
    CHECK(loss(net, batch, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    // weight decay adds wd * ||theta||^2 = 0.5 * 2
    CHECK(loss(net, batch, 0.5) == doctest::Approx(std::log(2.0) + 1.0).epsilon(1e-15));
}

TEST_CASE("deterministic forward matches the loop-by-loop oracle") {
    const std::vector<std::size_t> sizes{2, 16, 16, 4};
    const auto net = init_params(sizes, 5);
    Rng rng(8);
    for (int i = 0; i < 20; ++i) {
        const std::vector<double> x{rng.normal(), rng.normal()};
        const auto got = forward(net, x);
        const auto want = brute::forward(net, x, nullptr);
        for (std::size_t c = 0; c < 4; ++c) CHECK(got[c] == doctest::Approx(want[c]).epsilon(1e-12));

        const auto masks = sample_dropout_masks(net, 0.5, 100 + i);
        const auto got_m = forward(net, x, masks);
        const auto want_m = brute::forward(net, x, &masks);
        for (std::size_t c = 0; c < 4; ++c) CHECK(got_m[c] == doctest::Approx(want_m[c]).epsilon(1e-12));
    }
}

TEST_CASE("all-ones masks reproduce the deterministic forward up to scaling") {
    NetworkParams net = init_params(std::vector<std::size_t>{3, 5, 2}, 3);
    const std::vector<double> x{0.3, -1.2, 0.7};
    const auto ones = all_ones_masks(net, 0.5);
    REQUIRE(ones.masks.size() == 1);
    const auto scaled = forward(net, x, ones);
    // Doubling the hidden activations: subtract bias, halve, compare.
    const auto plain = forward(net, x);
    for (std::size_t c = 0; c < 2; ++c)
        CHECK((scaled[c] - net.layers[1].bias[c]) / 2.0 == doctest::Approx(plain[c] - net.layers[1].bias[c]));
}

TEST_CASE("dropout masks are seeded and keep units with probability 1 - p") {
    const auto net = init_params(std::vector<std::size_t>{4, 1000, 1000, 2}, 1);
    const auto a = sample_dropout_masks(net, 0.3, 77);
    const auto b = sample_dropout_masks(net, 0.3, 77);
    const auto c = sample_dropout_masks(net, 0.3, 78);
    CHECK(a.masks == b.masks);
    CHECK(a.masks != c.masks);
    REQUIRE(a.masks.size() == 2);  // hidden activations only, never raw features

    // 10^6 draws; binomial z-score stays well inside a p = 0.001 two-sided band.
    std::size_t kept = 0, total = 0;
    for (std::uint64_t s = 0; s < 500; ++s)
        for (const auto& m : sample_dropout_masks(net, 0.3, s).masks)
            for (auto bit : m) {
                kept += bit;
                ++total;
            }
    const double n = static_cast<double>(total);
    const double z = (static_cast<double>(kept) - 0.7 * n) / std::sqrt(n * 0.7 * 0.3);
    CHECK(total == 1000000);
    CHECK(std::abs(z) < 3.29);
}

TEST_CASE("inverted dropout keeps the expected pre-activation") {
    NetworkParams net = init_params(std::vector<std::size_t>{2, 6, 3}, 11);
    const std::vector<double> x{0.8, -0.4};
    const auto trace = forward_trace(net, x, nullptr);
    const auto& h = trace.inputs[1];
    std::vector<double> sum(3, 0.0), sq(3, 0.0);
    const int draws = 10000;
    for (int s = 0; s < draws; ++s) {
        const auto z = forward(net, x, sample_dropout_masks(net, 0.5, s));
        for (std::size_t c = 0; c < 3; ++c) {
            sum[c] += z[c];
            sq[c] += z[c] * z[c];
        }
    }
    for (std::size_t c = 0; c < 3; ++c) {
        double expected = net.layers[1].bias[c];
        for (std::size_t j = 0; j < h.size(); ++j) expected += net.layers[1].weight(c, j) * h[j];
        const double m = sum[c] / draws;
        const double se = std::sqrt((sq[c] / draws - m * m) / draws);
        CHECK(std::abs(m - expected) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("mc_predict equals softmax of T oracle passes") {
    const auto net = init_params(std::vector<std::size_t>{3, 10, 10, 4}, 21);
    const std::vector<double> x{0.1, 0.9, -0.5};
    const auto mc = mc_predict(net, x, 8, 0.5, 555, "q");
    REQUIRE(mc.passes() == 8);
    for (std::size_t t = 0; t < 8; ++t) {
        const auto masks = sample_dropout_masks(net, 0.5, stream_seed(555, {stream_tag::mc_pass, t}));
        const auto want = softmax(brute::forward(net, x, &masks));
        for (std::size_t c = 0; c < 4; ++c) CHECK(mc.probs()(t, c) == doctest::Approx(want[c]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(mc_predict(net, x, 0, 0.5, 1), Error);
}

TEST_CASE("init is He-Gaussian with zero biases") {
    const auto net = init_params(std::vector<std::size_t>{200, 300, 2}, 4);
    double s2 = 0.0;
    for (double w : net.layers[0].weight.data()) s2 += w * w;
    const double var = s2 / static_cast<double>(net.layers[0].weight.data().size());
    CHECK(var == doctest::Approx(2.0 / 200.0).epsilon(0.03));
    for (const auto& l : net.layers)
        for (double b : l.bias) CHECK(b == 0.0);
    CHECK(net.layers.back().activation == Activation::identity);
    CHECK(net == init_params(std::vector<std::size_t>{200, 300, 2}, 4));
}

namespace {

Dataset blobs(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Dataset d{Matrix(n, 2), Matrix(n, 2), {}};
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % 2;
        d.features(i, 0) = (c ? 2.0 : -2.0) + 0.5 * rng.normal();
        d.features(i, 1) = 0.5 * rng.normal();
        d.soft_labels(i, c) = 1.0;
        d.sample_ids.push_back(std::to_string(i));
    }
    return d;
}

}  // namespace

TEST_CASE("training separates two blobs and is reproducible") {
    const Dataset d = blobs(400, 3);
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.seed = 9;
    const std::vector<std::size_t> sizes{2, 16, 2};
    const auto r = train(d, cfg, sizes);
    REQUIRE(r.loss_trace.size() == 10);
    CHECK(r.loss_trace.back() < r.loss_trace.front());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto z = forward(r.params, d.features.row(i));
        correct += (z[1] > z[0]) == (d.soft_labels(i, 1) == 1.0);
    }
    CHECK(static_cast<double>(correct) / d.size() >= 0.95);
    CHECK(train(d, cfg, sizes).params == r.params);
}

TEST_CASE("zero epochs returns the initialization") {
    const Dataset d = blobs(20, 1);
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 5;
    const std::vector<std::size_t> sizes{2, 4, 2};
    const auto r = train(d, cfg, sizes);
    CHECK(r.loss_trace.empty());
    CHECK(r.params == init_params(sizes, 5));
}

TEST_CASE("divergence is reported with the epoch") {
    const Dataset d = blobs(40, 2);
    TrainConfig cfg;
    cfg.learning_rate = 1e200;
    cfg.epochs = 3;
    const std::vector<std::size_t> sizes{2, 8, 2};
    try {
        train(d, cfg, sizes);
        FAIL("expected divergence");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::training_diverged);
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}

TEST_CASE("invalid training configuration") {
    TrainConfig cfg;
    cfg.dropout_p = 1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.dropout_p = 0.5;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    TrainConfig d;
    CHECK(d.effective_weight_decay(100) == doctest::Approx(0.5 / 200.0));
}
