#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <set>

#include "uncproxy/error.hpp"
#include "uncproxy/io.hpp"
#include "uncproxy/mlp.hpp"
#include "uncproxy/rng.hpp"
#include "uncproxy/serialize.hpp"

using namespace uncproxy;

TEST_CASE("SplitMix64 reference outputs") {
    SplitMix64 g(1234567);
    CHECK(g() == 6457827717110365317ULL);
    CHECK(g() == 3203168211198807973ULL);
}

TEST_CASE("streams are reproducible and distinct") {
    Rng a(7, {1, 2}), b(7, {1, 2}), c(7, {2, 1});
    for (int i = 0; i < 10; ++i) {
        const auto va = a.next();
        CHECK(va == b.next());
        CHECK(va != c.next());
    }
    Rng u(3);
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double z = u.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(std::abs(sum / 1e5) < 0.02);
    CHECK(std::abs(sq / 1e5 - 1.0) < 0.02);
    std::set<std::size_t> seen;
    for (int i = 0; i < 1000; ++i) seen.insert(u.index(5));
    CHECK(seen == std::set<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("doubles round-trip through text") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.0, 0.0}) CHECK(io::parse_double(io::format_double(v), 1) == v);
    CHECK_THROWS_AS(io::parse_double("1.5x", 3), Error);
    CHECK_THROWS_AS(io::parse_int("", 3), Error);
    CHECK(io::split_lines("a\r\nb\n\nc").size() == 4);
}

TEST_CASE("network parameters round-trip through JSON") {
    const auto net = init_params(std::vector<std::size_t>{3, 7, 2}, 19);
    const auto back = params_from_json(Json::parse(params_to_json(net).dump()));
    CHECK(back == net);

    Json broken = params_to_json(net);
    broken["layers"][0]["weights"].erase(0);
    try {
        params_from_json(broken);
        FAIL("expected format error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::format);
    }
}

TEST_CASE("feature tables round-trip") {
    const std::vector<std::string> ids{"p", "q"};
    const Matrix f(2, 3, {0.1, -2.0, 3.5, 1e-9, 0.0, 7.25});
    const auto t = parse_features(format_features(ids, f));
    CHECK(t.ids == ids);
    CHECK(t.features == f);
    CHECK_THROWS_AS(parse_features("id,f_0\np,1\nq\n"), Error);
}

TEST_CASE("atomic write replaces the file") {
    const auto dir = std::filesystem::temp_directory_path() / "uncproxy_io_test";
    std::filesystem::create_directories(dir);
    io::write_file_atomic(dir / "a.txt", "one");
    io::write_file_atomic(dir / "a.txt", "two");
    CHECK(io::read_file(dir / "a.txt") == "two");
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(io::read_file(dir / "missing.txt"), Error);
}
