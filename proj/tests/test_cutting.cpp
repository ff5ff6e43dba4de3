// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <numeric>

#include "mpiq/ghz_cutting.hpp"

using namespace mpiq;

TEST_CASE("equal-granularity cut") {
    CHECK(cut_equal(40, 10).sizes == std::vector<std::uint32_t>(10, 4));
    CHECK(cut_equal(480, 24).sizes == std::vector<std::uint32_t>(24, 20));
    const auto p = cut_equal(7, 3);
    CHECK(p.sizes == std::vector<std::uint32_t>{3, 2, 2});
    CHECK(p.boundaries == std::vector<std::uint32_t>{3, 5});
    CHECK(cut_equal(5, 1).boundaries.empty());
    CHECK_THROWS_AS(cut_equal(3, 4), RangeError);
    CHECK_THROWS_AS(cut_equal(3, 0), RangeError);
}

TEST_CASE("cut partition is exact for every m <= n <= 64") {
    for (std::uint32_t n = 1; n <= 64; ++n) {
        for (std::uint32_t m = 1; m <= n; ++m) {
            const auto p = cut_equal(n, m);
            REQUIRE(p.sizes.size() == m);
            REQUIRE(p.boundaries.size() == m - 1);
            REQUIRE(std::accumulate(p.sizes.begin(), p.sizes.end(), 0u) == n);
            const std::uint32_t lo = n / m, hi = (n + m - 1) / m;
            REQUIRE(std::count(p.sizes.begin(), p.sizes.end(), hi) == (n % m == 0 ? m : n % m));
            for (std::size_t i = 0; i < m; ++i) {
                REQUIRE((p.sizes[i] == lo || p.sizes[i] == hi));
                if (i > 0) REQUIRE(p.sizes[i] <= p.sizes[i - 1]);
            }
        }
    }
}

TEST_CASE("fragment compilation") {
    const std::vector<DeviceIdentifier> devs{{"127.0.0.1", 1, 0}, {"127.0.0.1", 2, 1}, {"127.0.0.1", 3, 2}};
    const auto blocks = compile_fragments(cut_equal(12, 3), 100, devs, {4, 4, 4});
    REQUIRE(blocks.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(blocks[i].device_id == i);
        CHECK(qsim::decode_gate_stream(blocks[i].channels) == qsim::build_ghz_circuit(4));
        CHECK(blocks[i].shots == 100);
    }
    std::vector<DeviceIdentifier> ten;
    for (std::uint32_t i = 0; i < 10; ++i) ten.push_back({"127.0.0.1", static_cast<std::uint16_t>(7000 + i), i});
    CHECK(compile_fragments(cut_equal(40, 10), 10, ten, std::vector<std::uint32_t>(10, 4)).size() == 10);
    CHECK_THROWS_AS(compile_fragments(cut_equal(40, 10), 10, ten, std::vector<std::uint32_t>(10, 3)), CapacityError);
    // Round-robin beyond the device count.
    const auto rr = compile_fragments(cut_equal(8, 4), 1, {devs[0], devs[1]}, {2, 2});
    CHECK(rr[2].device_id == 0);
    CHECK(rr[3].device_id == 1);
}

TEST_CASE("reconstruction aligns every fragment to fragment 0") {
    const std::vector<ShotTable> t{{0, 4, {"0000", "1111"}}, {1, 4, {"1111", "0000"}}, {2, 4, {"0000", "0000"}}};
    const auto g = reconstruct(t);
    CHECK(g.width == 12);
    CHECK(g.bitstrings == std::vector<std::string>{"000000000000", "111111111111"});

    auto bad = t;
    bad[1].bitstrings[1] = "0100";
    try {
        reconstruct(bad);
        FAIL("expected ReconstructionError");
    } catch (const ReconstructionError& e) {
        CHECK(std::string(e.what()).find("fragment 1 shot 1") != std::string::npos);
    }
    auto uneven = t;
    uneven[2].bitstrings.pop_back();
    CHECK_THROWS_AS(reconstruct(uneven), ShapeError);
}

TEST_CASE("reconstructed fragments match a monolithic simulation") {
    for (std::uint32_t n : {8u, 12u, 16u}) {
        for (std::uint32_t m : {2u, 3u, 4u}) {
            const auto plan = cut_equal(n, m);
            std::vector<ShotTable> tables;
            for (std::uint32_t k = 0; k < m; ++k) {
                tables.push_back(qsim::simulate(qsim::build_ghz_circuit(plan.sizes[k]), 10000, 100 * n + k));
            }
            const auto dist = validate_ghz_output(reconstruct(tables), n);
            const auto mono = validate_ghz_output(qsim::simulate(qsim::build_ghz_circuit(n), 10000, n), n);
            CHECK(dist.other == 0);
            CHECK(mono.other == 0);
            // 2x2 contingency test of (zeros, ones) between the two samples.
            const double a = dist.zeros, b = dist.ones, c = mono.zeros, d = mono.ones, N = a + b + c + d;
            const double chi = N * (a * d - b * c) * (a * d - b * c) / ((a + b) * (c + d) * (a + c) * (b + d));
            CHECK(chi < kChiSquareCritical001);
            CHECK(std::abs(dist.p_zero() - 0.5) <= 0.015);
        }
    }
}

TEST_CASE("GHZ output validation counts") {
    ShotTable t{0, 3, {"000", "111", "000"}};
    CHECK(validate_ghz_output(t, 3).other == 0);
    CHECK(validate_ghz_output(t, 3).zeros == 2);
    t.bitstrings.push_back("010");
    CHECK(validate_ghz_output(t, 3).other == 1);
    CHECK_FALSE(validate_ghz_output(t, 3).valid());
    CHECK(validate_ghz_output(t, 4).other == 4);
}
