// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "mpiq/bench.hpp"
#include "support.hpp"

using namespace mpiq;
using namespace std::chrono_literals;

TEST_CASE("speedup arithmetic") {
    CHECK(std::abs(compute_speedup(13.29, 2.57) - 5.18) <= 0.01);
    CHECK(std::abs(compute_speedup(177.74, 9.47) - 18.76) <= 0.01);
    CHECK(compute_speedup(3.5, 3.5) == 1.0);
    CHECK_THROWS_AS(compute_speedup(0.0, 1.0), RangeError);
    CHECK_THROWS_AS(compute_speedup(1.0, -2.0), RangeError);
}

TEST_CASE("CSV emission and parsing") {
    const auto dir = std::filesystem::temp_directory_path() / ("mpiq_bench_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    const BenchResult one{40, 10, 10, 1000, 0, 13.29, 2.57, 13.29 / 2.57, true};
    emit_results({one}, dir / "one.csv");
    std::ifstream in(dir / "one.csv");
    std::string header, row, extra;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == kBenchCsvHeader);
    CHECK_FALSE(std::getline(in, extra));

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(1e-6, 1e3);
    std::vector<BenchResult> rows;
    for (int i = 0; i < 50; ++i) {
        rows.push_back({static_cast<std::uint32_t>(rng() % 500), static_cast<std::uint32_t>(rng() % 30),
                        static_cast<std::uint32_t>(rng() % 30), static_cast<std::uint32_t>(rng() % 100000),
                        static_cast<std::uint32_t>(rng() % 300), u(rng), u(rng), u(rng), rng() % 2 == 0});
    }
    emit_results(rows, dir / "many.csv");
    CHECK(load_results(dir / "many.csv") == rows);

    CHECK_THROWS_AS(emit_results({}, dir / "empty.csv"), RangeError);
    CHECK_THROWS_AS(emit_results({one}, dir / "missing" / "x.csv"), IoError);
    CHECK_THROWS_AS(parse_results_csv("bogus\n"), DecodeError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("serial time grows with the fragment count") {
    test::MonitorCluster c(1, 4, 1, 30ms);
    auto h = RuntimeHandle::create(test::options_for(c.config));
    double last = 0.0;
    for (std::uint32_t m : {1u, 2u, 4u, 8u}) {
        const auto out = run_serial(*h, cut_equal(4 * m, m), 50);
        CHECK(out.valid);
        CHECK(out.seconds >= 0.03 * m);
        CHECK(out.seconds >= last);
        last = out.seconds;
    }
}

TEST_CASE("parallel runs validate, including round-robin placement") {
    test::MonitorCluster c(3, 4, 2, 10ms);
    auto h = RuntimeHandle::create(test::options_for(c.config));
    const auto p = run_parallel(*h, cut_equal(12, 3), 3, 200);
    CHECK(p.valid);
    CHECK(p.global.width == 12);
    const auto rr = run_parallel(*h, cut_equal(14, 5), 2, 200);
    CHECK(rr.valid);
    CHECK(rr.summary.total() == 200);
    CHECK_THROWS_AS(run_parallel(*h, cut_equal(12, 3), 4, 10), ShapeError);

    const auto row = run_bench_row(*h, 12, 3, 3, 100, 10, BenchMode::Both);
    CHECK(row.valid);
    CHECK(row.speedup == doctest::Approx(row.t_serial_s / row.t_parallel_s));
}
