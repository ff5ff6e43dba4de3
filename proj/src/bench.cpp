// SPDX-License-Identifier: Apache-2.0
#include "mpiq/bench.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <fstream>
#include <sstream>

#include "mpiq/collectives.hpp"
#include "mpiq/messaging.hpp"

namespace mpiq {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Each run gets a fresh block of user tags so stale results never match.
std::uint32_t next_tag_base() {
    static std::atomic<std::uint32_t> counter{0};
    return 0x100000u + (counter.fetch_add(1) % 0x7000u) * 0x10000u;
}

void finish(RunOutcome& out, std::vector<ShotTable> tables, std::uint32_t n_total) {
    try {
        out.global = reconstruct(tables);
        out.summary = validate_ghz_output(out.global, n_total);
        out.valid = out.summary.valid();
    } catch (const ReconstructionError&) {
        out.valid = false;
    }
}

}  // namespace

RunOutcome run_serial(RuntimeHandle& handle, const CutPlan& plan, std::uint32_t shots) {
    handle.require_live();
    const auto& world = handle.world();
    if (world.quantum_size() == 0) throw ShapeError("serial run needs one monitor");
    const auto blocks = compile_fragments(plan, shots, {world.q_map[0]}, {world.qubit_counts[0]});
    const auto base = next_tag_base();

    RunOutcome out;
    std::vector<ShotTable> tables;
    const auto t0 = Clock::now();
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto tag = base + static_cast<std::uint32_t>(i);
        mpiq_send(handle, world.q_map[0], tag, blocks[i]);
        tables.push_back(mpiq_recv(handle, world.q_map[0], tag));
    }
    finish(out, std::move(tables), plan.n_total);
    out.seconds = seconds_since(t0);
    return out;
}

RunOutcome run_parallel(RuntimeHandle& handle, const CutPlan& plan, std::uint32_t nodes, std::uint32_t shots) {
    handle.require_live();
    const auto& world = handle.world();
    if (nodes < 1 || nodes > world.quantum_size()) {
        throw ShapeError(std::to_string(nodes) + " nodes requested, " + std::to_string(world.quantum_size()) +
                         " monitors available");
    }
    const std::vector<DeviceIdentifier> devices(world.q_map.begin(), world.q_map.begin() + nodes);
    const std::vector<std::uint32_t> qubits(world.qubit_counts.begin(), world.qubit_counts.begin() + nodes);
    const auto blocks = compile_fragments(plan, shots, devices, qubits);
    const auto used = std::min<std::size_t>(nodes, blocks.size());
    std::vector<QRank> monitors;
    for (std::size_t q = 0; q < used; ++q) monitors.push_back(static_cast<QRank>(q));
    const auto base = next_tag_base();

    RunOutcome out;
    std::vector<ShotTable> tables;
    const auto t0 = Clock::now();
    quantum_barrier_arm(handle, monitors);
    if (blocks.size() <= nodes) {
        mpiq_scatter(handle, blocks, build_send_q(plan.n_total, plan.sizes), base);
    } else {
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            mpiq_send(handle, devices[i % nodes], base + static_cast<std::uint32_t>(i), blocks[i]);
        }
    }
    quantum_barrier_release(handle, monitors);
    if (blocks.size() <= nodes) {
        auto g = mpiq_gather(handle, monitors, base);
        if (!g.complete) {
            std::string names;
            for (const auto& d : g.missing_devices) names += " " + to_string(d);
            throw TimeoutError("gather incomplete, missing:" + names);
        }
        tables = std::move(g.tables);
    } else {
        const auto deadline = handle.deadline();
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            tables.push_back(recv_result(handle, static_cast<QRank>(i % nodes), base + static_cast<std::uint32_t>(i),
                                         deadline));
        }
    }
    finish(out, std::move(tables), plan.n_total);
    out.seconds = seconds_since(t0);
    return out;
}

double compute_speedup(double t_serial, double t_parallel) {
    if (!(t_serial > 0.0) || !(t_parallel > 0.0)) {
        throw RangeError("speedup needs positive times, got " + format_double(t_serial) + " and " +
                         format_double(t_parallel));
    }
    return t_serial / t_parallel;
}

BenchResult run_bench_row(RuntimeHandle& handle, std::uint32_t n_total, std::uint32_t m_fragments,
                          std::uint32_t nodes, std::uint32_t shots, std::uint32_t delay_ms, BenchMode mode) {
    const auto plan = cut_equal(n_total, m_fragments);
    BenchResult row{n_total, m_fragments, nodes, shots, delay_ms, 0.0, 0.0, 0.0, true};
    if (mode != BenchMode::Parallel) {
        const auto s = run_serial(handle, plan, shots);
        row.t_serial_s = s.seconds;
        row.valid = row.valid && s.valid;
    }
    if (mode != BenchMode::Serial) {
        const auto p = run_parallel(handle, plan, nodes, shots);
        row.t_parallel_s = p.seconds;
        row.valid = row.valid && p.valid;
    }
    if (mode == BenchMode::Both) row.speedup = compute_speedup(row.t_serial_s, row.t_parallel_s);
    return row;
}

std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string format_results_csv(const std::vector<BenchResult>& rows) {
    std::string out = std::string(kBenchCsvHeader) + "\n";
    for (const auto& r : rows) {
        out += std::to_string(r.n_total) + "," + std::to_string(r.m_fragments) + "," + std::to_string(r.nodes) + "," +
               std::to_string(r.shots) + "," + std::to_string(r.delay_ms) + "," + format_double(r.t_serial_s) + "," +
               format_double(r.t_parallel_s) + "," + format_double(r.speedup) + "," + (r.valid ? "true" : "false") +
               "\n";
    }
    return out;
}

namespace {

template <typename T>
T parse_field(const std::string& s, std::size_t line) {
    T v{};
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
        throw DecodeError("line " + std::to_string(line) + ": bad field '" + s + "'");
    }
    return v;
}

}  // namespace

std::vector<BenchResult> parse_results_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kBenchCsvHeader) throw DecodeError("missing CSV header");
    std::vector<BenchResult> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() != 9) throw DecodeError("line " + std::to_string(lineno) + ": expected 9 fields");
        BenchResult r;
        r.n_total = parse_field<std::uint32_t>(f[0], lineno);
        r.m_fragments = parse_field<std::uint32_t>(f[1], lineno);
        r.nodes = parse_field<std::uint32_t>(f[2], lineno);
        r.shots = parse_field<std::uint32_t>(f[3], lineno);
        r.delay_ms = parse_field<std::uint32_t>(f[4], lineno);
        r.t_serial_s = parse_field<double>(f[5], lineno);
        r.t_parallel_s = parse_field<double>(f[6], lineno);
        r.speedup = parse_field<double>(f[7], lineno);
        if (f[8] != "true" && f[8] != "false") throw DecodeError("line " + std::to_string(lineno) + ": bad valid flag");
        r.valid = f[8] == "true";
        rows.push_back(r);
    }
    return rows;
}

void emit_results(const std::vector<BenchResult>& rows, const std::filesystem::path& path) {
    if (rows.empty()) throw RangeError("no benchmark rows to emit");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << format_results_csv(rows);
    out.flush();
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::vector<BenchResult> load_results(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_results_csv(ss.str());
}

std::string format_results_table(const std::vector<BenchResult>& rows) {
    std::ostringstream out;
    out << "  n    m  nodes  shots  delay_ms   t_serial_s  t_parallel_s   speedup  valid\n";
    char line[160];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%3u  %3u  %5u  %5u  %8u  %11.4f  %12.4f  %8.3f  %s\n", r.n_total,
                      r.m_fragments, r.nodes, r.shots, r.delay_ms, r.t_serial_s, r.t_parallel_s, r.speedup,
                      r.valid ? "yes" : "NO (excluded)");
        out << line;
    }
    return out.str();
}

}  // namespace mpiq
