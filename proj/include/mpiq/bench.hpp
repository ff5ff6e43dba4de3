// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mpiq/ghz_cutting.hpp"
#include "mpiq/runtime.hpp"

namespace mpiq {

struct BenchResult {
    std::uint32_t n_total = 0;
    std::uint32_t m_fragments = 0;
    std::uint32_t nodes = 0;
    std::uint32_t shots = 0;
    std::uint32_t delay_ms = 0;
    double t_serial_s = 0.0;
    double t_parallel_s = 0.0;
    double speedup = 0.0;
    bool valid = false;

    bool operator==(const BenchResult&) const = default;
};

/// Timing plus the reconstructed global table of one run.
struct RunOutcome {
    double seconds = 0.0;
    ShotTable global;
    GhzSummary summary;
    bool valid = false;
};

/// Every fragment goes to qrank 0, one send/execute/recv after another.
RunOutcome run_serial(RuntimeHandle& handle, const CutPlan& plan, std::uint32_t shots);

/// Scatter to the first `nodes` qranks (round-robin when m > nodes), QQ
/// barrier, execute, gather, reconstruct and validate. The clock covers
/// everything from scatter to validation.
RunOutcome run_parallel(RuntimeHandle& handle, const CutPlan& plan, std::uint32_t nodes, std::uint32_t shots);

/// S = t_serial / t_parallel. Throws RangeError unless both are positive.
double compute_speedup(double t_serial, double t_parallel);

enum class BenchMode { Serial, Parallel, Both };

/// One row. t_parallel_s (or t_serial_s) stays 0 and speedup stays 0 when
/// the mode skips that half.
BenchResult run_bench_row(RuntimeHandle& handle, std::uint32_t n_total, std::uint32_t m_fragments,
                          std::uint32_t nodes, std::uint32_t shots, std::uint32_t delay_ms, BenchMode mode);

inline constexpr const char* kBenchCsvHeader =
    "n_total,m_fragments,nodes,shots,delay_ms,t_serial_s,t_parallel_s,speedup,valid";

/// Shortest round-trip decimal spelling of a double.
std::string format_double(double v);

std::string format_results_csv(const std::vector<BenchResult>& rows);
std::vector<BenchResult> parse_results_csv(const std::string& text);

/// Writes the CSV. RangeError for no rows, IoError when `path` cannot be
/// written.
void emit_results(const std::vector<BenchResult>& rows, const std::filesystem::path& path);
std::vector<BenchResult> load_results(const std::filesystem::path& path);

/// Human-readable table for stdout; invalid rows are marked.
std::string format_results_table(const std::vector<BenchResult>& rows);

}  // namespace mpiq
