// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "mpiq/domain.hpp"
#include "mpiq/payload.hpp"
#include "mpiq/shots.hpp"

namespace mpiq {

/// Equal-granularity cut of an n-qubit GHZ chain into m fragments.
struct CutPlan {
    std::uint32_t n_total = 0;
    std::uint32_t m_fragments = 0;
    std::vector<std::uint32_t> sizes;       // larger fragments first
    std::vector<std::uint32_t> boundaries;  // m-1 cumulative prefixes

    bool operator==(const CutPlan&) const = default;
};

/// r = n mod m fragments of ceil(n/m) qubits, then m-r of floor(n/m).
/// Throws RangeError unless 1 <= m <= n.
CutPlan cut_equal(std::uint32_t n, std::uint32_t m);

/// Fragment i becomes a local GHZ block addressed to devices[i % k]. Throws
/// CapacityError when a fragment exceeds its device's qubit count.
std::vector<WaveformBlock> compile_fragments(const CutPlan& plan, std::uint32_t shots,
                                             const std::vector<DeviceIdentifier>& devices,
                                             const std::vector<std::uint32_t>& device_qubits);

/// Same, targeting qranks 0..k-1 of `domain` round-robin.
std::vector<WaveformBlock> compile_fragments(const CutPlan& plan, std::uint32_t shots, const HybridDomain& domain);

/// Rebuilds global GHZ samples by aligning every fragment's outcome on each
/// shot to fragment 0's value. Tables must be in fragment order.
/// ShapeError on unequal shot counts, ReconstructionError on a fragment
/// string that is neither all zeros nor all ones.
ShotTable reconstruct(const std::vector<ShotTable>& fragment_tables);

struct GhzSummary {
    std::uint64_t zeros = 0;
    std::uint64_t ones = 0;
    std::uint64_t other = 0;

    std::uint64_t total() const noexcept { return zeros + ones + other; }
    bool valid() const noexcept { return other == 0 && total() > 0; }
    double p_zero() const noexcept { return total() ? static_cast<double>(zeros) / static_cast<double>(total()) : 0.0; }
    /// Pearson statistic of (zeros, ones) against a fair coin, df = 1.
    double chi_square_fair() const noexcept;
};

/// Chi-square critical value for df = 1 at significance 0.001.
inline constexpr double kChiSquareCritical001 = 10.828;

/// Counts 0^n, 1^n and anything else (including wrong-width rows).
GhzSummary validate_ghz_output(const ShotTable& table, std::uint32_t n);

}  // namespace mpiq
