// SPDX-License-Identifier: Apache-2.0
#include "mpiq/ghz_cutting.hpp"

#include <algorithm>

namespace mpiq {

CutPlan cut_equal(std::uint32_t n, std::uint32_t m) {
    if (m < 1 || m > n) {
        throw RangeError("cannot cut " + std::to_string(n) + " qubits into " + std::to_string(m) + " fragments");
    }
    CutPlan plan{n, m, {}, {}};
    const std::uint32_t base = n / m, extra = n % m;
    std::uint32_t prefix = 0;
    for (std::uint32_t i = 0; i < m; ++i) {
        const std::uint32_t size = base + (i < extra ? 1 : 0);
        plan.sizes.push_back(size);
        prefix += size;
        if (i + 1 < m) plan.boundaries.push_back(prefix);
    }
    return plan;
}

std::vector<WaveformBlock> compile_fragments(const CutPlan& plan, std::uint32_t shots,
                                             const std::vector<DeviceIdentifier>& devices,
                                             const std::vector<std::uint32_t>& device_qubits) {
    if (devices.empty() || devices.size() != device_qubits.size()) {
        throw ShapeError("need one qubit count per target device");
    }
    if (plan.sizes.size() != plan.m_fragments) throw ShapeError("cut plan sizes do not match fragment count");
    std::vector<WaveformBlock> blocks;
    blocks.reserve(plan.sizes.size());
    for (std::size_t i = 0; i < plan.sizes.size(); ++i) {
        const auto k = i % devices.size();
        if (plan.sizes[i] > device_qubits[k]) {
            throw CapacityError("fragment " + std::to_string(i) + " needs " + std::to_string(plan.sizes[i]) +
                                " qubits, " + to_string(devices[k]) + " has " + std::to_string(device_qubits[k]));
        }
        blocks.push_back(make_waveform_block(devices[k], qsim::build_ghz_circuit(plan.sizes[i]), shots));
    }
    return blocks;
}

std::vector<WaveformBlock> compile_fragments(const CutPlan& plan, std::uint32_t shots, const HybridDomain& domain) {
    return compile_fragments(plan, shots, domain.q_map, domain.qubit_counts);
}

namespace {

int uniform_bit(const std::string& s) {
    if (s.empty()) return -1;
    const char c = s.front();
    if (c != '0' && c != '1') return -1;
    return std::all_of(s.begin(), s.end(), [c](char x) { return x == c; }) ? c - '0' : -1;
}

}  // namespace

ShotTable reconstruct(const std::vector<ShotTable>& fragment_tables) {
    if (fragment_tables.empty()) throw ShapeError("no fragment tables to reconstruct");
    const auto shots = fragment_tables.front().shots();
    std::uint32_t width = 0;
    for (std::size_t k = 0; k < fragment_tables.size(); ++k) {
        const auto& t = fragment_tables[k];
        if (t.shots() != shots) {
            throw ShapeError("fragment " + std::to_string(k) + " has " + std::to_string(t.shots()) +
                             " shots, fragment 0 has " + std::to_string(shots));
        }
        width += t.width;
    }
    if (width > UINT16_MAX) throw ShapeError("reconstructed width exceeds 65535");

    ShotTable global{0, static_cast<std::uint16_t>(width), {}};
    global.bitstrings.reserve(shots);
    for (std::uint32_t j = 0; j < shots; ++j) {
        int v0 = -1;
        for (std::size_t k = 0; k < fragment_tables.size(); ++k) {
            const auto& row = fragment_tables[k].bitstrings[j];
            const int v = uniform_bit(row);
            if (v < 0 || row.size() != fragment_tables[k].width) {
                throw ReconstructionError("fragment " + std::to_string(k) + " shot " + std::to_string(j) +
                                          " is not a GHZ outcome: \"" + row + "\"");
            }
            if (k == 0) v0 = v;
        }
        global.bitstrings.emplace_back(width, static_cast<char>('0' + v0));
    }
    return global;
}

double GhzSummary::chi_square_fair() const noexcept {
    const double n = static_cast<double>(zeros + ones);
    if (n == 0) return 0.0;
    const double e = n / 2.0;
    const double dz = static_cast<double>(zeros) - e, d1 = static_cast<double>(ones) - e;
    return (dz * dz + d1 * d1) / e;
}

GhzSummary validate_ghz_output(const ShotTable& table, std::uint32_t n) {
    GhzSummary s;
    for (const auto& row : table.bitstrings) {
        const int v = row.size() == n ? uniform_bit(row) : -1;
        if (v == 0) {
            ++s.zeros;
        } else if (v == 1) {
            ++s.ones;
        } else {
            ++s.other;
        }
    }
    return s;
}

}  // namespace mpiq
