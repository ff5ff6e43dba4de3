// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mpiq {

/// Per-shot measurement outcomes. Character i of each bitstring is the
/// value of qubit i (qubit 0 leftmost).
struct ShotTable {
    std::uint32_t qrank = 0;
    std::uint16_t width = 0;
    std::vector<std::string> bitstrings;

    std::uint32_t shots() const noexcept { return static_cast<std::uint32_t>(bitstrings.size()); }

    bool operator==(const ShotTable&) const = default;
};

}  // namespace mpiq
