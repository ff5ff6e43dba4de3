// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpiq/messaging.hpp"

namespace mpiq {

/// Qubit-to-device mapping array: group i (a list of global qubit indices)
/// goes to qrank i.
struct SendQ {
    std::vector<std::vector<std::uint32_t>> groups;

    bool operator==(const SendQ&) const = default;
};

/// Contiguous partition: group 0 = qubits 0..s0-1, group 1 = the next s1,
/// and so on. Throws ShapeError when the sizes do not sum to n_qubits.
SendQ build_send_q(std::uint32_t n_qubits, const std::vector<std::uint32_t>& fragment_sizes);

/// Throws MappingError unless the groups are disjoint and cover exactly
/// 0..n-1 for some n. Returns n.
std::uint32_t validate_send_q(const SendQ& send_q);

struct GatherResult {
    std::vector<ShotTable> tables;  // ordered by qrank
    bool complete = false;
    std::vector<QRank> missing;
    std::vector<DeviceIdentifier> missing_devices;

    bool operator==(const GatherResult&) const = default;
};

/// Raised by a fan-out that could not reach every target. Targets before
/// the failure keep what they received.
class CollectiveError : public Error {
public:
    CollectiveError(const std::string& what, std::vector<DeviceIdentifier> failed, std::vector<ErrorCode> causes)
        : Error(ErrorCode::Collective, what), failed(std::move(failed)), causes(std::move(causes)) {}

    std::vector<DeviceIdentifier> failed;
    std::vector<ErrorCode> causes;
};

/// MPIQ_Bcast: the same block to every target, each stamped with its own
/// device address. Returns after every target ACKs.
void mpiq_bcast(RuntimeHandle& handle, const WaveformBlock& block_template, const std::vector<QRank>& targets,
                std::uint32_t tag = 0);

/// MPIQ_Scatter: block i to qrank i. Each block must have exactly as many
/// channels as group i has qubits.
void mpiq_scatter(RuntimeHandle& handle, const std::vector<WaveformBlock>& global_blocks, const SendQ& send_q,
                  std::uint32_t tag = 0);

/// MPIQ_Gather: one RESULT per source with `tag`, ordered by qrank. A
/// source that does not answer in time is listed in `missing`.
GatherResult mpiq_gather(RuntimeHandle& handle, const std::vector<QRank>& sources, std::uint32_t tag);

/// MPIQ_Allgather: rank 0 gathers, then sends the serialized result to every
/// other classical rank. Collective over classical ranks.
GatherResult mpiq_allgather(RuntimeHandle& handle, const std::vector<QRank>& sources, std::uint32_t tag);

/// count u16 | { qrank u32 | RESULT payload }*
Bytes serialize_gather_result(const GatherResult& result);
GatherResult deserialize_gather_result(ByteView bytes, const std::vector<QRank>& expected_sources);

}  // namespace mpiq
