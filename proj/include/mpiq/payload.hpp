// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpiq/bytes.hpp"
#include "mpiq/domain.hpp"
#include "mpiq/error.hpp"
#include "mpiq/qsim.hpp"
#include "mpiq/shots.hpp"

namespace mpiq {

/// Pre-compiled payload for one device, organized node -> device -> qubit.
/// Each channel carries the compiled stream for one local qubit.
struct WaveformBlock {
    std::string node_ip;
    std::uint32_t device_id = 0;
    std::vector<qsim::ChannelStream> channels;
    std::uint32_t shots = 1;
    std::uint64_t circuit_digest = 0;

    bool operator==(const WaveformBlock&) const = default;
};

/// FNV-1a over each channel's (qubit_index u16, stream_len u32, stream).
std::uint64_t compute_block_digest(const std::vector<qsim::ChannelStream>& channels);

/// Compiles `circuit` into a block addressed to `dev`.
WaveformBlock make_waveform_block(const DeviceIdentifier& dev, const qsim::Circuit& circuit, std::uint32_t shots);

/// Throws ShapeError for an empty block, QubitRangeError for an index
/// >= `device_qubits` or a repeated index.
void validate_block(const WaveformBlock& block, std::uint32_t device_qubits);

// EXECUTE payload:
//   shots u32 | num_channels u16 | { qubit_index u16 | stream_len u32 | bytes }* | circuit_digest u64
Bytes encode_execute_payload(const WaveformBlock& block);
WaveformBlock decode_execute_payload(ByteView payload);

// RESULT payload: shots u32 | width u16 | packed bitstrings, one
// ceil(width/8)-byte row per shot, bit i of a row at byte i/8, mask 0x80 >> (i%8).
Bytes encode_result_payload(const ShotTable& table);
ShotTable decode_result_payload(ByteView payload, std::uint32_t qrank);

// ACK payload: status u8 (0 = ok, otherwise an ErrorCode) |
//   when status != 0: text_len u32 | utf-8 text
//   after a SYNC_RELEASE with status 0: release_local_ns u64
struct AckInfo {
    ErrorCode status = ErrorCode::Ok;
    std::string text;
    std::uint64_t release_local_ns = 0;
};

Bytes encode_ack(const AckInfo& ack);
Bytes encode_release_ack(std::uint64_t release_local_ns);
AckInfo decode_ack(ByteView payload);

Bytes encode_u32(std::uint32_t v);
Bytes encode_u64(std::uint64_t v);
std::uint32_t decode_u32(ByteView payload);
std::uint64_t decode_u64(ByteView payload);

}  // namespace mpiq
