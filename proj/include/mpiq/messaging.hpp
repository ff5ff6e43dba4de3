// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>

#include "mpiq/payload.hpp"
#include "mpiq/runtime.hpp"

namespace mpiq {

/// Tags at or above this value are used by the runtime's own control
/// traffic (PING sequences, barriers, shutdown).
inline constexpr std::uint32_t kReservedTagBase = 0x80000000u;

inline constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

/// MPIQ_Send: delivers `block` as one EXECUTE frame to the monitor of `dest`
/// and returns once that monitor acknowledges receipt (not execution).
/// A NAK from the monitor is re-raised as the error it names.
void mpiq_send(RuntimeHandle& handle, const DeviceIdentifier& dest, std::uint32_t tag, const WaveformBlock& block);

/// MPIQ_Recv: blocks for the RESULT matching (source, tag). Non-matching
/// results stay queued. A result longer than `max_len` bytes raises
/// TruncationError and remains available for a larger receive.
ShotTable mpiq_recv(RuntimeHandle& handle, const DeviceIdentifier& source, std::uint32_t tag,
                    std::size_t max_len = kUnlimited);

/// Split-phase pieces of mpiq_send, used by windowed collective fan-out.
/// send_execute validates and transmits; await_execute_ack waits for the
/// matching ACK.
void send_execute(RuntimeHandle& handle, QRank qrank, std::uint32_t tag, const WaveformBlock& block);
void await_execute_ack(RuntimeHandle& handle, QRank qrank, std::uint32_t tag);

/// Receives and decodes the RESULT for (qrank, tag) before `deadline`.
ShotTable recv_result(RuntimeHandle& handle, QRank qrank, std::uint32_t tag, Mailbox::Clock::time_point deadline,
                      std::size_t max_len = kUnlimited);

/// Opaque byte transfer between classical ranks. A self-send is buffered
/// locally.
void classical_send(RuntimeHandle& handle, Rank peer, std::uint32_t tag, ByteView bytes);
Bytes classical_recv(RuntimeHandle& handle, Rank peer, std::uint32_t tag, std::size_t max_len = kUnlimited);

}  // namespace mpiq
