// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <utility>

#include "mpiq/bytes.hpp"

namespace mpiq {

enum class MsgType : std::uint8_t {
    Execute = 1,
    Result = 2,
    SyncReady = 3,
    SyncRelease = 4,
    Ping = 5,
    Pong = 6,
    Shutdown = 7,
    Ack = 8,
    Data = 9,
};

const char* to_string(MsgType t) noexcept;
bool is_valid_msg_type(std::uint8_t raw) noexcept;

enum class SrcKind : std::uint8_t { Classical = 0, Quantum = 1 };

struct Envelope {
    MsgType msg_type = MsgType::Data;
    std::uint32_t context = 0;
    std::uint32_t src = 0;
    std::uint32_t dst = 0;
    std::uint32_t tag = 0;
    std::uint64_t payload_len = 0;
    SrcKind src_kind = SrcKind::Classical;

    bool operator==(const Envelope&) const = default;
};

inline constexpr std::array<std::uint8_t, 4> kFrameMagic{'M', 'P', 'I', 'Q'};
inline constexpr std::uint8_t kFrameVersion = 1;
inline constexpr std::size_t kEnvelopeSize = 27;
inline constexpr std::size_t kHeaderSize = 4 + 1 + kEnvelopeSize;
inline constexpr std::uint64_t kMaxPayload = std::uint64_t{1} << 32;

/// A decoded frame. The payload is shared so that in-process channels can
/// hand it over without copying.
struct Frame {
    Envelope envelope;
    std::shared_ptr<const Bytes> payload;

    Frame() : payload(std::make_shared<const Bytes>()) {}
    Frame(Envelope env, Bytes body);
    Frame(Envelope env, std::shared_ptr<const Bytes> body);

    const Bytes& bytes() const noexcept { return *payload; }
    MsgType type() const noexcept { return envelope.msg_type; }
};

/// Header layout (little-endian):
///   magic[4] "MPIQ" | version u8 | msg_type u8 | src_kind u8 | reserved u8 |
///   context u32 | src u32 | dst u32 | tag u32 | payload_len u64
/// followed by payload_len bytes. `env.payload_len` is overwritten with the
/// payload size.
Bytes encode_frame(const Envelope& env, ByteView payload);
void encode_header(const Envelope& env, std::uint64_t payload_len, std::array<std::uint8_t, kHeaderSize>& out);

/// Parses one frame from the front of `input`. Returns the frame and the
/// number of bytes consumed. Throws IncompleteFrame when more input is
/// needed, ProtocolError/VersionError/SizeError when the input is not a
/// valid frame.
std::pair<Frame, std::size_t> decode_frame(ByteView input);

/// Validates a header and returns the envelope (including payload_len).
Envelope decode_header(ByteView header);

}  // namespace mpiq
