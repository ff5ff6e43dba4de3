// SPDX-License-Identifier: Apache-2.0
#include "mpiq/wire.hpp"

#include <algorithm>
#include <string>

#include "mpiq/error.hpp"

namespace mpiq {

const char* to_string(MsgType t) noexcept {
    switch (t) {
        case MsgType::Execute: return "EXECUTE";
        case MsgType::Result: return "RESULT";
        case MsgType::SyncReady: return "SYNC_READY";
        case MsgType::SyncRelease: return "SYNC_RELEASE";
        case MsgType::Ping: return "PING";
        case MsgType::Pong: return "PONG";
        case MsgType::Shutdown: return "SHUTDOWN";
        case MsgType::Ack: return "ACK";
        case MsgType::Data: return "DATA";
    }
    return "?";
}

bool is_valid_msg_type(std::uint8_t raw) noexcept { return raw >= 1 && raw <= 9; }

Frame::Frame(Envelope env, Bytes body)
    : envelope(env), payload(std::make_shared<const Bytes>(std::move(body))) {
    envelope.payload_len = payload->size();
}

Frame::Frame(Envelope env, std::shared_ptr<const Bytes> body) : envelope(env), payload(std::move(body)) {
    if (!payload) payload = std::make_shared<const Bytes>();
    envelope.payload_len = payload->size();
}

void encode_header(const Envelope& env, std::uint64_t payload_len, std::array<std::uint8_t, kHeaderSize>& out) {
    Bytes buf;
    buf.reserve(kHeaderSize);
    ByteWriter w(buf);
    w.bytes(kFrameMagic);
    w.u8(kFrameVersion);
    w.u8(static_cast<std::uint8_t>(env.msg_type));
    w.u8(static_cast<std::uint8_t>(env.src_kind));
    w.u8(0);
    w.u32(env.context);
    w.u32(env.src);
    w.u32(env.dst);
    w.u32(env.tag);
    w.u64(payload_len);
    std::copy(buf.begin(), buf.end(), out.begin());
}

Bytes encode_frame(const Envelope& env, ByteView payload) {
    if (payload.size() > kMaxPayload) {
        throw SizeError("payload of " + std::to_string(payload.size()) + " bytes exceeds cap");
    }
    std::array<std::uint8_t, kHeaderSize> header{};
    encode_header(env, payload.size(), header);
    Bytes out;
    out.reserve(kHeaderSize + payload.size());
    out.insert(out.end(), header.begin(), header.end());
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

Envelope decode_header(ByteView header) {
    const std::size_t have = std::min(header.size(), kFrameMagic.size());
    if (!std::equal(header.begin(), header.begin() + static_cast<std::ptrdiff_t>(have), kFrameMagic.begin())) {
        throw ProtocolError("bad frame magic");
    }
    if (header.size() < kHeaderSize) {
        throw IncompleteFrame("header needs " + std::to_string(kHeaderSize) + " bytes, have " +
                              std::to_string(header.size()));
    }
    ByteReader<IncompleteFrame> r(header.first(kHeaderSize));
    r.bytes(4);
    const auto version = r.u8();
    if (version != kFrameVersion) throw VersionError("unsupported frame version " + std::to_string(version));
    const auto type = r.u8();
    if (!is_valid_msg_type(type)) throw ProtocolError("unknown msg_type " + std::to_string(type));
    const auto kind = r.u8();
    if (kind > 1) throw ProtocolError("bad src_kind " + std::to_string(kind));
    if (r.u8() != 0) throw ProtocolError("reserved header byte is nonzero");
    Envelope env;
    env.msg_type = static_cast<MsgType>(type);
    env.src_kind = static_cast<SrcKind>(kind);
    env.context = r.u32();
    env.src = r.u32();
    env.dst = r.u32();
    env.tag = r.u32();
    env.payload_len = r.u64();
    if (env.payload_len > kMaxPayload) {
        throw SizeError("declared payload_len " + std::to_string(env.payload_len) + " exceeds cap");
    }
    return env;
}

std::pair<Frame, std::size_t> decode_frame(ByteView input) {
    Envelope env = decode_header(input);
    const std::size_t total = kHeaderSize + static_cast<std::size_t>(env.payload_len);
    if (input.size() < total) {
        throw IncompleteFrame("frame needs " + std::to_string(total) + " bytes, have " + std::to_string(input.size()));
    }
    auto body = input.subspan(kHeaderSize, static_cast<std::size_t>(env.payload_len));
    return {Frame(env, Bytes(body.begin(), body.end())), total};
}

}  // namespace mpiq
