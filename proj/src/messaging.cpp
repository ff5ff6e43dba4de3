// SPDX-License-Identifier: Apache-2.0
#include "mpiq/messaging.hpp"

namespace mpiq {

void send_execute(RuntimeHandle& handle, QRank qrank, std::uint32_t tag, const WaveformBlock& block) {
    handle.require_live();
    const auto& world = handle.world();
    const auto& dev = map_quantum(world, qrank);
    if (!block.node_ip.empty() && (block.node_ip != dev.ip || block.device_id != dev.device_id)) {
        throw AddressError("block addressed to {" + block.node_ip + ", device_id=" + std::to_string(block.device_id) +
                           "} sent to " + to_string(dev));
    }
    validate_block(block, world.qubit_counts[qrank]);
    Frame frame(handle.envelope(MsgType::Execute, qrank, tag), encode_execute_payload(block));
    handle.send_to_monitor(qrank, frame);
}

void await_execute_ack(RuntimeHandle& handle, QRank qrank, std::uint32_t tag) {
    auto frame = handle.mailbox().take(
        {handle.world().context.value, MsgType::Ack, SrcKind::Quantum, qrank, tag}, handle.deadline());
    const auto ack = decode_ack(frame.bytes());
    if (ack.status != ErrorCode::Ok) {
        throw_error(ack.status, "monitor " + to_string(handle.world().q_map[qrank]) + " rejected payload: " + ack.text);
    }
}

void mpiq_send(RuntimeHandle& handle, const DeviceIdentifier& dest, std::uint32_t tag, const WaveformBlock& block) {
    handle.require_live();
    const auto qrank = resolve_qrank(handle.world(), dest);
    send_execute(handle, qrank, tag, block);
    await_execute_ack(handle, qrank, tag);
}

ShotTable recv_result(RuntimeHandle& handle, QRank qrank, std::uint32_t tag, Mailbox::Clock::time_point deadline,
                      std::size_t max_len) {
    handle.require_live();
    auto frame = handle.mailbox().take(
        {handle.world().context.value, MsgType::Result, SrcKind::Quantum, qrank, tag}, deadline, max_len);
    try {
        return decode_result_payload(frame.bytes(), qrank);
    } catch (const DecodeError& e) {
        throw ProtocolError(std::string("malformed RESULT: ") + e.what());
    }
}

ShotTable mpiq_recv(RuntimeHandle& handle, const DeviceIdentifier& source, std::uint32_t tag, std::size_t max_len) {
    handle.require_live();
    const auto qrank = resolve_qrank(handle.world(), source);
    return recv_result(handle, qrank, tag, handle.deadline(), max_len);
}

void classical_send(RuntimeHandle& handle, Rank peer, std::uint32_t tag, ByteView bytes) {
    handle.require_live();
    if (bytes.size() > kMaxPayload) throw SizeError("payload exceeds cap");
    handle.send_to_rank(peer, Frame(handle.envelope(MsgType::Data, peer, tag), Bytes(bytes.begin(), bytes.end())));
}

Bytes classical_recv(RuntimeHandle& handle, Rank peer, std::uint32_t tag, std::size_t max_len) {
    handle.require_live();
    if (!handle.world().group.has_rank(peer)) throw AddressError("rank " + std::to_string(peer) + " not in world");
    auto frame = handle.mailbox().take(
        {handle.world().context.value, MsgType::Data, SrcKind::Classical, peer, tag}, handle.deadline(), max_len);
    return frame.bytes();
}

}  // namespace mpiq
