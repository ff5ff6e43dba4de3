// SPDX-License-Identifier: Apache-2.0
#include "mpiq/payload.hpp"

#include <set>

namespace mpiq {

std::uint64_t compute_block_digest(const std::vector<qsim::ChannelStream>& channels) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& ch : channels) {
        Bytes head;
        ByteWriter w(head);
        w.u16(ch.qubit_index);
        w.u32(static_cast<std::uint32_t>(ch.stream.size()));
        h = fnv1a64(head, h);
        h = fnv1a64(ch.stream, h);
    }
    return h;
}

WaveformBlock make_waveform_block(const DeviceIdentifier& dev, const qsim::Circuit& circuit, std::uint32_t shots) {
    WaveformBlock block;
    block.node_ip = dev.ip;
    block.device_id = dev.device_id;
    block.channels = qsim::encode_gate_stream(circuit);
    block.shots = shots;
    block.circuit_digest = compute_block_digest(block.channels);
    return block;
}

void validate_block(const WaveformBlock& block, std::uint32_t device_qubits) {
    if (block.channels.empty()) throw ShapeError("waveform block has no channels");
    if (block.shots < 1) throw ShapeError("waveform block needs at least one shot");
    std::set<std::uint16_t> seen;
    for (const auto& ch : block.channels) {
        if (ch.qubit_index >= device_qubits) {
            throw QubitRangeError("qubit index " + std::to_string(ch.qubit_index) + " >= device qubit_count " +
                                  std::to_string(device_qubits));
        }
        if (!seen.insert(ch.qubit_index).second) {
            throw QubitRangeError("qubit index " + std::to_string(ch.qubit_index) + " repeated");
        }
    }
}

Bytes encode_execute_payload(const WaveformBlock& block) {
    if (block.channels.size() > UINT16_MAX) throw SizeError("too many channels");
    Bytes out;
    ByteWriter w(out);
    w.u32(block.shots);
    w.u16(static_cast<std::uint16_t>(block.channels.size()));
    for (const auto& ch : block.channels) {
        if (ch.stream.size() > UINT32_MAX) throw SizeError("channel stream too large");
        w.u16(ch.qubit_index);
        w.u32(static_cast<std::uint32_t>(ch.stream.size()));
        w.bytes(ch.stream);
    }
    w.u64(block.circuit_digest);
    return out;
}

WaveformBlock decode_execute_payload(ByteView payload) {
    ByteReader<DecodeError> r(payload);
    WaveformBlock block;
    block.shots = r.u32();
    const auto count = r.u16();
    block.channels.reserve(count);
    for (std::uint16_t i = 0; i < count; ++i) {
        qsim::ChannelStream ch;
        ch.qubit_index = r.u16();
        const auto len = r.u32();
        auto bytes = r.bytes(len);
        ch.stream.assign(bytes.begin(), bytes.end());
        block.channels.push_back(std::move(ch));
    }
    block.circuit_digest = r.u64();
    if (!r.done()) throw DecodeError("trailing bytes after EXECUTE payload");
    return block;
}

Bytes encode_result_payload(const ShotTable& table) {
    const std::size_t row = (table.width + 7u) / 8u;
    Bytes out;
    out.reserve(6 + row * table.bitstrings.size());
    ByteWriter w(out);
    w.u32(table.shots());
    w.u16(table.width);
    for (const auto& bits : table.bitstrings) {
        if (bits.size() != table.width) throw ShapeError("bitstring width differs from table width");
        const std::size_t base = out.size();
        out.resize(base + row, 0);
        for (std::size_t i = 0; i < bits.size(); ++i) {
            if (bits[i] == '1') out[base + i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
            else if (bits[i] != '0') throw ShapeError("bitstring contains a non-binary character");
        }
    }
    return out;
}

ShotTable decode_result_payload(ByteView payload, std::uint32_t qrank) {
    ByteReader<DecodeError> r(payload);
    ShotTable table;
    table.qrank = qrank;
    const auto shots = r.u32();
    table.width = r.u16();
    const std::size_t row = (table.width + 7u) / 8u;
    if (r.remaining() != row * shots) throw DecodeError("RESULT payload size does not match shots x width");
    table.bitstrings.reserve(shots);
    for (std::uint32_t s = 0; s < shots; ++s) {
        auto bytes = r.bytes(row);
        std::string bits(table.width, '0');
        for (std::size_t i = 0; i < table.width; ++i) {
            if (bytes[i / 8] & (0x80u >> (i % 8))) bits[i] = '1';
        }
        table.bitstrings.push_back(std::move(bits));
    }
    return table;
}

Bytes encode_ack(const AckInfo& ack) {
    Bytes out;
    ByteWriter w(out);
    w.u8(static_cast<std::uint8_t>(ack.status));
    if (ack.status != ErrorCode::Ok) {
        w.u32(static_cast<std::uint32_t>(ack.text.size()));
        w.text(ack.text);
    }
    return out;
}

Bytes encode_release_ack(std::uint64_t release_local_ns) {
    Bytes out;
    ByteWriter w(out);
    w.u8(0);
    w.u64(release_local_ns);
    return out;
}

AckInfo decode_ack(ByteView payload) {
    ByteReader<ProtocolError> r(payload);
    AckInfo ack;
    ack.status = static_cast<ErrorCode>(r.u8());
    if (ack.status != ErrorCode::Ok) {
        const auto len = r.u32();
        ack.text = r.text(len);
    } else if (r.remaining() == 8) {
        ack.release_local_ns = r.u64();
    }
    return ack;
}

Bytes encode_u32(std::uint32_t v) {
    Bytes out;
    ByteWriter(out).u32(v);
    return out;
}

Bytes encode_u64(std::uint64_t v) {
    Bytes out;
    ByteWriter(out).u64(v);
    return out;
}

std::uint32_t decode_u32(ByteView payload) {
    ByteReader<ProtocolError> r(payload);
    return r.u32();
}

std::uint64_t decode_u64(ByteView payload) {
    ByteReader<ProtocolError> r(payload);
    return r.u64();
}

}  // namespace mpiq
