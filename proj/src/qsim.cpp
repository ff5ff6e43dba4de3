// SPDX-License-Identifier: Apache-2.0
#include "mpiq/qsim.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

namespace mpiq::qsim {

void validate(const Circuit& circuit) {
    const auto n = circuit.n_qubits;
    if (n < 1 || n > kMaxQubits) {
        throw RangeError("circuit of " + std::to_string(n) + " qubits outside [1, " + std::to_string(kMaxQubits) + "]");
    }
    for (std::size_t i = 0; i < circuit.ops.size(); ++i) {
        const auto& op = circuit.ops[i];
        if (op.kind == GateKind::MeasureAll) {
            if (i + 1 != circuit.ops.size()) throw RangeError("MEASURE_ALL must be the final op");
            continue;
        }
        if (op.q0 >= n || (op.kind == GateKind::CNOT && op.q1 >= n)) {
            throw QubitRangeError("op " + std::to_string(i) + " references a qubit >= " + std::to_string(n));
        }
        if (op.kind == GateKind::CNOT && op.q0 == op.q1) {
            throw QubitRangeError("op " + std::to_string(i) + ": CNOT control equals target");
        }
    }
}

StateVector evolve(const Circuit& circuit) {
    validate(circuit);
    StateVector state(circuit.n_qubits);
    for (const auto& op : circuit.ops) apply_gate(state, op);
    return state;
}

Circuit build_ghz_circuit(std::uint32_t n) {
    if (n < 1 || n > kMaxQubits) {
        throw RangeError("GHZ size " + std::to_string(n) + " outside [1, " + std::to_string(kMaxQubits) + "]");
    }
    Circuit c;
    c.n_qubits = n;
    c.ops.reserve(n + 1);
    c.ops.push_back(GateOp::h(0));
    for (std::uint32_t i = 0; i + 1 < n; ++i) c.ops.push_back(GateOp::cnot(i, i + 1));
    c.ops.push_back(GateOp::measure_all());
    return c;
}

ShotTable sample(const StateVector& state, std::uint32_t shots, std::uint64_t seed) {
    if (shots < 1) throw RangeError("shots must be at least 1");
    const auto n = state.n_qubits();
    const auto& amps = state.amplitudes();

    std::mt19937_64 rng(seed);
    std::vector<double> u(shots);
    for (auto& x : u) x = static_cast<double>(rng() >> 11) * 0x1.0p-53;

    // Sweep the cumulative distribution once against the sorted draws.
    std::vector<std::uint32_t> order(shots);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return u[a] < u[b]; });

    std::vector<Eigen::Index> outcome(shots, 0);
    Eigen::Index last_nonzero = 0;
    double cumulative = 0.0;
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < amps.size() && k < shots; ++i) {
        const double p = std::norm(amps(i));
        if (p <= 0.0) continue;
        last_nonzero = i;
        cumulative += p;
        while (k < shots && u[order[k]] < cumulative) outcome[order[k++]] = i;
    }
    for (; k < shots; ++k) outcome[order[k]] = last_nonzero;

    ShotTable table;
    table.width = static_cast<std::uint16_t>(n);
    table.bitstrings.reserve(shots);
    for (auto idx : outcome) {
        std::string bits(n, '0');
        for (std::uint32_t q = 0; q < n; ++q) {
            if (idx & state.mask(q)) bits[q] = '1';
        }
        table.bitstrings.push_back(std::move(bits));
    }
    return table;
}

ShotTable simulate(const Circuit& circuit, std::uint32_t shots, std::uint64_t seed) {
    if (shots < 1) throw RangeError("shots must be at least 1");
    return sample(evolve(circuit), shots, seed);
}

// ---------------------------------------------------------------------------

namespace {

void put_record(Bytes& out, std::uint32_t seq, StreamKind kind, std::uint16_t partner) {
    ByteWriter w(out);
    w.u32(seq);
    w.u8(static_cast<std::uint8_t>(kind));
    w.u16(partner);
}

struct Record {
    std::uint16_t qubit;
    StreamKind kind;
    std::uint16_t partner;
};

}  // namespace

std::vector<ChannelStream> encode_gate_stream(const Circuit& circuit) {
    validate(circuit);
    std::vector<ChannelStream> channels(circuit.n_qubits);
    for (std::uint32_t q = 0; q < circuit.n_qubits; ++q) channels[q].qubit_index = static_cast<std::uint16_t>(q);
    for (std::size_t i = 0; i < circuit.ops.size(); ++i) {
        const auto seq = static_cast<std::uint32_t>(i);
        const auto& op = circuit.ops[i];
        switch (op.kind) {
            case GateKind::H: put_record(channels[op.q0].stream, seq, StreamKind::H, kNoPartner); break;
            case GateKind::X: put_record(channels[op.q0].stream, seq, StreamKind::X, kNoPartner); break;
            case GateKind::CNOT:
                put_record(channels[op.q0].stream, seq, StreamKind::CnotCtrl, static_cast<std::uint16_t>(op.q1));
                put_record(channels[op.q1].stream, seq, StreamKind::CnotTgt, static_cast<std::uint16_t>(op.q0));
                break;
            case GateKind::MeasureAll:
                for (auto& ch : channels) put_record(ch.stream, seq, StreamKind::Measure, kNoPartner);
                break;
        }
    }
    return channels;
}

Circuit decode_gate_stream(std::span<const ChannelStream> channels) {
    const auto n = channels.size();
    if (n < 1 || n > kMaxQubits) throw DecodeError("gate stream has " + std::to_string(n) + " channels");
    std::vector<bool> seen(n, false);
    std::map<std::uint32_t, std::vector<Record>> by_seq;
    for (const auto& ch : channels) {
        if (ch.qubit_index >= n || seen[ch.qubit_index]) {
            throw DecodeError("channel qubit indices must be a permutation of 0.." + std::to_string(n - 1));
        }
        seen[ch.qubit_index] = true;
        if (ch.stream.size() % kStreamRecordSize != 0) {
            throw DecodeError("channel " + std::to_string(ch.qubit_index) + " stream length " +
                              std::to_string(ch.stream.size()) + " is not a multiple of 7");
        }
        ByteReader<DecodeError> r(ch.stream);
        std::int64_t prev = -1;
        while (!r.done()) {
            const auto seq = r.u32();
            const auto raw = r.u8();
            const auto partner = r.u16();
            if (raw < 1 || raw > 5) throw DecodeError("unknown gate kind " + std::to_string(raw));
            if (static_cast<std::int64_t>(seq) <= prev) {
                throw DecodeError("channel " + std::to_string(ch.qubit_index) + " sequence not increasing");
            }
            prev = seq;
            by_seq[seq].push_back({ch.qubit_index, static_cast<StreamKind>(raw), partner});
        }
    }

    Circuit c;
    c.n_qubits = static_cast<std::uint32_t>(n);
    std::uint32_t expected = 0;
    for (auto& [seq, recs] : by_seq) {
        if (seq != expected) throw DecodeError("gap in sequence numbers at " + std::to_string(expected));
        ++expected;
        const auto bad = [&](const char* why) {
            return DecodeError("op " + std::to_string(seq) + ": " + why);
        };
        const auto kind = recs.front().kind;
        if (kind == StreamKind::H || kind == StreamKind::X) {
            if (recs.size() != 1 || recs[0].partner != kNoPartner) throw bad("single-qubit op is malformed");
            c.ops.push_back(kind == StreamKind::H ? GateOp::h(recs[0].qubit) : GateOp::x(recs[0].qubit));
        } else if (kind == StreamKind::Measure) {
            if (recs.size() != n) throw bad("MEASURE missing from some channels");
            for (const auto& r : recs) {
                if (r.kind != StreamKind::Measure || r.partner != kNoPartner) throw bad("MEASURE is malformed");
            }
            c.ops.push_back(GateOp::measure_all());
        } else {
            if (recs.size() != 2) throw bad("CNOT needs exactly two records");
            const Record* ctrl = nullptr;
            const Record* tgt = nullptr;
            for (const auto& r : recs) {
                if (r.kind == StreamKind::CnotCtrl && !ctrl) ctrl = &r;
                else if (r.kind == StreamKind::CnotTgt && !tgt) tgt = &r;
            }
            if (!ctrl || !tgt) throw bad("CNOT needs one control and one target record");
            if (ctrl->partner != tgt->qubit || tgt->partner != ctrl->qubit || ctrl->qubit == tgt->qubit) {
                throw bad("CNOT partner fields disagree");
            }
            c.ops.push_back(GateOp::cnot(ctrl->qubit, tgt->qubit));
        }
    }
    try {
        validate(c);
    } catch (const Error& e) {
        throw DecodeError(std::string("decoded circuit invalid: ") + e.what());
    }
    return c;
}

}  // namespace mpiq::qsim
