// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mpiq/bytes.hpp"
#include "mpiq/error.hpp"
#include "mpiq/shots.hpp"

namespace mpiq::qsim {

inline constexpr std::uint32_t kMaxQubits = 26;

enum class GateKind : std::uint8_t { H, X, CNOT, MeasureAll };

struct GateOp {
    GateKind kind = GateKind::H;
    std::uint32_t q0 = 0;  // target, or control for CNOT
    std::uint32_t q1 = 0;  // CNOT target

    static GateOp h(std::uint32_t q) { return {GateKind::H, q, 0}; }
    static GateOp x(std::uint32_t q) { return {GateKind::X, q, 0}; }
    static GateOp cnot(std::uint32_t control, std::uint32_t target) { return {GateKind::CNOT, control, target}; }
    static GateOp measure_all() { return {GateKind::MeasureAll, 0, 0}; }

    std::size_t arity() const noexcept {
        switch (kind) {
            case GateKind::CNOT: return 2;
            case GateKind::MeasureAll: return 0;
            default: return 1;
        }
    }

    bool operator==(const GateOp&) const = default;
};

struct Circuit {
    std::uint32_t n_qubits = 1;
    std::vector<GateOp> ops;

    bool operator==(const Circuit&) const = default;
};

/// Throws RangeError for a bad qubit count or a MEASURE_ALL that is not
/// last, QubitRangeError for indices out of range or CNOT control == target.
void validate(const Circuit& circuit);

/// Amplitudes over 2^n basis states. Basis index bit (n-1-q) holds qubit q,
/// so the binary spelling of an index reads with qubit 0 leftmost.
template <typename Scalar>
class BasicStateVector {
public:
    using Complex = std::complex<Scalar>;
    using Amplitudes = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;

    explicit BasicStateVector(std::uint32_t n_qubits) : n_(n_qubits) {
        if (n_qubits < 1 || n_qubits > kMaxQubits) {
            throw RangeError("state of " + std::to_string(n_qubits) + " qubits outside [1, " +
                             std::to_string(kMaxQubits) + "]");
        }
        amps_ = Amplitudes::Zero(Eigen::Index{1} << n_qubits);
        amps_(0) = Complex(1);
    }

    std::uint32_t n_qubits() const noexcept { return n_; }
    const Amplitudes& amplitudes() const noexcept { return amps_; }
    Amplitudes& amplitudes() noexcept { return amps_; }
    Scalar norm() const { return amps_.norm(); }

    /// Index mask for qubit q.
    Eigen::Index mask(std::uint32_t q) const noexcept { return Eigen::Index{1} << (n_ - 1 - q); }

private:
    std::uint32_t n_;
    Amplitudes amps_;
};

using StateVector = BasicStateVector<double>;

template <typename Scalar>
void apply_gate(BasicStateVector<Scalar>& state, const GateOp& op) {
    using Complex = typename BasicStateVector<Scalar>::Complex;
    const auto n = state.n_qubits();
    auto check = [n](std::uint32_t q) {
        if (q >= n) {
            throw QubitRangeError("qubit " + std::to_string(q) + " out of range for " + std::to_string(n) +
                                  "-qubit state");
        }
    };
    auto& a = state.amplitudes();
    const Eigen::Index dim = a.size();
    switch (op.kind) {
        case GateKind::H: {
            check(op.q0);
            const Eigen::Index m = state.mask(op.q0);
            const Scalar s = Scalar(1) / std::sqrt(Scalar(2));
            for (Eigen::Index i = 0; i < dim; ++i) {
                if (i & m) continue;
                const Complex lo = a(i), hi = a(i | m);
                a(i) = s * (lo + hi);
                a(i | m) = s * (lo - hi);
            }
            break;
        }
        case GateKind::X: {
            check(op.q0);
            const Eigen::Index m = state.mask(op.q0);
            for (Eigen::Index i = 0; i < dim; ++i) {
                if (!(i & m)) std::swap(a(i), a(i | m));
            }
            break;
        }
        case GateKind::CNOT: {
            check(op.q0);
            check(op.q1);
            if (op.q0 == op.q1) throw QubitRangeError("CNOT control equals target");
            const Eigen::Index c = state.mask(op.q0), t = state.mask(op.q1);
            for (Eigen::Index i = 0; i < dim; ++i) {
                if ((i & c) && !(i & t)) std::swap(a(i), a(i | t));
            }
            break;
        }
        case GateKind::MeasureAll:
            break;  // sampling happens in simulate()
    }
}

/// Evolves |0..0> through every unitary op of `circuit`.
StateVector evolve(const Circuit& circuit);

/// H(0), CNOT(0,1), ..., CNOT(n-2,n-1), MEASURE_ALL.
Circuit build_ghz_circuit(std::uint32_t n);

/// Samples `shots` computational-basis outcomes from the final state with a
/// generator seeded by `seed`. Deterministic for a given (circuit, shots,
/// seed).
ShotTable simulate(const Circuit& circuit, std::uint32_t shots, std::uint64_t seed);

/// Samples from an already evolved state.
ShotTable sample(const StateVector& state, std::uint32_t shots, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Gate stream: the payload format carried in waveform blocks. Each qubit's
// channel lists the ops touching it as 7-byte records
//   seq u32 | kind u8 | partner_qubit u16 (0xFFFF when none)
// with seq the global op position, so channels can be re-merged.

enum class StreamKind : std::uint8_t { H = 1, X = 2, CnotCtrl = 3, CnotTgt = 4, Measure = 5 };

inline constexpr std::uint16_t kNoPartner = 0xFFFF;
inline constexpr std::size_t kStreamRecordSize = 7;

struct ChannelStream {
    std::uint16_t qubit_index = 0;
    Bytes stream;

    bool operator==(const ChannelStream&) const = default;
};

/// One channel per qubit, in qubit order (channels may be empty).
std::vector<ChannelStream> encode_gate_stream(const Circuit& circuit);

/// Inverse of encode_gate_stream. Channel qubit indices must be exactly
/// 0..k-1 in any order. Throws DecodeError on any inconsistency.
Circuit decode_gate_stream(std::span<const ChannelStream> channels);

}  // namespace mpiq::qsim
