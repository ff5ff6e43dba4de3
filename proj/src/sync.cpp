// SPDX-License-Identifier: Apache-2.0
#include "mpiq/sync.hpp"

#include <algorithm>
#include <limits>
#include <thread>

#include "mpiq/messaging.hpp"
#include "mpiq/payload.hpp"
#include "mpiq/runtime.hpp"

namespace mpiq {

BarrierFlag::BarrierFlag(int value) : value_(value) {
    if (value != kClassical && value != kQuantum) {
        throw FlagError("barrier flag " + std::to_string(value) + " is undefined (expected 0 = CC or 2 = QQ)");
    }
}

double QuantumBarrierReport::spread_ms() const {
    if (corrected_release_ns.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(corrected_release_ns.begin(), corrected_release_ns.end());
    return static_cast<double>(*hi - *lo) / 1e6;
}

std::uint64_t wait_until_ns(std::uint64_t target_ns) {
    constexpr std::uint64_t kSpinWindow = 2'000'000;
    for (;;) {
        const auto now = monotonic_ns();
        if (now >= target_ns) return now;
        const auto left = target_ns - now;
        if (left > kSpinWindow) {
            std::this_thread::sleep_for(std::chrono::nanoseconds(left - kSpinWindow));
        } else {
            std::this_thread::yield();
        }
    }
}

ClockOffset estimate_clock_offset(const PingExchange& exchange, const DeviceIdentifier& peer, int rounds) {
    if (rounds < 1) rounds = 1;
    ClockOffset best;
    best.peer = peer;
    best.rtt_ns = std::numeric_limits<std::uint64_t>::max();
    for (int i = 0; i < rounds; ++i) {
        const auto t0 = monotonic_ns();
        const auto tm = exchange(t0);
        const auto t1 = monotonic_ns();
        const auto rtt = t1 - t0;
        best.sample_rtts_ns.push_back(rtt);
        if (rtt < best.rtt_ns) {
            best.rtt_ns = rtt;
            best.offset_ns = static_cast<std::int64_t>(tm) - static_cast<std::int64_t>(t0 + rtt / 2);
            best.measured_at_ns = t1;
        }
    }
    return best;
}

ClockOffset estimate_clock_offset(Channel& channel, const DeviceIdentifier& peer, Millis timeout, int rounds) {
    std::uint32_t seq = kReservedTagBase;
    return estimate_clock_offset(
        [&](std::uint64_t t0) {
            Envelope env;
            env.msg_type = MsgType::Ping;
            env.tag = ++seq;
            channel.send(Frame(env, encode_u64(t0)));
            for (;;) {
                auto reply = channel.recv(timeout);
                if (reply.type() == MsgType::Pong && reply.envelope.tag == seq) return decode_u64(reply.bytes());
            }
        },
        peer, rounds);
}

ClockOffset estimate_clock_offset(RuntimeHandle& handle, QRank qrank, int rounds) {
    handle.require_live();
    const auto& dev = map_quantum(handle.world(), qrank);
    auto offset = estimate_clock_offset(
        [&](std::uint64_t t0) {
            const auto tag = handle.next_control_tag();
            handle.send_to_monitor(qrank, Frame(handle.envelope(MsgType::Ping, qrank, tag), encode_u64(t0)));
            auto reply = handle.mailbox().take(
                {handle.world().context.value, MsgType::Pong, SrcKind::Quantum, qrank, tag}, handle.deadline());
            return decode_u64(reply.bytes());
        },
        dev, rounds);
    handle.set_clock_offset(qrank, offset);
    return offset;
}

// ---------------------------------------------------------------------------
// CC

void classical_barrier(RuntimeHandle& handle) {
    handle.require_live();
    const auto ctx = handle.world().context.value;
    const auto epoch = handle.next_barrier_epoch();
    const auto deadline = handle.deadline();
    if (handle.size() == 1) return;

    if (handle.rank() == 0) {
        std::vector<Rank> absent;
        for (Rank r = 1; r < handle.size(); ++r) {
            try {
                handle.mailbox().take({ctx, MsgType::SyncReady, SrcKind::Classical, r, epoch}, deadline);
            } catch (const TimeoutError&) {
                absent.push_back(r);
            } catch (const ChannelClosed&) {
                absent.push_back(r);
            }
        }
        if (!absent.empty()) {
            std::string names;
            for (auto r : absent) names += (names.empty() ? "" : ", ") + std::to_string(r);
            throw BarrierTimeout("CC barrier: rank(s) " + names + " never entered", absent, {});
        }
        for (Rank r = 1; r < handle.size(); ++r) {
            handle.send_to_rank(r, Frame(handle.envelope(MsgType::SyncRelease, r, epoch), Bytes{}));
        }
    } else {
        handle.send_to_rank(0, Frame(handle.envelope(MsgType::SyncReady, 0, epoch), Bytes{}));
        try {
            handle.mailbox().take({ctx, MsgType::SyncRelease, SrcKind::Classical, 0, epoch}, deadline);
        } catch (const TimeoutError&) {
            throw BarrierTimeout("CC barrier: no release from rank 0", {0}, {});
        } catch (const ChannelClosed&) {
            throw BarrierTimeout("CC barrier: rank 0 unreachable", {0}, {});
        }
    }
}

// ---------------------------------------------------------------------------
// QQ

namespace {

[[noreturn]] void throw_absent(const RuntimeHandle& handle, const char* phase, const std::vector<QRank>& absent,
                               const std::string& detail) {
    std::vector<DeviceIdentifier> devices;
    std::string names;
    for (auto q : absent) {
        devices.push_back(handle.world().q_map[q]);
        names += (names.empty() ? "" : ", ") + to_string(handle.world().q_map[q]);
    }
    throw BarrierTimeout(std::string("QQ barrier ") + phase + ": no response from " + names + detail, {},
                         std::move(devices));
}

}  // namespace

void quantum_barrier_arm(RuntimeHandle& handle, const std::vector<QRank>& monitors) {
    handle.require_live();
    const auto ctx = handle.world().context.value;
    const auto deadline = handle.deadline();
    std::vector<std::pair<QRank, std::uint32_t>> sent;
    std::vector<QRank> absent;
    std::string detail;
    for (auto q : monitors) {
        map_quantum(handle.world(), q);
        const auto tag = handle.next_control_tag();
        try {
            handle.send_to_monitor(q, Frame(handle.envelope(MsgType::SyncReady, q, tag), encode_u32(q)));
            sent.emplace_back(q, tag);
        } catch (const Error& e) {
            absent.push_back(q);
            detail += std::string("\n  ") + e.what();
        }
    }
    std::vector<QRank> armed;
    for (auto [q, tag] : sent) {
        try {
            auto reply = handle.mailbox().take({ctx, MsgType::SyncReady, SrcKind::Quantum, q, tag}, deadline);
            if (decode_u32(reply.bytes()) != q) throw ProtocolError("SYNC_READY names the wrong qrank");
            armed.push_back(q);
        } catch (const Error& e) {
            absent.push_back(q);
            detail += std::string("\n  ") + e.what();
        }
    }
    if (!absent.empty()) {
        // Let the monitors that did arm run freely again.
        for (auto q : armed) {
            try {
                const auto tag = handle.next_control_tag();
                handle.send_to_monitor(q, Frame(handle.envelope(MsgType::SyncRelease, q, tag), encode_u64(0)));
            } catch (const Error&) {
            }
        }
        std::sort(absent.begin(), absent.end());
        throw_absent(handle, "arm", absent, detail);
    }
}

QuantumBarrierReport quantum_barrier_release(RuntimeHandle& handle, const std::vector<QRank>& monitors) {
    handle.require_live();
    const auto ctx = handle.world().context.value;
    const auto& sync = handle.options().sync;
    const auto ttl_ns = static_cast<std::uint64_t>(std::chrono::nanoseconds(sync.offset_ttl).count());

    std::vector<ClockOffset> offsets;
    std::vector<QRank> absent;
    std::string detail;
    for (auto q : monitors) {
        auto off = handle.clock_offset(q);
        try {
            if (!off || monotonic_ns() - off->measured_at_ns > ttl_ns) off = estimate_clock_offset(handle, q);
        } catch (const Error& e) {
            absent.push_back(q);
            detail += std::string("\n  ") + e.what();
        }
        offsets.push_back(off.value_or(ClockOffset{}));
    }
    if (!absent.empty()) throw_absent(handle, "release", absent, detail);

    QuantumBarrierReport report;
    report.monitors = monitors;
    for (const auto& o : offsets) report.max_rtt_ns = std::max(report.max_rtt_ns, o.rtt_ns);
    const auto margin_ns = static_cast<std::uint64_t>(std::chrono::nanoseconds(sync.release_margin).count());
    report.release_ns = monotonic_ns() + 2 * report.max_rtt_ns + margin_ns;

    const auto deadline = Mailbox::Clock::now() + handle.timeout() + sync.release_margin;
    std::vector<std::pair<std::size_t, std::uint32_t>> sent;
    for (std::size_t i = 0; i < monitors.size(); ++i) {
        const auto q = monitors[i];
        const auto target = static_cast<std::uint64_t>(static_cast<std::int64_t>(report.release_ns) + offsets[i].offset_ns);
        const auto tag = handle.next_control_tag();
        try {
            handle.send_to_monitor(q, Frame(handle.envelope(MsgType::SyncRelease, q, tag), encode_u64(target)));
            sent.emplace_back(i, tag);
        } catch (const Error& e) {
            absent.push_back(q);
            detail += std::string("\n  ") + e.what();
        }
    }
    report.corrected_release_ns.assign(monitors.size(), report.release_ns);
    for (auto [i, tag] : sent) {
        const auto q = monitors[i];
        try {
            auto reply = handle.mailbox().take({ctx, MsgType::Ack, SrcKind::Quantum, q, tag}, deadline);
            const auto ack = decode_ack(reply.bytes());
            if (ack.status != ErrorCode::Ok) throw_error(ack.status, ack.text);
            report.corrected_release_ns[i] = static_cast<std::uint64_t>(
                static_cast<std::int64_t>(ack.release_local_ns) - offsets[i].offset_ns);
        } catch (const Error& e) {
            absent.push_back(q);
            detail += std::string("\n  ") + e.what();
        }
    }
    if (!absent.empty()) {
        std::sort(absent.begin(), absent.end());
        throw_absent(handle, "release", absent, detail);
    }
    return report;
}

QuantumBarrierReport quantum_barrier(RuntimeHandle& handle, const std::vector<QRank>& monitors) {
    quantum_barrier_arm(handle, monitors);
    return quantum_barrier_release(handle, monitors);
}

void mpiq_barrier(RuntimeHandle& handle, BarrierFlag flag) {
    handle.require_live();
    if (flag.is_classical()) {
        classical_barrier(handle);
        return;
    }
    if (handle.role() != Role::Classical) throw StateError("QQ barrier must be coordinated by a classical rank");
    quantum_barrier(handle, handle.world().group.quantum_qranks);
}

void mpiq_barrier(RuntimeHandle& handle, int flag) { mpiq_barrier(handle, BarrierFlag(flag)); }

}  // namespace mpiq
