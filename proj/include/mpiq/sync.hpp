// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <vector>

#include "mpiq/channel.hpp"
#include "mpiq/domain.hpp"
#include "mpiq/error.hpp"

namespace mpiq {

class RuntimeHandle;

/// Barrier mode. Only CC (classical ranks) and QQ (quantum monitors) exist.
class BarrierFlag {
public:
    static constexpr int kClassical = 0;
    static constexpr int kQuantum = 2;

    /// Throws FlagError for anything other than 0 or 2.
    explicit BarrierFlag(int value);

    static BarrierFlag classical() { return BarrierFlag(kClassical); }
    static BarrierFlag quantum() { return BarrierFlag(kQuantum); }

    int value() const noexcept { return value_; }
    bool is_classical() const noexcept { return value_ == kClassical; }

private:
    int value_;
};

/// Cristian-style estimate of a monitor's clock relative to ours:
/// monitor_time ~= local_time + offset, with |error| <= rtt / 2.
struct ClockOffset {
    DeviceIdentifier peer;
    std::int64_t offset_ns = 0;
    std::uint64_t rtt_ns = 0;
    std::uint64_t measured_at_ns = 0;  // local monotonic
    std::vector<std::uint64_t> sample_rtts_ns;

    double offset_ms() const noexcept { return static_cast<double>(offset_ns) / 1e6; }
    double rtt_ms() const noexcept { return static_cast<double>(rtt_ns) / 1e6; }
};

/// Sends one PING carrying t0 and returns the peer's PONG timestamp.
using PingExchange = std::function<std::uint64_t(std::uint64_t t0)>;

/// Runs `rounds` exchanges and keeps the one with the smallest rtt.
ClockOffset estimate_clock_offset(const PingExchange& exchange, const DeviceIdentifier& peer, int rounds = 5);

/// Offset estimate over a channel nobody else is reading.
ClockOffset estimate_clock_offset(Channel& channel, const DeviceIdentifier& peer, Millis timeout, int rounds = 5);

/// Offset estimate for a monitor connected to `handle`; refreshes the
/// handle's cached value.
ClockOffset estimate_clock_offset(RuntimeHandle& handle, QRank qrank, int rounds = 5);

class BarrierTimeout : public Error {
public:
    BarrierTimeout(const std::string& what, std::vector<Rank> absent_ranks, std::vector<DeviceIdentifier> absent_devices)
        : Error(ErrorCode::BarrierTimeout, what),
          absent_ranks(std::move(absent_ranks)),
          absent_devices(std::move(absent_devices)) {}

    std::vector<Rank> absent_ranks;
    std::vector<DeviceIdentifier> absent_devices;
};

struct SyncOptions {
    Millis release_margin{20};
    Millis offset_ttl{10000};
};

/// Per-barrier record from the coordinator's point of view.
struct QuantumBarrierReport {
    std::uint64_t release_ns = 0;  // coordinator clock
    std::vector<QRank> monitors;
    std::vector<std::uint64_t> corrected_release_ns;  // monitor release expressed in coordinator clock
    std::uint64_t max_rtt_ns = 0;

    /// max - min of corrected release times, in milliseconds.
    double spread_ms() const;
};

/// Collective barrier. CC: every classical rank calls; nobody returns before
/// all have entered (gather to rank 0, then release). QQ: the calling
/// classical rank coordinates all monitors of the world domain.
void mpiq_barrier(RuntimeHandle& handle, BarrierFlag flag);
void mpiq_barrier(RuntimeHandle& handle, int flag);

/// First half of a QQ barrier: every listed monitor confirms SYNC_READY and
/// holds subsequently received payloads until released.
void quantum_barrier_arm(RuntimeHandle& handle, const std::vector<QRank>& monitors);

/// Second half: picks T_release = now + 2 * max_rtt + margin and sends each
/// monitor its offset-corrected local target; returns once all confirm.
QuantumBarrierReport quantum_barrier_release(RuntimeHandle& handle, const std::vector<QRank>& monitors);

/// Arm + release. Returns the release timestamp on the coordinator clock.
QuantumBarrierReport quantum_barrier(RuntimeHandle& handle, const std::vector<QRank>& monitors);

/// Classical two-phase barrier.
void classical_barrier(RuntimeHandle& handle);

/// Sleeps until shortly before `target_ns`, then spins on the monotonic
/// clock. Returns the time observed at release.
std::uint64_t wait_until_ns(std::uint64_t target_ns);

}  // namespace mpiq
