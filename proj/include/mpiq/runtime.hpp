// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "mpiq/channel.hpp"
#include "mpiq/config.hpp"
#include "mpiq/domain.hpp"
#include "mpiq/mailbox.hpp"
#include "mpiq/sync.hpp"

namespace mpiq {

enum class Role { Classical, Monitor };

class InitError : public Error {
public:
    InitError(const std::string& what, std::vector<DeviceIdentifier> devices)
        : Error(ErrorCode::Init, what), failed_devices(std::move(devices)) {}

    std::vector<DeviceIdentifier> failed_devices;
};

struct InitOptions {
    QuantumNodeConfig config;
    Role role = Role::Classical;
    Rank rank = 0;
    /// Listening endpoint of every classical rank; empty means a single rank.
    std::vector<Endpoint> classical_peers;
    Millis timeout = default_timeout();
    std::uint64_t seed = 0;
    /// Finalize sends SHUTDOWN to every monitor (launcher mode, rank 0).
    bool owns_monitors = false;
    ChannelPreference preference = ChannelPreference::Auto;
    /// Outstanding sends allowed during collective fan-out (1 = sequential).
    std::size_t fanout_width = 1;
    SyncOptions sync;
};

/// Reads MPIQ_NP / MPIQ_PEERS / MPIQ_SEED / MPIQ_TIMEOUT_MS /
/// MPIQ_OWNS_MONITORS into `options`.
void apply_environment(InitOptions& options);

/// Process-local state of one participant in the hybrid environment.
class RuntimeHandle {
public:
    /// Builds the world domain, binds this rank's listener and, for the
    /// classical role, connects to every monitor (PING/PONG plus one clock
    /// offset exchange). Throws InitError naming every unreachable device.
    static std::unique_ptr<RuntimeHandle> create(InitOptions options);

    ~RuntimeHandle();
    RuntimeHandle(const RuntimeHandle&) = delete;
    RuntimeHandle& operator=(const RuntimeHandle&) = delete;

    void finalize();
    bool live() const noexcept { return live_.load(); }
    /// Throws StateError once finalized.
    void require_live() const;

    const HybridDomain& world() const noexcept { return world_; }
    Rank rank() const noexcept { return options_.rank; }
    Role role() const noexcept { return options_.role; }
    std::size_t size() const noexcept { return world_.classical_size(); }
    std::uint64_t seed() const noexcept { return options_.seed; }
    Millis timeout() const noexcept { return options_.timeout; }
    const InitOptions& options() const noexcept { return options_; }
    void set_fanout_width(std::size_t width) { options_.fanout_width = width == 0 ? 1 : width; }

    Mailbox& mailbox() noexcept { return mailbox_; }
    Mailbox::Clock::time_point deadline() const { return Mailbox::Clock::now() + options_.timeout; }

    /// Envelope from this rank in the world context.
    Envelope envelope(MsgType type, std::uint32_t dst, std::uint32_t tag) const;

    void send_to_monitor(QRank qrank, const Frame& frame);
    void send_to_rank(Rank rank, const Frame& frame);
    std::optional<ChannelKind> monitor_channel_kind(QRank qrank) const;

    std::optional<ClockOffset> clock_offset(QRank qrank) const;
    void set_clock_offset(QRank qrank, ClockOffset offset);

    /// Fresh tag for internal request/response traffic (PING sequence).
    std::uint32_t next_control_tag() noexcept { return control_tag_.fetch_add(1); }

    /// Sequence number for CC barriers; every rank advances it in step.
    std::uint32_t next_barrier_epoch() noexcept { return barrier_epoch_.fetch_add(1); }

    /// Context ids for new domains; authoritative only on rank 0.
    DomainRegistry& registry() noexcept { return registry_; }

    /// Frames dropped because of a foreign context.
    std::uint64_t rejected_frames() const { return mailbox_.rejected(); }

private:
    explicit RuntimeHandle(InitOptions options);
    friend std::unique_ptr<RuntimeHandle> mpiq_init(InitOptions options);

    void connect_monitors();
    void start_monitor_pump(QRank qrank, ChannelPtr channel);
    void start_classical_listener();
    void pump(ChannelPtr channel, std::optional<std::pair<SrcKind, std::uint32_t>> source);
    ChannelPtr outgoing(Rank rank);

    InitOptions options_;
    HybridDomain world_;
    DomainRegistry registry_;
    Mailbox mailbox_;
    std::atomic<bool> live_{true};
    std::atomic<std::uint32_t> control_tag_{0x80000000u};
    std::atomic<std::uint32_t> barrier_epoch_{0};

    mutable std::mutex mutex_;
    std::vector<ChannelPtr> monitor_channels_;
    std::vector<std::optional<ClockOffset>> offsets_;
    std::map<Rank, ChannelPtr> outgoing_;
    std::vector<ChannelPtr> incoming_;
    std::unique_ptr<Listener> listener_;
    std::vector<std::thread> threads_;
    bool registered_global_ = false;
};

/// MPIQ_Init: reads the config file, applies environment overrides and
/// returns the process's single live handle. A second init while a handle is
/// live throws StateError.
std::unique_ptr<RuntimeHandle> mpiq_init(const std::filesystem::path& config_path, Role role, Rank my_rank);
std::unique_ptr<RuntimeHandle> mpiq_init(InitOptions options);

/// Sends SHUTDOWN to owned monitors and closes every channel. Throws
/// StateError when called twice.
void mpiq_finalize(RuntimeHandle& handle);

/// Collective over classical ranks: rank 0 allocates a context id and sends
/// it to the others; every rank returns the same domain and admits its
/// context.
HybridDomain mpiq_comm_create(RuntimeHandle& handle, const QuantumNodeConfig& config, std::uint32_t tag = 0xC0000000u);

}  // namespace mpiq
