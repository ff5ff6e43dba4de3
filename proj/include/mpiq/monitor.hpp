// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "mpiq/channel.hpp"
#include "mpiq/domain.hpp"
#include "mpiq/payload.hpp"
#include "mpiq/qsim.hpp"

namespace mpiq {

enum class MonitorPhase { Idle, Armed, Executing, Reporting };

struct PendingExecution {
    std::uint32_t tag = 0;
    WaveformBlock block;
    qsim::Circuit circuit;
    Envelope request;
    ChannelPtr reply;
};

/// State of one MonitorProcess bound to one control device.
struct MonitorState {
    DeviceIdentifier device;
    std::uint32_t qubit_count = 1;
    std::deque<PendingExecution> pending;
    MonitorPhase phase = MonitorPhase::Idle;
    std::uint64_t rng_seed = 0;
    Millis delay{0};
};

/// Per-execution seed: mix64(monitor seed, tag, circuit digest).
std::uint64_t execution_seed(std::uint64_t monitor_seed, std::uint32_t tag, std::uint64_t digest) noexcept;

/// Receipt checks, in order: digest (IntegrityError), qubit range
/// (QubitRangeError), gate stream (DecodeError). Returns the decoded circuit.
qsim::Circuit verify_block(const MonitorState& state, const WaveformBlock& block);

/// Verifies and runs one block, sleeping the injected delay before
/// returning its results.
ShotTable handle_execute(const MonitorState& state, std::uint32_t tag, const WaveformBlock& block);

void inject_compute_delay(MonitorState& state, Millis delay);

struct MonitorOptions {
    DeviceIdentifier device;
    std::uint32_t qubit_count = 1;
    std::uint64_t seed = 0;
    Millis delay{0};
    /// Also accept in-process local connections.
    bool register_local = true;
};

/// One entry of the monitor's device-side log.
struct MonitorEvent {
    enum class Kind { Received, Rejected, Executed, Released } kind;
    std::uint32_t tag = 0;
    std::uint32_t addressed_qrank = 0;
    std::uint64_t digest = 0;
    std::uint64_t time_ns = 0;
    std::uint64_t target_ns = 0;
    ErrorCode status = ErrorCode::Ok;
};

/// A MonitorProcess daemon. Control messages (SYNC, PING, SHUTDOWN) are
/// handled on the connection threads; EXECUTE runs serially on one executor.
class MonitorServer {
public:
    explicit MonitorServer(MonitorOptions options);
    ~MonitorServer();
    MonitorServer(const MonitorServer&) = delete;
    MonitorServer& operator=(const MonitorServer&) = delete;

    /// Binds the device port and starts serving. Throws IoError on bind
    /// failure.
    void start();
    /// Blocks until a SHUTDOWN has been drained and acknowledged, then tears
    /// down.
    void wait();
    /// Abrupt stop: no draining, no replies. Models a crashed process.
    void kill();

    std::uint16_t port() const noexcept;
    const DeviceIdentifier& device() const noexcept { return state_.device; }
    void set_delay(Millis delay);
    std::vector<MonitorEvent> events() const;
    std::size_t connection_count() const;
    bool stopped() const;

private:
    void accept_loop();
    void serve_connection(ChannelPtr channel);
    void executor_loop();
    void on_execute(const ChannelPtr& channel, const Frame& frame);
    void on_sync_ready(const ChannelPtr& channel, const Frame& frame);
    void on_sync_release(const ChannelPtr& channel, const Frame& frame);
    void on_shutdown(const ChannelPtr& channel, const Frame& frame);
    void reply(const ChannelPtr& channel, const Envelope& request, MsgType type, Bytes payload);
    void record(MonitorEvent event);
    void teardown();

    MonitorOptions options_;
    std::unique_ptr<Listener> listener_;

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    MonitorState state_;
    bool held_ = false;
    bool executing_ = false;
    bool draining_ = false;
    bool stop_ = false;
    bool shutdown_acked_ = false;
    bool torn_down_ = false;
    std::vector<MonitorEvent> events_;
    std::vector<ChannelPtr> connections_;
    std::vector<std::thread> threads_;
    std::thread acceptor_;
    std::thread executor_;
};

/// Runs a monitor until SHUTDOWN and returns the process exit code
/// (nonzero when the port cannot be bound).
int monitor_serve(const MonitorOptions& options);

}  // namespace mpiq
