// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <sys/types.h>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mpiq/config.hpp"
#include "mpiq/domain.hpp"
#include "mpiq/error.hpp"

namespace mpiq {

/// Locates the mpiq-monitor executable: $MPIQ_MONITOR_BIN, then a sibling
/// of the running executable, then the build-time default when compiled in.
std::filesystem::path find_monitor_binary();

/// Exit status of a reaped child: its exit code, or 128 + signal.
int decode_wait_status(int status);

/// Spawns `argv` with `env_overrides` applied on top of the current
/// environment. Throws LaunchError when the program cannot be started.
pid_t spawn_process(const std::vector<std::string>& argv, const std::map<std::string, std::string>& env_overrides);

/// Returns true when `ep` can be bound right now.
bool port_available(const std::string& ip, std::uint16_t port);

/// First port of `count` consecutive bindable ports above 20000.
std::uint16_t find_free_port_range(const std::string& ip, std::size_t count);

/// One mpiq-monitor child process per configured device.
class MonitorFleet {
public:
    struct Options {
        std::uint64_t seed = 0;
        std::chrono::milliseconds delay{0};
        std::chrono::milliseconds ready_timeout{10000};
        std::filesystem::path binary;  // empty: find_monitor_binary()
    };

    /// Throws LaunchError when a port is taken or a monitor fails to come up.
    MonitorFleet(const QuantumNodeConfig& config, Options options);
    MonitorFleet(const QuantumNodeConfig& config) : MonitorFleet(config, Options{}) {}
    ~MonitorFleet();
    MonitorFleet(const MonitorFleet&) = delete;
    MonitorFleet& operator=(const MonitorFleet&) = delete;

    std::size_t size() const noexcept { return children_.size(); }
    pid_t pid(std::size_t index) const { return children_.at(index).pid; }
    std::optional<int> exit_code(std::size_t index) const { return children_.at(index).exit_code; }

    /// SIGKILL, then reap.
    void kill(std::size_t index);

    /// Waits up to `timeout` for every child to exit on its own. Returns true
    /// when all have exited.
    bool wait_all(std::chrono::milliseconds timeout);

    /// Sends SHUTDOWN to every monitor still running, waits, and kills
    /// stragglers. Returns the exit codes in device order.
    std::vector<int> shutdown(std::chrono::milliseconds grace = std::chrono::milliseconds(5000));

private:
    struct Child {
        DeviceIdentifier device;
        pid_t pid = -1;
        std::optional<int> exit_code;
    };
    bool reap(Child& child, bool block);

    std::vector<Child> children_;
};

struct LaunchOptions {
    std::uint32_t np = 1;
    std::filesystem::path config_path;
    std::vector<std::string> program;  // argv of the classical program
    std::optional<std::uint64_t> seed;
    std::chrono::milliseconds delay{0};  // injected into every monitor
};

struct LaunchResult {
    int exit_code = 0;                  // first nonzero classical exit code, else 0
    std::vector<int> classical_codes;   // by rank
    std::vector<int> monitor_codes;     // by device order
    std::size_t children = 0;
};

/// Starts one monitor per configured device and `np` classical ranks with
/// MPIQ_RANK / MPIQ_NP / MPIQ_PEERS / MPIQ_QCONFIG / MPIQ_SEED /
/// MPIQ_DELAY_MS set, waits for
/// the classical ranks and then retires the monitors. Throws LaunchError when
/// a configured port is already in use.
LaunchResult launch(const LaunchOptions& options);

}  // namespace mpiq
