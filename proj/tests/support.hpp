// SPDX-License-Identifier: Apache-2.0
// Shared fixtures: in-process monitors and classical handles.
#pragma once

#include <functional>
#include <memory>
#include <thread>
#include <vector>

#include "mpiq/launcher.hpp"
#include "mpiq/monitor.hpp"
#include "mpiq/runtime.hpp"

namespace mpiq::test {

/// N in-process monitors on ephemeral loopback ports.
struct MonitorCluster {
    std::vector<std::unique_ptr<MonitorServer>> monitors;
    QuantumNodeConfig config;

    MonitorCluster(std::size_t n, std::uint32_t qubits, std::uint64_t seed = 1, Millis delay = Millis(0)) {
        for (std::size_t i = 0; i < n; ++i) {
            MonitorOptions o;
            o.device = {"127.0.0.1", 0, static_cast<std::uint32_t>(i)};
            o.qubit_count = qubits;
            o.seed = mix64(seed, i);
            o.delay = delay;
            auto m = std::make_unique<MonitorServer>(o);
            m->start();
            config.devices.push_back({"127.0.0.1", m->port(), static_cast<std::uint32_t>(i), qubits, "statevector"});
            monitors.push_back(std::move(m));
        }
    }
    ~MonitorCluster() {
        for (auto& m : monitors) m->kill();
    }
};

inline InitOptions options_for(const QuantumNodeConfig& config, Rank rank = 0, std::vector<Endpoint> peers = {},
                               ChannelPreference pref = ChannelPreference::Auto) {
    InitOptions o;
    o.config = config;
    o.rank = rank;
    o.classical_peers = std::move(peers);
    o.timeout = Millis(4000);
    o.seed = 7;
    o.preference = pref;
    return o;
}

inline std::vector<Endpoint> free_peers(std::size_t np) {
    if (np <= 1) return {};
    const auto base = find_free_port_range("127.0.0.1", np);
    std::vector<Endpoint> peers;
    for (std::size_t i = 0; i < np; ++i) peers.push_back({"127.0.0.1", static_cast<std::uint16_t>(base + i)});
    return peers;
}

/// One handle per classical rank, all in this process.
inline std::vector<std::unique_ptr<RuntimeHandle>> make_world(const QuantumNodeConfig& config, std::size_t np,
                                                              ChannelPreference pref = ChannelPreference::Auto) {
    const auto peers = free_peers(np);
    std::vector<std::unique_ptr<RuntimeHandle>> handles;
    for (std::size_t r = 0; r < np; ++r) {
        handles.push_back(RuntimeHandle::create(options_for(config, static_cast<Rank>(r), peers, pref)));
    }
    return handles;
}

/// Runs fn(rank) on one thread per rank; rethrows the first failure.
inline void run_ranks(std::size_t np, const std::function<void(std::size_t)>& fn) {
    std::vector<std::exception_ptr> errors(np);
    std::vector<std::thread> threads;
    for (std::size_t r = 0; r < np; ++r) {
        threads.emplace_back([&, r] {
            try {
                fn(r);
            } catch (...) {
                errors[r] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace mpiq::test
