// SPDX-License-Identifier: Apache-2.0
// mpiq-monitor: per-device daemon serving one statevector backend.
#include <CLI11.hpp>

#include "mpiq/monitor.hpp"

int main(int argc, char** argv) {
    CLI::App app{"MPI-Q monitor process for one quantum device"};
    std::string ip = "127.0.0.1";
    std::uint16_t port = 0;
    std::uint32_t device_id = 0;
    std::uint32_t qubits = 0;
    std::uint64_t seed = 0;
    std::int64_t delay_ms = 0;
    app.add_option("--ip", ip, "Address to bind")->capture_default_str();
    app.add_option("--port", port, "Port to bind")->required()->check(CLI::Range(1, 65535));
    app.add_option("--device-id", device_id, "Device id within the node")->required();
    app.add_option("--qubits", qubits, "Qubit count of the device")->required()->check(CLI::Range(1, 26));
    app.add_option("--seed", seed, "Sampling seed")->capture_default_str();
    app.add_option("--delay-ms", delay_ms, "Extra latency per execution")->check(CLI::NonNegativeNumber);
    CLI11_PARSE(app, argc, argv);

    mpiq::MonitorOptions options;
    options.device = {ip, port, device_id};
    options.qubit_count = qubits;
    options.seed = seed;
    options.delay = mpiq::Millis(delay_ms);
    options.register_local = false;
    return mpiq::monitor_serve(options);
}
