// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mpiq/error.hpp"

namespace mpiq {

inline constexpr std::uint32_t kMaxDeviceQubits = 26;

struct DeviceConfig {
    std::string ip;
    std::uint16_t port = 0;
    std::uint32_t device_id = 0;
    std::uint32_t qubit_count = 0;
    std::string backend = "statevector";

    bool operator==(const DeviceConfig&) const = default;
};

/// Contents of a quantum node configuration file. Device order defines
/// qrank assignment.
struct QuantumNodeConfig {
    std::vector<DeviceConfig> devices;
    double epsilon_sync_ms = 50.0;

    bool operator==(const QuantumNodeConfig&) const = default;
};

/// Parses and validates a JSON configuration document. Every failure is a
/// ConfigError whose message names the offending line or field.
QuantumNodeConfig parse_qnode_config(std::string_view text);

std::string serialize_qnode_config(const QuantumNodeConfig& config);

QuantumNodeConfig load_qnode_config(const std::filesystem::path& path);

/// Checks the config invariants (qubit range, unique (ip, device_id), port
/// range, backend name). Throws ConfigError.
void validate_qnode_config(const QuantumNodeConfig& config);

/// A loopback config with `count` devices on consecutive ports.
QuantumNodeConfig make_loopback_config(std::size_t count, std::uint16_t base_port,
                                       std::uint32_t qubits_per_device);

}  // namespace mpiq
