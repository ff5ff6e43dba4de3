// SPDX-License-Identifier: Apache-2.0
#include "mpiq/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "mpiq/error.hpp"

namespace mpiq {

namespace {

using nlohmann::json;

std::size_t line_of(std::string_view text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') ++line;
    }
    return line;
}

const json& field(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError("missing field '" + where + "." + key + "'");
    return *it;
}

std::uint64_t unsigned_field(const json& obj, const char* key, const std::string& where) {
    const auto& v = field(obj, key, where);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw ConfigError("field '" + where + "." + key + "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

}  // namespace

void validate_qnode_config(const QuantumNodeConfig& config) {
    std::set<std::pair<std::string, std::uint32_t>> seen;
    for (std::size_t i = 0; i < config.devices.size(); ++i) {
        const auto& d = config.devices[i];
        const std::string where = "devices[" + std::to_string(i) + "]";
        if (d.ip.empty()) throw ConfigError("field '" + where + ".ip' is empty");
        if (d.port == 0) throw ConfigError("field '" + where + ".port' must be in 1..65535");
        if (d.qubit_count < 1 || d.qubit_count > kMaxDeviceQubits) {
            throw ConfigError("field '" + where + ".qubit_count' = " + std::to_string(d.qubit_count) +
                              " outside [1, " + std::to_string(kMaxDeviceQubits) + "]");
        }
        if (d.backend != "statevector") {
            throw ConfigError("field '" + where + ".backend' = '" + d.backend + "' is not supported");
        }
        if (!seen.emplace(d.ip, d.device_id).second) {
            throw ConfigError("duplicate device (" + d.ip + ", " + std::to_string(d.device_id) + ") at " + where);
        }
    }
    if (!(config.epsilon_sync_ms > 0.0)) throw ConfigError("field 'epsilon_sync_ms' must be positive");
}

QuantumNodeConfig parse_qnode_config(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ConfigError("syntax error at line " + std::to_string(line_of(text, e.byte)) + ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("top level must be an object");

    QuantumNodeConfig config;
    const auto& devices = field(doc, "devices", "");
    if (!devices.is_array()) throw ConfigError("field '.devices' must be an array");
    for (std::size_t i = 0; i < devices.size(); ++i) {
        const auto& entry = devices[i];
        const std::string where = "devices[" + std::to_string(i) + "]";
        if (!entry.is_object()) throw ConfigError("'" + where + "' must be an object");
        DeviceConfig d;
        const auto& ip = field(entry, "ip", where);
        if (!ip.is_string()) throw ConfigError("field '" + where + ".ip' must be a string");
        d.ip = ip.get<std::string>();
        const auto port = unsigned_field(entry, "port", where);
        if (port < 1 || port > 65535) throw ConfigError("field '" + where + ".port' must be in 1..65535");
        d.port = static_cast<std::uint16_t>(port);
        const auto id = unsigned_field(entry, "device_id", where);
        if (id > UINT32_MAX) throw ConfigError("field '" + where + ".device_id' out of range");
        d.device_id = static_cast<std::uint32_t>(id);
        const auto qubits = unsigned_field(entry, "qubit_count", where);
        d.qubit_count = static_cast<std::uint32_t>(std::min<std::uint64_t>(qubits, UINT32_MAX));
        if (auto it = entry.find("backend"); it != entry.end()) {
            if (!it->is_string()) throw ConfigError("field '" + where + ".backend' must be a string");
            d.backend = it->get<std::string>();
        }
        config.devices.push_back(std::move(d));
    }
    if (auto it = doc.find("epsilon_sync_ms"); it != doc.end()) {
        if (!it->is_number()) throw ConfigError("field '.epsilon_sync_ms' must be a number");
        config.epsilon_sync_ms = it->get<double>();
    }
    validate_qnode_config(config);
    return config;
}

std::string serialize_qnode_config(const QuantumNodeConfig& config) {
    json doc;
    doc["epsilon_sync_ms"] = config.epsilon_sync_ms;
    doc["devices"] = json::array();
    for (const auto& d : config.devices) {
        doc["devices"].push_back({{"ip", d.ip},
                                  {"port", d.port},
                                  {"device_id", d.device_id},
                                  {"qubit_count", d.qubit_count},
                                  {"backend", d.backend}});
    }
    return doc.dump(2) + "\n";
}

QuantumNodeConfig load_qnode_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_qnode_config(buf.str());
}

QuantumNodeConfig make_loopback_config(std::size_t count, std::uint16_t base_port,
                                       std::uint32_t qubits_per_device) {
    QuantumNodeConfig config;
    for (std::size_t i = 0; i < count; ++i) {
        config.devices.push_back({"127.0.0.1", static_cast<std::uint16_t>(base_port + i),
                                  static_cast<std::uint32_t>(i), qubits_per_device, "statevector"});
    }
    return config;
}

}  // namespace mpiq
