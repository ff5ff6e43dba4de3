// SPDX-License-Identifier: Apache-2.0
#include "mpiq/domain.hpp"

#include <numeric>
#include <sstream>

#include "mpiq/bytes.hpp"
#include "mpiq/error.hpp"

namespace mpiq {

std::string to_string(const DeviceIdentifier& dev) {
    return "{" + dev.ip + ":" + std::to_string(dev.port) + ", device_id=" + std::to_string(dev.device_id) + "}";
}

std::ostream& operator<<(std::ostream& os, const DeviceIdentifier& dev) { return os << to_string(dev); }

VirtualTopology::VirtualTopology(std::vector<ClassicalSlot> classical, std::vector<QuantumVp> quantum)
    : classical_(std::move(classical)), quantum_(std::move(quantum)) {}

VirtualTopology::VirtualTopology(const VirtualTopology& other) {
    std::lock_guard lock(other.mutex_);
    classical_ = other.classical_;
    quantum_ = other.quantum_;
}

VirtualTopology& VirtualTopology::operator=(const VirtualTopology& other) {
    if (this == &other) return *this;
    std::scoped_lock lock(mutex_, other.mutex_);
    classical_ = other.classical_;
    quantum_ = other.quantum_;
    return *this;
}

std::vector<ClassicalSlot> VirtualTopology::classical_slots() const {
    std::lock_guard lock(mutex_);
    return classical_;
}

DomainRegistry::DomainRegistry(std::uint32_t max_value) : max_value_(max_value) {}

ContextId DomainRegistry::allocate() {
    std::lock_guard lock(mutex_);
    if (exhausted_ || next_ > max_value_) {
        exhausted_ = true;
        throw ResourceError("context id space exhausted");
    }
    const std::uint32_t id = next_;
    live_.insert(id);
    if (next_ == max_value_) {
        exhausted_ = true;
    } else {
        ++next_;
    }
    return ContextId{id};
}

void DomainRegistry::release(ContextId id) {
    std::lock_guard lock(mutex_);
    if (id.value != 0) live_.erase(id.value);
}

bool DomainRegistry::is_live(ContextId id) const {
    std::lock_guard lock(mutex_);
    return live_.contains(id.value);
}

std::size_t DomainRegistry::live_count() const {
    std::lock_guard lock(mutex_);
    return live_.size();
}

ContextId allocate_context_id(DomainRegistry& registry) { return registry.allocate(); }

HybridDomain make_domain(ContextId context, std::uint32_t classical_count, const QuantumNodeConfig& config,
                         const DomainOptions& options) {
    if (classical_count < 1) throw ConfigError("classical_count must be at least 1");
    validate_qnode_config(config);

    HybridDomain domain;
    domain.context = context;
    domain.group.classical_ranks.resize(classical_count);
    std::iota(domain.group.classical_ranks.begin(), domain.group.classical_ranks.end(), Rank{0});

    std::vector<ClassicalSlot> slots;
    for (std::uint32_t r = 0; r < classical_count; ++r) slots.push_back({r, options.slot_capacity, 0});

    std::vector<QuantumVp> vps;
    for (std::size_t i = 0; i < config.devices.size(); ++i) {
        const auto& d = config.devices[i];
        const auto qrank = static_cast<QRank>(i);
        DeviceIdentifier dev{d.ip, d.port, d.device_id};
        if (!domain.q_rev.emplace(dev, qrank).second) {
            throw ConfigError("duplicate device " + to_string(dev));
        }
        domain.group.quantum_qranks.push_back(qrank);
        domain.q_map.push_back(dev);
        domain.qubit_counts.push_back(d.qubit_count);
        vps.push_back({qrank, dev, d.qubit_count});
    }
    domain.topology = VirtualTopology(std::move(slots), std::move(vps));
    return domain;
}

HybridDomain create_hybrid_domain(std::uint32_t classical_count, const QuantumNodeConfig& config,
                                  ContextId parent_context, DomainRegistry& registry,
                                  const DomainOptions& options) {
    if (!registry.is_live(parent_context)) {
        throw StateError("parent context " + std::to_string(parent_context.value) + " is not live");
    }
    // Validate before consuming an id so a bad config does not burn one.
    validate_qnode_config(config);
    if (classical_count < 1) throw ConfigError("classical_count must be at least 1");
    return make_domain(registry.allocate(), classical_count, config, options);
}

std::uint32_t map_classical(VirtualTopology& topology, std::uint32_t demand, std::uint64_t rng_seed) {
    std::lock_guard lock(topology.mutex_);
    auto& slots = topology.classical_;
    if (slots.empty()) throw AllocationError("topology has no classical slots");

    std::vector<std::size_t> order(slots.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Fisher-Yates over a splitmix stream; fixed across standard libraries.
    std::uint64_t state = rng_seed;
    for (std::size_t i = order.size() - 1; i > 0; --i) {
        state = mix64(state);
        const auto j = static_cast<std::size_t>(state % (i + 1));
        std::swap(order[i], order[j]);
    }
    for (auto idx : order) {
        auto& slot = slots[idx];
        if (static_cast<std::uint64_t>(slot.load) + demand <= slot.capacity) {
            slot.load += demand;
            return slot.id;
        }
    }
    throw AllocationError("no classical slot can absorb demand " + std::to_string(demand) + " (probed " +
                          std::to_string(slots.size()) + " slots)");
}

void release_classical(VirtualTopology& topology, std::uint32_t slot_id, std::uint32_t demand) {
    std::lock_guard lock(topology.mutex_);
    for (auto& slot : topology.classical_) {
        if (slot.id == slot_id) {
            slot.load = demand > slot.load ? 0 : slot.load - demand;
            return;
        }
    }
    throw AddressError("unknown classical slot " + std::to_string(slot_id));
}

const DeviceIdentifier& map_quantum(const HybridDomain& domain, QRank qrank) {
    if (!domain.group.has_qrank(qrank)) {
        throw AddressError("qrank " + std::to_string(qrank) + " not in domain (size " +
                           std::to_string(domain.quantum_size()) + ")");
    }
    return domain.q_map[qrank];
}

QRank resolve_qrank(const HybridDomain& domain, const DeviceIdentifier& dev) {
    auto it = domain.q_rev.find(dev);
    if (it == domain.q_rev.end()) throw AddressError("device " + to_string(dev) + " not registered");
    return it->second;
}

}  // namespace mpiq
