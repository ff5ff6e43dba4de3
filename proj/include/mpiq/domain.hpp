// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <tuple>
#include <string>
#include <vector>

#include "mpiq/config.hpp"
#include "mpiq/error.hpp"

namespace mpiq {

/// Physical address of one quantum control device. Identity is the
/// (ip, device_id) pair; the port tells a client where its monitor listens.
struct DeviceIdentifier {
    std::string ip;
    std::uint16_t port = 0;
    std::uint32_t device_id = 0;

    bool operator==(const DeviceIdentifier&) const = default;
};

std::string to_string(const DeviceIdentifier& dev);
std::ostream& operator<<(std::ostream& os, const DeviceIdentifier& dev);

/// Ordering on the (ip, device_id) identity only.
struct DeviceKeyLess {
    bool operator()(const DeviceIdentifier& a, const DeviceIdentifier& b) const noexcept {
        return std::tie(a.ip, a.device_id) < std::tie(b.ip, b.device_id);
    }
};

struct ContextId {
    std::uint32_t value = 0;

    auto operator<=>(const ContextId&) const = default;
};

inline constexpr ContextId kWorldContext{0};

using Rank = std::uint32_t;
using QRank = std::uint32_t;

/// Classical ranks and quantum qranks live in separate namespaces; a rank
/// value is never looked up as a qrank or vice versa.
struct ProcessGroup {
    std::vector<Rank> classical_ranks;
    std::vector<QRank> quantum_qranks;

    bool has_rank(Rank r) const noexcept { return r < classical_ranks.size(); }
    bool has_qrank(QRank q) const noexcept { return q < quantum_qranks.size(); }
};

struct ClassicalSlot {
    std::uint32_t id = 0;
    std::uint32_t capacity = 0;
    std::uint32_t load = 0;
};

struct QuantumVp {
    std::uint32_t id = 0;
    DeviceIdentifier device;
    std::uint32_t qubit_count = 0;
};

/// Virtual processor layer. Quantum bindings are fixed at construction;
/// classical slot loads are the only mutable state and are guarded by one
/// mutex per topology.
class VirtualTopology {
public:
    VirtualTopology() = default;
    VirtualTopology(std::vector<ClassicalSlot> classical, std::vector<QuantumVp> quantum);
    VirtualTopology(const VirtualTopology& other);
    VirtualTopology& operator=(const VirtualTopology& other);

    std::vector<ClassicalSlot> classical_slots() const;
    const std::vector<QuantumVp>& quantum_vps() const noexcept { return quantum_; }

private:
    friend std::uint32_t map_classical(VirtualTopology&, std::uint32_t, std::uint64_t);
    friend void release_classical(VirtualTopology&, std::uint32_t, std::uint32_t);

    mutable std::mutex mutex_;
    std::vector<ClassicalSlot> classical_;
    std::vector<QuantumVp> quantum_;
};

struct HybridDomain {
    ContextId context;
    ProcessGroup group;
    VirtualTopology topology;
    std::vector<DeviceIdentifier> q_map;                           // indexed by qrank
    std::map<DeviceIdentifier, QRank, DeviceKeyLess> q_rev;
    std::vector<std::uint32_t> qubit_counts;                       // indexed by qrank

    std::size_t classical_size() const noexcept { return group.classical_ranks.size(); }
    std::size_t quantum_size() const noexcept { return group.quantum_qranks.size(); }
};

/// Hands out context ids within one launch. 0 is the world context; ids
/// strictly increase and are never reused, even after release.
class DomainRegistry {
public:
    explicit DomainRegistry(std::uint32_t max_value = UINT32_MAX);

    ContextId allocate();
    void release(ContextId id);
    bool is_live(ContextId id) const;
    std::size_t live_count() const;

private:
    mutable std::mutex mutex_;
    std::uint32_t next_ = 1;
    std::uint32_t max_value_;
    bool exhausted_ = false;
    std::set<std::uint32_t> live_{0};
};

ContextId allocate_context_id(DomainRegistry& registry);

struct DomainOptions {
    std::uint32_t slot_capacity = 4;
};

/// Builds a domain with `classical_count` ranks and one qrank per config
/// device, in file order. The context comes from `registry`.
HybridDomain create_hybrid_domain(std::uint32_t classical_count, const QuantumNodeConfig& config,
                                  ContextId parent_context, DomainRegistry& registry,
                                  const DomainOptions& options = {});

/// Builds a domain with an explicit context, skipping the registry. Used
/// for the world domain and when a context id arrives from rank 0.
HybridDomain make_domain(ContextId context, std::uint32_t classical_count, const QuantumNodeConfig& config,
                         const DomainOptions& options = {});

/// Random adaptive allocation: probes slots in a seeded random order
/// without replacement and takes the first one with room for `demand`.
std::uint32_t map_classical(VirtualTopology& topology, std::uint32_t demand, std::uint64_t rng_seed);
void release_classical(VirtualTopology& topology, std::uint32_t slot_id, std::uint32_t demand);

/// Strict fixed mapping: qrank -> device.
const DeviceIdentifier& map_quantum(const HybridDomain& domain, QRank qrank);
QRank resolve_qrank(const HybridDomain& domain, const DeviceIdentifier& dev);

}  // namespace mpiq
