// SPDX-License-Identifier: Apache-2.0
#include "mpiq/collectives.hpp"

#include <algorithm>
#include <deque>
#include <set>

namespace mpiq {

SendQ build_send_q(std::uint32_t n_qubits, const std::vector<std::uint32_t>& fragment_sizes) {
    std::uint64_t total = 0;
    for (auto s : fragment_sizes) total += s;
    if (total != n_qubits) {
        throw ShapeError("fragment sizes sum to " + std::to_string(total) + ", expected " + std::to_string(n_qubits));
    }
    SendQ q;
    std::uint32_t next = 0;
    for (auto s : fragment_sizes) {
        if (s == 0) throw ShapeError("empty fragment");
        auto& g = q.groups.emplace_back();
        for (std::uint32_t i = 0; i < s; ++i) g.push_back(next++);
    }
    return q;
}

std::uint32_t validate_send_q(const SendQ& send_q) {
    std::set<std::uint32_t> seen;
    std::size_t count = 0;
    for (std::size_t g = 0; g < send_q.groups.size(); ++g) {
        if (send_q.groups[g].empty()) throw MappingError("group " + std::to_string(g) + " is empty");
        for (auto q : send_q.groups[g]) {
            if (!seen.insert(q).second) {
                throw MappingError("qubit " + std::to_string(q) + " assigned more than once (group " +
                                   std::to_string(g) + ")");
            }
            ++count;
        }
    }
    if (!seen.empty() && (*seen.begin() != 0 || *seen.rbegin() != count - 1)) {
        throw MappingError("groups do not cover 0.." + std::to_string(count - 1) + " exactly");
    }
    return static_cast<std::uint32_t>(count);
}

namespace {

struct Delivery {
    QRank qrank;
    const WaveformBlock* block;
};

/// Sends every delivery with at most `width` ACKs outstanding. Failures are
/// collected rather than aborting the remaining targets.
void fan_out(RuntimeHandle& handle, const std::vector<Delivery>& deliveries, std::uint32_t tag, const char* what) {
    const std::size_t width = std::max<std::size_t>(1, handle.options().fanout_width);
    std::vector<std::pair<QRank, ErrorCode>> failures;
    std::string detail;
    std::deque<QRank> outstanding;

    auto settle_one = [&] {
        const auto q = outstanding.front();
        outstanding.pop_front();
        try {
            await_execute_ack(handle, q, tag);
        } catch (const Error& e) {
            failures.emplace_back(q, e.code());
            detail += std::string("\n  ") + e.what();
        }
    };

    for (const auto& d : deliveries) {
        try {
            send_execute(handle, d.qrank, tag, *d.block);
            outstanding.push_back(d.qrank);
        } catch (const Error& e) {
            failures.emplace_back(d.qrank, e.code());
            detail += std::string("\n  ") + e.what();
        }
        while (outstanding.size() >= width) settle_one();
    }
    while (!outstanding.empty()) settle_one();

    if (!failures.empty()) {
        std::sort(failures.begin(), failures.end());
        std::vector<DeviceIdentifier> devices;
        std::vector<ErrorCode> causes;
        std::string names;
        for (auto [q, code] : failures) {
            devices.push_back(handle.world().q_map[q]);
            causes.push_back(code);
            names += (names.empty() ? "" : ", ") + to_string(handle.world().q_map[q]);
        }
        throw CollectiveError(std::string(what) + " failed for " + names + detail, std::move(devices),
                              std::move(causes));
    }
}

}  // namespace

void mpiq_bcast(RuntimeHandle& handle, const WaveformBlock& block_template, const std::vector<QRank>& targets,
                std::uint32_t tag) {
    handle.require_live();
    std::vector<WaveformBlock> blocks;
    blocks.reserve(targets.size());
    for (auto q : targets) {
        const auto& dev = map_quantum(handle.world(), q);
        auto& b = blocks.emplace_back(block_template);
        b.node_ip = dev.ip;
        b.device_id = dev.device_id;
    }
    std::vector<Delivery> deliveries;
    for (std::size_t i = 0; i < targets.size(); ++i) deliveries.push_back({targets[i], &blocks[i]});
    fan_out(handle, deliveries, tag, "MPIQ_Bcast");
}

void mpiq_scatter(RuntimeHandle& handle, const std::vector<WaveformBlock>& global_blocks, const SendQ& send_q,
                  std::uint32_t tag) {
    handle.require_live();
    if (global_blocks.size() != send_q.groups.size()) {
        throw ShapeError(std::to_string(global_blocks.size()) + " blocks for " + std::to_string(send_q.groups.size()) +
                         " send_q groups");
    }
    validate_send_q(send_q);
    if (send_q.groups.size() > handle.world().quantum_size()) {
        throw ShapeError(std::to_string(send_q.groups.size()) + " groups but only " +
                         std::to_string(handle.world().quantum_size()) + " quantum processes");
    }
    for (std::size_t i = 0; i < global_blocks.size(); ++i) {
        if (global_blocks[i].channels.size() != send_q.groups[i].size()) {
            throw ShapeError("block " + std::to_string(i) + " has " + std::to_string(global_blocks[i].channels.size()) +
                             " channels, group has " + std::to_string(send_q.groups[i].size()) + " qubits");
        }
    }
    std::vector<Delivery> deliveries;
    for (std::size_t i = 0; i < global_blocks.size(); ++i) {
        deliveries.push_back({static_cast<QRank>(i), &global_blocks[i]});
    }
    fan_out(handle, deliveries, tag, "MPIQ_Scatter");
}

GatherResult mpiq_gather(RuntimeHandle& handle, const std::vector<QRank>& sources, std::uint32_t tag) {
    handle.require_live();
    std::vector<QRank> ordered = sources;
    std::sort(ordered.begin(), ordered.end());
    ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());
    for (auto q : ordered) map_quantum(handle.world(), q);

    GatherResult result;
    const auto deadline = handle.deadline();
    for (auto q : ordered) {
        try {
            result.tables.push_back(recv_result(handle, q, tag, deadline));
        } catch (const Error&) {
            result.missing.push_back(q);
            result.missing_devices.push_back(handle.world().q_map[q]);
        }
    }
    result.complete = result.missing.empty();
    return result;
}

Bytes serialize_gather_result(const GatherResult& result) {
    if (result.tables.size() > UINT16_MAX) throw SizeError("too many tables");
    Bytes out;
    ByteWriter w(out);
    w.u16(static_cast<std::uint16_t>(result.tables.size()));
    for (const auto& t : result.tables) {
        w.u32(t.qrank);
        w.bytes(encode_result_payload(t));
    }
    return out;
}

GatherResult deserialize_gather_result(ByteView bytes, const std::vector<QRank>& expected_sources) {
    ByteReader<DecodeError> r(bytes);
    GatherResult result;
    const auto count = r.u16();
    for (std::uint16_t i = 0; i < count; ++i) {
        const auto qrank = r.u32();
        const auto pos = r.position();
        const auto shots = r.u32();
        const auto width = r.u16();
        const std::size_t len = 6 + static_cast<std::size_t>(shots) * ((width + 7u) / 8u);
        (void)pos;
        r.bytes(len - 6);
        result.tables.push_back(decode_result_payload(bytes.subspan(pos, len), qrank));
    }
    if (!r.done()) throw DecodeError("trailing bytes after gather result");
    std::set<QRank> have;
    for (const auto& t : result.tables) have.insert(t.qrank);
    std::set<QRank> expected(expected_sources.begin(), expected_sources.end());
    for (auto q : expected) {
        if (!have.contains(q)) result.missing.push_back(q);
    }
    result.complete = result.missing.empty();
    return result;
}

GatherResult mpiq_allgather(RuntimeHandle& handle, const std::vector<QRank>& sources, std::uint32_t tag) {
    handle.require_live();
    if (handle.rank() == 0) {
        auto result = mpiq_gather(handle, sources, tag);
        const auto bytes = serialize_gather_result(result);
        std::vector<Rank> failed;
        std::string detail;
        for (Rank r = 1; r < handle.size(); ++r) {
            try {
                classical_send(handle, r, tag, bytes);
            } catch (const Error& e) {
                failed.push_back(r);
                detail += std::string("\n  rank ") + std::to_string(r) + ": " + e.what();
            }
        }
        if (!failed.empty()) throw CollectiveError("MPIQ_Allgather distribution failed" + detail, {}, {});
        return result;
    }
    const auto bytes = classical_recv(handle, 0, tag);
    auto result = deserialize_gather_result(bytes, sources);
    for (auto q : result.missing) {
        if (handle.world().group.has_qrank(q)) result.missing_devices.push_back(handle.world().q_map[q]);
    }
    return result;
}

}  // namespace mpiq
