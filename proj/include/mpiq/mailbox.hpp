// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>

#include "mpiq/wire.hpp"

namespace mpiq {

/// Identifies what a receiver is waiting for. Matching is exact on every
/// field; `tag` may be left open for control traffic.
struct MatchSpec {
    std::uint32_t context = 0;
    MsgType type = MsgType::Data;
    SrcKind kind = SrcKind::Classical;
    std::uint32_t src = 0;
    std::optional<std::uint32_t> tag;

    bool matches(const Envelope& env) const noexcept {
        return env.context == context && env.msg_type == type && env.src_kind == kind && env.src == src &&
               (!tag || env.tag == *tag);
    }
};

/// Arrival queue between network pumps and blocking receives. Frames that
/// do not match a pending receive stay queued in arrival order.
class Mailbox {
public:
    using Clock = std::chrono::steady_clock;

    explicit Mailbox(std::set<std::uint32_t> contexts = {0});

    void admit_context(std::uint32_t context);
    bool admits(std::uint32_t context) const;

    /// Queues a frame. Frames for contexts this mailbox does not serve are
    /// rejected with ProtocolError and counted; they are never queued.
    void post(Frame frame);

    /// Removes and returns the oldest frame matching `spec`. If that frame's
    /// payload is longer than `max_len` it stays queued and TruncationError
    /// is thrown. When no frame matches and the source has been marked dead,
    /// throws ChannelClosed; at the deadline, TimeoutError.
    Frame take(const MatchSpec& spec, Clock::time_point deadline,
               std::size_t max_len = static_cast<std::size_t>(-1));

    void mark_dead(SrcKind kind, std::uint32_t src, std::string reason);
    void mark_alive(SrcKind kind, std::uint32_t src);
    bool is_dead(SrcKind kind, std::uint32_t src) const;

    /// Wakes all waiters with ChannelClosed.
    void shutdown();

    std::size_t pending() const;
    std::uint64_t rejected() const;

private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::set<std::uint32_t> contexts_;
    std::deque<Frame> queue_;
    std::map<std::pair<SrcKind, std::uint32_t>, std::string> dead_;
    std::uint64_t rejected_ = 0;
    bool shutdown_ = false;
};

}  // namespace mpiq
