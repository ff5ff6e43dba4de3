// SPDX-License-Identifier: Apache-2.0
#include "mpiq/mailbox.hpp"

#include "mpiq/error.hpp"

namespace mpiq {

Mailbox::Mailbox(std::set<std::uint32_t> contexts) : contexts_(std::move(contexts)) {}

void Mailbox::admit_context(std::uint32_t context) {
    std::lock_guard lock(mutex_);
    contexts_.insert(context);
}

bool Mailbox::admits(std::uint32_t context) const {
    std::lock_guard lock(mutex_);
    return contexts_.contains(context);
}

void Mailbox::post(Frame frame) {
    {
        std::lock_guard lock(mutex_);
        if (!contexts_.contains(frame.envelope.context)) {
            ++rejected_;
            throw ProtocolError("frame for foreign context " + std::to_string(frame.envelope.context) + " rejected");
        }
        queue_.push_back(std::move(frame));
    }
    cv_.notify_all();
}

Frame Mailbox::take(const MatchSpec& spec, Clock::time_point deadline, std::size_t max_len) {
    std::unique_lock lock(mutex_);
    for (;;) {
        for (auto it = queue_.begin(); it != queue_.end(); ++it) {
            if (!spec.matches(it->envelope)) continue;
            if (it->bytes().size() > max_len) {
                throw TruncationError("message of " + std::to_string(it->bytes().size()) +
                                      " bytes exceeds receive limit " + std::to_string(max_len));
            }
            Frame f = std::move(*it);
            queue_.erase(it);
            return f;
        }
        if (shutdown_) throw ChannelClosed("mailbox shut down");
        if (auto d = dead_.find({spec.kind, spec.src}); d != dead_.end()) {
            throw ChannelClosed(std::string(spec.kind == SrcKind::Quantum ? "qrank " : "rank ") +
                                std::to_string(spec.src) + " unreachable: " + d->second);
        }
        if (Clock::now() >= deadline) {
            throw TimeoutError(std::string("no ") + to_string(spec.type) + " from " +
                               (spec.kind == SrcKind::Quantum ? "qrank " : "rank ") + std::to_string(spec.src) +
                               (spec.tag ? " tag " + std::to_string(*spec.tag) : std::string()) + " before deadline");
        }
        cv_.wait_until(lock, deadline);
    }
}

void Mailbox::mark_dead(SrcKind kind, std::uint32_t src, std::string reason) {
    {
        std::lock_guard lock(mutex_);
        dead_[{kind, src}] = std::move(reason);
    }
    cv_.notify_all();
}

void Mailbox::mark_alive(SrcKind kind, std::uint32_t src) {
    std::lock_guard lock(mutex_);
    dead_.erase({kind, src});
}

bool Mailbox::is_dead(SrcKind kind, std::uint32_t src) const {
    std::lock_guard lock(mutex_);
    return dead_.contains({kind, src});
}

void Mailbox::shutdown() {
    {
        std::lock_guard lock(mutex_);
        shutdown_ = true;
    }
    cv_.notify_all();
}

std::size_t Mailbox::pending() const {
    std::lock_guard lock(mutex_);
    return queue_.size();
}

std::uint64_t Mailbox::rejected() const {
    std::lock_guard lock(mutex_);
    return rejected_;
}

}  // namespace mpiq
