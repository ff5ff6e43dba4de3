// SPDX-License-Identifier: Apache-2.0
#include "mpiq/runtime.hpp"

#include <cstdlib>
#include <iostream>
#include <sstream>

#include "mpiq/payload.hpp"

namespace mpiq {

namespace {

std::mutex g_init_mutex;
bool g_handle_live = false;

std::optional<std::string> env(const char* name) {
    if (const char* v = std::getenv(name); v && *v) return std::string(v);
    return std::nullopt;
}

Endpoint parse_endpoint(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos) throw ConfigError("endpoint '" + text + "' lacks a port");
    const auto port = std::stoul(text.substr(colon + 1));
    if (port == 0 || port > 65535) throw ConfigError("endpoint '" + text + "' has a bad port");
    return {text.substr(0, colon), static_cast<std::uint16_t>(port)};
}

}  // namespace

void apply_environment(InitOptions& options) {
    if (auto peers = env("MPIQ_PEERS")) {
        options.classical_peers.clear();
        std::stringstream ss(*peers);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) options.classical_peers.push_back(parse_endpoint(item));
        }
    }
    if (auto np = env("MPIQ_NP")) {
        const auto n = std::stoul(*np);
        if (!options.classical_peers.empty() && n != options.classical_peers.size()) {
            throw ConfigError("MPIQ_NP disagrees with MPIQ_PEERS");
        }
    }
    if (auto seed = env("MPIQ_SEED")) options.seed = std::stoull(*seed);
    if (env("MPIQ_TIMEOUT_MS")) options.timeout = default_timeout();
    if (auto owns = env("MPIQ_OWNS_MONITORS")) options.owns_monitors = (*owns == "1");
}

RuntimeHandle::RuntimeHandle(InitOptions options) : options_(std::move(options)) {}

std::unique_ptr<RuntimeHandle> RuntimeHandle::create(InitOptions options) {
    const auto np = options.classical_peers.empty() ? 1u : static_cast<std::uint32_t>(options.classical_peers.size());
    if (options.rank >= np) throw ConfigError("rank " + std::to_string(options.rank) + " outside world of " + std::to_string(np));
    if (options.fanout_width == 0) options.fanout_width = 1;

    std::unique_ptr<RuntimeHandle> h(new RuntimeHandle(std::move(options)));
    h->world_ = make_domain(kWorldContext, np, h->options_.config);
    h->monitor_channels_.resize(h->world_.quantum_size());
    h->offsets_.resize(h->world_.quantum_size());
    if (np > 1) h->start_classical_listener();
    if (h->options_.role == Role::Classical) h->connect_monitors();
    return h;
}

RuntimeHandle::~RuntimeHandle() {
    if (live_) {
        try {
            finalize();
        } catch (const std::exception& e) {
            std::cerr << "mpiq: finalize during destruction failed: " << e.what() << "\n";
        }
    }
}

void RuntimeHandle::require_live() const {
    if (!live_) throw StateError("runtime handle has been finalized");
}

Envelope RuntimeHandle::envelope(MsgType type, std::uint32_t dst, std::uint32_t tag) const {
    Envelope env;
    env.msg_type = type;
    env.context = world_.context.value;
    env.src = options_.rank;
    env.dst = dst;
    env.tag = tag;
    env.src_kind = SrcKind::Classical;
    return env;
}

void RuntimeHandle::connect_monitors() {
    std::vector<DeviceIdentifier> failed;
    std::string detail;
    for (QRank q = 0; q < world_.quantum_size(); ++q) {
        const auto& dev = world_.q_map[q];
        try {
            auto ch = open_channel({dev.ip, dev.port}, options_.timeout, options_.preference);
            // The first exchange doubles as the liveness handshake.
            auto offset = estimate_clock_offset(*ch, dev, options_.timeout);
            {
                std::lock_guard lock(mutex_);
                offsets_[q] = std::move(offset);
            }
            start_monitor_pump(q, std::move(ch));
        } catch (const Error& e) {
            failed.push_back(dev);
            detail += "\n  " + to_string(dev) + ": " + e.what();
        }
    }
    if (!failed.empty()) {
        std::string names;
        for (const auto& d : failed) names += (names.empty() ? "" : ", ") + to_string(d);
        throw InitError("unreachable monitor(s): " + names + detail, std::move(failed));
    }
}

void RuntimeHandle::start_monitor_pump(QRank qrank, ChannelPtr channel) {
    std::lock_guard lock(mutex_);
    monitor_channels_[qrank] = channel;
    mailbox_.mark_alive(SrcKind::Quantum, qrank);
    threads_.emplace_back([this, channel, qrank] { pump(channel, std::pair{SrcKind::Quantum, qrank}); });
}

void RuntimeHandle::start_classical_listener() {
    const auto& self = options_.classical_peers.at(options_.rank);
    Listener::Options lo;
    lo.register_local = options_.preference == ChannelPreference::Auto;
    listener_ = Listener::bind(self, lo);
    threads_.emplace_back([this] {
        for (;;) {
            ChannelPtr ch;
            try {
                ch = listener_->accept(Millis(3600 * 1000));
            } catch (const TimeoutError&) {
                continue;
            } catch (const Error&) {
                return;
            }
            std::lock_guard lock(mutex_);
            if (!live_) {
                ch->close();
                return;
            }
            incoming_.push_back(ch);
            threads_.emplace_back([this, ch] { pump(ch, std::nullopt); });
        }
    });
}

void RuntimeHandle::pump(ChannelPtr channel, std::optional<std::pair<SrcKind, std::uint32_t>> source) {
    std::string reason = "channel closed";
    for (;;) {
        Frame frame;
        try {
            frame = channel->recv(Millis(3600 * 1000));
        } catch (const TimeoutError&) {
            continue;
        } catch (const Error& e) {
            reason = e.what();
            break;
        }
        if (!source) source = std::pair{frame.envelope.src_kind, frame.envelope.src};
        try {
            mailbox_.post(std::move(frame));
        } catch (const ProtocolError&) {
            // Counted by the mailbox; foreign-context frames never surface.
        }
    }
    if (source && live_) mailbox_.mark_dead(source->first, source->second, reason);
}

void RuntimeHandle::send_to_monitor(QRank qrank, const Frame& frame) {
    require_live();
    if (!world_.group.has_qrank(qrank)) throw AddressError("qrank " + std::to_string(qrank) + " not in world");
    ChannelPtr ch;
    {
        std::lock_guard lock(mutex_);
        ch = monitor_channels_[qrank];
    }
    if (!ch) throw ChannelClosed("no channel to " + to_string(world_.q_map[qrank]));
    try {
        ch->send(frame);
    } catch (const ChannelClosed& e) {
        mailbox_.mark_dead(SrcKind::Quantum, qrank, e.what());
        throw;
    }
}

ChannelPtr RuntimeHandle::outgoing(Rank rank) {
    {
        std::lock_guard lock(mutex_);
        if (auto it = outgoing_.find(rank); it != outgoing_.end() && it->second->is_open()) return it->second;
    }
    const auto deadline = Mailbox::Clock::now() + options_.timeout;
    const auto& ep = options_.classical_peers.at(rank);
    for (;;) {
        try {
            auto ch = open_channel(ep, options_.timeout, options_.preference);
            std::lock_guard lock(mutex_);
            outgoing_[rank] = ch;
            return ch;
        } catch (const ConnectError&) {
            // The peer may not be listening yet.
            if (Mailbox::Clock::now() >= deadline) throw;
            std::this_thread::sleep_for(Millis(10));
        }
    }
}

void RuntimeHandle::send_to_rank(Rank rank, const Frame& frame) {
    require_live();
    if (!world_.group.has_rank(rank)) throw AddressError("rank " + std::to_string(rank) + " not in world");
    if (rank == options_.rank) {
        mailbox_.post(frame);
        return;
    }
    outgoing(rank)->send(frame);
}

std::optional<ChannelKind> RuntimeHandle::monitor_channel_kind(QRank qrank) const {
    std::lock_guard lock(mutex_);
    if (qrank >= monitor_channels_.size() || !monitor_channels_[qrank]) return std::nullopt;
    return monitor_channels_[qrank]->kind();
}

std::optional<ClockOffset> RuntimeHandle::clock_offset(QRank qrank) const {
    std::lock_guard lock(mutex_);
    if (qrank >= offsets_.size()) return std::nullopt;
    return offsets_[qrank];
}

void RuntimeHandle::set_clock_offset(QRank qrank, ClockOffset offset) {
    std::lock_guard lock(mutex_);
    if (qrank < offsets_.size()) offsets_[qrank] = std::move(offset);
}

void RuntimeHandle::finalize() {
    if (!live_) throw StateError("runtime handle already finalized");
    if (options_.owns_monitors && options_.role == Role::Classical) {
        for (QRank q = 0; q < world_.quantum_size(); ++q) {
            try {
                const auto tag = next_control_tag();
                send_to_monitor(q, Frame(envelope(MsgType::Shutdown, q, tag), Bytes{}));
                mailbox_.take({world_.context.value, MsgType::Ack, SrcKind::Quantum, q, tag}, deadline());
            } catch (const Error& e) {
                std::cerr << "mpiq: shutdown of " << to_string(world_.q_map[q]) << " failed: " << e.what() << "\n";
            }
        }
    }
    live_ = false;
    mailbox_.shutdown();
    std::vector<std::thread> threads;
    {
        std::lock_guard lock(mutex_);
        if (listener_) listener_->close();
        for (auto& ch : monitor_channels_) {
            if (ch) ch->close();
        }
        for (auto& [r, ch] : outgoing_) ch->close();
        for (auto& ch : incoming_) ch->close();
    }
    // Accept thread may append pump threads until it observes live_ == false.
    for (;;) {
        {
            std::lock_guard lock(mutex_);
            if (threads.size() == threads_.size()) break;
            for (std::size_t i = threads.size(); i < threads_.size(); ++i) threads.push_back(std::move(threads_[i]));
        }
        for (auto& t : threads) {
            if (t.joinable()) t.join();
        }
    }
    std::lock_guard lock(mutex_);
    threads_.clear();
    std::lock_guard g(g_init_mutex);
    if (registered_global_) {
        g_handle_live = false;
        registered_global_ = false;
    }
}

std::unique_ptr<RuntimeHandle> mpiq_init(InitOptions options) {
    {
        std::lock_guard g(g_init_mutex);
        if (g_handle_live) throw StateError("a runtime handle is already live in this process");
        g_handle_live = true;
    }
    try {
        auto h = RuntimeHandle::create(std::move(options));
        std::lock_guard g(g_init_mutex);
        h->registered_global_ = true;
        return h;
    } catch (...) {
        std::lock_guard g(g_init_mutex);
        g_handle_live = false;
        throw;
    }
}

std::unique_ptr<RuntimeHandle> mpiq_init(const std::filesystem::path& config_path, Role role, Rank my_rank) {
    InitOptions options;
    options.config = load_qnode_config(config_path);
    options.role = role;
    options.rank = my_rank;
    apply_environment(options);
    return mpiq_init(std::move(options));
}

void mpiq_finalize(RuntimeHandle& handle) { handle.finalize(); }

HybridDomain mpiq_comm_create(RuntimeHandle& handle, const QuantumNodeConfig& config, std::uint32_t tag) {
    handle.require_live();
    validate_qnode_config(config);
    ContextId ctx;
    if (handle.rank() == 0) {
        ctx = handle.registry().allocate();
        for (Rank r = 1; r < handle.size(); ++r) {
            handle.send_to_rank(r, Frame(handle.envelope(MsgType::Data, r, tag), encode_u32(ctx.value)));
        }
    } else {
        auto f = handle.mailbox().take({handle.world().context.value, MsgType::Data, SrcKind::Classical, 0, tag},
                                       handle.deadline());
        ctx = ContextId{decode_u32(f.bytes())};
    }
    handle.mailbox().admit_context(ctx.value);
    return make_domain(ctx, static_cast<std::uint32_t>(handle.size()), config);
}

}  // namespace mpiq
