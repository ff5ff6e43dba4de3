// SPDX-License-Identifier: Apache-2.0
#include "mpiq/monitor.hpp"

#include <iostream>

#include "mpiq/sync.hpp"

namespace mpiq {

std::uint64_t execution_seed(std::uint64_t monitor_seed, std::uint32_t tag, std::uint64_t digest) noexcept {
    return mix64(mix64(monitor_seed, tag), digest);
}

qsim::Circuit verify_block(const MonitorState& state, const WaveformBlock& block) {
    const auto digest = compute_block_digest(block.channels);
    if (digest != block.circuit_digest) {
        throw IntegrityError("digest mismatch: payload hashes to " + std::to_string(digest) + ", header says " +
                             std::to_string(block.circuit_digest));
    }
    validate_block(block, state.qubit_count);
    return qsim::decode_gate_stream(block.channels);
}

namespace {

ShotTable run_circuit(std::uint64_t monitor_seed, std::uint32_t tag, const WaveformBlock& block,
                      const qsim::Circuit& circuit) {
    return qsim::simulate(circuit, block.shots, execution_seed(monitor_seed, tag, block.circuit_digest));
}

}  // namespace

ShotTable handle_execute(const MonitorState& state, std::uint32_t tag, const WaveformBlock& block) {
    const auto circuit = verify_block(state, block);
    auto table = run_circuit(state.rng_seed, tag, block, circuit);
    if (state.delay.count() > 0) std::this_thread::sleep_for(state.delay);
    return table;
}

void inject_compute_delay(MonitorState& state, Millis delay) { state.delay = delay < Millis(0) ? Millis(0) : delay; }

// ---------------------------------------------------------------------------

MonitorServer::MonitorServer(MonitorOptions options) : options_(std::move(options)) {
    state_.device = options_.device;
    state_.qubit_count = options_.qubit_count;
    state_.rng_seed = options_.seed;
    inject_compute_delay(state_, options_.delay);
}

MonitorServer::~MonitorServer() { teardown(); }

void MonitorServer::start() {
    Listener::Options lo;
    lo.register_local = options_.register_local;
    listener_ = Listener::bind({options_.device.ip, options_.device.port}, lo);
    state_.device.port = listener_->port();
    acceptor_ = std::thread([this] { accept_loop(); });
    executor_ = std::thread([this] { executor_loop(); });
}

std::uint16_t MonitorServer::port() const noexcept { return state_.device.port; }

void MonitorServer::set_delay(Millis delay) {
    std::lock_guard lock(mutex_);
    inject_compute_delay(state_, delay);
}

std::vector<MonitorEvent> MonitorServer::events() const {
    std::lock_guard lock(mutex_);
    return events_;
}

std::size_t MonitorServer::connection_count() const {
    std::lock_guard lock(mutex_);
    return connections_.size();
}

bool MonitorServer::stopped() const {
    std::lock_guard lock(mutex_);
    return torn_down_;
}

void MonitorServer::record(MonitorEvent event) {
    event.time_ns = event.time_ns ? event.time_ns : monotonic_ns();
    events_.push_back(event);
}

void MonitorServer::accept_loop() {
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
        if (stop_) {
            ch->close();
            return;
        }
        connections_.push_back(ch);
        threads_.emplace_back([this, ch] { serve_connection(ch); });
    }
}

void MonitorServer::reply(const ChannelPtr& channel, const Envelope& request, MsgType type, Bytes payload) {
    Envelope env;
    env.msg_type = type;
    env.context = request.context;
    env.src = request.dst;
    env.dst = request.src;
    env.tag = request.tag;
    env.src_kind = SrcKind::Quantum;
    try {
        channel->send(Frame(env, std::move(payload)));
    } catch (const Error&) {
        // The requester went away; nothing to report to.
    }
}

void MonitorServer::serve_connection(ChannelPtr channel) {
    for (;;) {
        Frame frame;
        try {
            frame = channel->recv(Millis(3600 * 1000));
        } catch (const TimeoutError&) {
            continue;
        } catch (const Error&) {
            return;
        }
        {
            std::lock_guard lock(mutex_);
            if (stop_) return;
        }
        switch (frame.type()) {
            case MsgType::Execute: on_execute(channel, frame); break;
            case MsgType::Ping: reply(channel, frame.envelope, MsgType::Pong, encode_u64(monotonic_ns())); break;
            case MsgType::SyncReady: on_sync_ready(channel, frame); break;
            case MsgType::SyncRelease: on_sync_release(channel, frame); break;
            case MsgType::Shutdown: on_shutdown(channel, frame); break;
            default: break;  // replies and classical DATA are not for a monitor
        }
    }
}

void MonitorServer::on_execute(const ChannelPtr& channel, const Frame& frame) {
    PendingExecution job;
    job.tag = frame.envelope.tag;
    job.request = frame.envelope;
    job.reply = channel;
    AckInfo ack;
    try {
        job.block = decode_execute_payload(frame.bytes());
        job.block.node_ip = state_.device.ip;
        job.block.device_id = state_.device.device_id;
        job.circuit = verify_block(state_, job.block);
    } catch (const Error& e) {
        ack.status = e.code();
        ack.text = e.what();
    }
    {
        std::lock_guard lock(mutex_);
        if (ack.status == ErrorCode::Ok && draining_) {
            ack.status = ErrorCode::State;
            ack.text = "monitor is shutting down";
        }
        MonitorEvent ev{ack.status == ErrorCode::Ok ? MonitorEvent::Kind::Received : MonitorEvent::Kind::Rejected};
        ev.tag = job.tag;
        ev.addressed_qrank = frame.envelope.dst;
        ev.digest = job.block.circuit_digest;
        ev.status = ack.status;
        record(ev);
        if (ack.status == ErrorCode::Ok) {
            state_.pending.push_back(std::move(job));
            cv_.notify_all();
        }
    }
    reply(channel, frame.envelope, MsgType::Ack, encode_ack(ack));
}

void MonitorServer::executor_loop() {
    std::unique_lock lock(mutex_);
    for (;;) {
        cv_.wait(lock, [&] { return stop_ || (!state_.pending.empty() && !held_); });
        if (stop_) return;
        PendingExecution job = std::move(state_.pending.front());
        state_.pending.pop_front();
        executing_ = true;
        state_.phase = MonitorPhase::Executing;
        const auto seed = state_.rng_seed;
        const auto delay = state_.delay;
        lock.unlock();

        std::optional<ShotTable> table;
        AckInfo failure;
        try {
            table = run_circuit(seed, job.tag, job.block, job.circuit);
            table->qrank = job.request.dst;
        } catch (const Error& e) {
            failure = {e.code(), e.what(), 0};
        } catch (const std::exception& e) {
            failure = {ErrorCode::Resource, e.what(), 0};
        }

        lock.lock();
        if (delay.count() > 0) cv_.wait_for(lock, delay, [&] { return stop_; });
        if (stop_) {
            executing_ = false;
            return;
        }
        state_.phase = MonitorPhase::Reporting;
        lock.unlock();
        if (table) {
            reply(job.reply, job.request, MsgType::Result, encode_result_payload(*table));
        } else {
            reply(job.reply, job.request, MsgType::Ack, encode_ack(failure));
        }
        lock.lock();
        executing_ = false;
        state_.phase = held_ ? MonitorPhase::Armed : MonitorPhase::Idle;
        MonitorEvent ev{MonitorEvent::Kind::Executed};
        ev.tag = job.tag;
        ev.addressed_qrank = job.request.dst;
        ev.digest = job.block.circuit_digest;
        ev.status = failure.status;
        record(ev);
        cv_.notify_all();
    }
}

void MonitorServer::on_sync_ready(const ChannelPtr& channel, const Frame& frame) {
    {
        std::lock_guard lock(mutex_);
        held_ = true;
        if (!executing_) state_.phase = MonitorPhase::Armed;
    }
    reply(channel, frame.envelope, MsgType::SyncReady, encode_u32(frame.envelope.dst));
}

void MonitorServer::on_sync_release(const ChannelPtr& channel, const Frame& frame) {
    std::uint64_t target = 0;
    try {
        target = decode_u64(frame.bytes());
    } catch (const Error& e) {
        reply(channel, frame.envelope, MsgType::Ack, encode_ack({e.code(), e.what(), 0}));
        return;
    }
    const auto released = wait_until_ns(target);
    {
        std::lock_guard lock(mutex_);
        held_ = false;
        if (!executing_) state_.phase = MonitorPhase::Idle;
        MonitorEvent ev{MonitorEvent::Kind::Released};
        ev.time_ns = released;
        ev.target_ns = target;
        record(ev);
        cv_.notify_all();
    }
    reply(channel, frame.envelope, MsgType::Ack, encode_release_ack(released));
}

void MonitorServer::on_shutdown(const ChannelPtr& channel, const Frame& frame) {
    {
        std::unique_lock lock(mutex_);
        draining_ = true;
        held_ = false;
        cv_.notify_all();
        cv_.wait(lock, [&] { return stop_ || (state_.pending.empty() && !executing_); });
    }
    reply(channel, frame.envelope, MsgType::Ack, encode_ack({}));
    std::lock_guard lock(mutex_);
    shutdown_acked_ = true;
    cv_.notify_all();
}

void MonitorServer::wait() {
    {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return shutdown_acked_ || torn_down_; });
    }
    teardown();
}

void MonitorServer::kill() { teardown(); }

void MonitorServer::teardown() {
    std::vector<ChannelPtr> connections;
    {
        std::lock_guard lock(mutex_);
        if (torn_down_) return;
        torn_down_ = true;
        stop_ = true;
        cv_.notify_all();
        connections = connections_;
    }
    if (listener_) listener_->close();
    if (acceptor_.joinable()) acceptor_.join();
    for (auto& ch : connections) ch->close();
    if (executor_.joinable()) executor_.join();
    std::vector<std::thread> threads;
    {
        std::lock_guard lock(mutex_);
        threads.swap(threads_);
        for (auto& ch : connections_) ch->close();
    }
    for (auto& t : threads) {
        if (t.joinable()) t.join();
    }
}

int monitor_serve(const MonitorOptions& options) {
    MonitorServer server(options);
    try {
        server.start();
    } catch (const Error& e) {
        std::cerr << "mpiq-monitor: cannot serve " << to_string(options.device) << ": " << e.what() << "\n";
        return 2;
    }
    server.wait();
    return 0;
}

}  // namespace mpiq
