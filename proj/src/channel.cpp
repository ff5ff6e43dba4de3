// SPDX-License-Identifier: Apache-2.0
#include "mpiq/channel.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <ifaddrs.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/eventfd.h>
#include <sys/socket.h>
#include <sys/uio.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <cstdlib>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <optional>

#include "mpiq/error.hpp"

namespace mpiq {

std::string to_string(const Endpoint& ep) { return ep.ip + ":" + std::to_string(ep.port); }

Millis default_timeout() {
    if (const char* env = std::getenv("MPIQ_TIMEOUT_MS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return Millis(v);
    }
    return Millis(5000);
}

namespace {

using Clock = std::chrono::steady_clock;

std::string errno_text(int err) { return std::strerror(err); }

int remaining_ms(Clock::time_point deadline) {
    const auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now()).count();
    return left <= 0 ? 0 : static_cast<int>(std::min<long long>(left, INT32_MAX));
}

Clock::time_point deadline_after(Millis timeout) {
    // Clamp so "effectively forever" timeouts do not overflow.
    const auto cap = Millis(std::chrono::hours(24 * 365));
    return Clock::now() + std::min(timeout, cap);
}

in_addr resolve_ipv4(const std::string& ip) {
    in_addr addr{};
    if (ip == "localhost") {
        addr.s_addr = htonl(INADDR_LOOPBACK);
        return addr;
    }
    if (::inet_pton(AF_INET, ip.c_str(), &addr) == 1) return addr;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    addrinfo* res = nullptr;
    if (::getaddrinfo(ip.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
        throw ConnectError("cannot resolve address '" + ip + "'");
    }
    addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
    return addr;
}

// ---------------------------------------------------------------------------
// TCP

class TcpChannel final : public Channel {
public:
    TcpChannel(int fd, Endpoint peer) : fd_(fd), peer_(std::move(peer)) {
        int one = 1;
        ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    }
    ~TcpChannel() override {
        close();
        ::close(fd_);
    }

    ChannelKind kind() const noexcept override { return ChannelKind::Tcp; }
    const Endpoint& peer() const noexcept override { return peer_; }
    bool is_open() const noexcept override { return open_.load(); }

    void send(const Frame& frame) override {
        std::lock_guard lock(send_mutex_);
        if (!open_) throw ChannelClosed("channel to " + to_string(peer_) + " is closed");
        const auto& body = frame.bytes();
        if (body.size() > kMaxPayload) throw SizeError("payload exceeds cap");
        std::array<std::uint8_t, kHeaderSize> header{};
        encode_header(frame.envelope, body.size(), header);

        iovec iov[2];
        iov[0] = {header.data(), header.size()};
        iov[1] = {const_cast<std::uint8_t*>(body.data()), body.size()};
        std::size_t idx = 0;
        while (idx < 2) {
            if (iov[idx].iov_len == 0) {
                ++idx;
                continue;
            }
            msghdr msg{};
            msg.msg_iov = &iov[idx];
            msg.msg_iovlen = 2 - idx;
            const ssize_t n = ::sendmsg(fd_, &msg, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                if (errno == EAGAIN || errno == EWOULDBLOCK) {
                    pollfd pfd{fd_, POLLOUT, 0};
                    ::poll(&pfd, 1, 100);
                    continue;
                }
                open_ = false;
                throw ChannelClosed("send to " + to_string(peer_) + " failed: " + errno_text(errno));
            }
            auto left = static_cast<std::size_t>(n);
            while (idx < 2 && left >= iov[idx].iov_len) {
                left -= iov[idx].iov_len;
                iov[idx].iov_len = 0;
                ++idx;
            }
            if (idx < 2) {
                iov[idx].iov_base = static_cast<std::uint8_t*>(iov[idx].iov_base) + left;
                iov[idx].iov_len -= left;
            }
        }
    }

    Frame recv(Millis timeout) override {
        std::lock_guard lock(recv_mutex_);
        const auto deadline = deadline_after(timeout);
        for (;;) {
            if (auto frame = try_extract()) return std::move(*frame);
            if (eof_ || !open_) throw ChannelClosed("channel to " + to_string(peer_) + " closed");
            pollfd pfd{fd_, POLLIN, 0};
            const int rc = ::poll(&pfd, 1, remaining_ms(deadline));
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw ChannelClosed("poll failed: " + errno_text(errno));
            }
            if (rc == 0) throw TimeoutError("recv from " + to_string(peer_) + " timed out");
            fill();
        }
    }

    void close() noexcept override {
        if (open_.exchange(false)) ::shutdown(fd_, SHUT_RDWR);
    }

private:
    std::optional<Frame> try_extract() {
        const std::size_t have = buffer_.size() - start_;
        if (have == 0) return std::nullopt;
        ByteView view(buffer_.data() + start_, have);
        if (!header_) {
            if (have < kHeaderSize) {
                const std::size_t n = std::min(have, kFrameMagic.size());
                if (!std::equal(view.begin(), view.begin() + static_cast<std::ptrdiff_t>(n), kFrameMagic.begin())) {
                    open_ = false;
                    throw ProtocolError("bad frame magic from " + to_string(peer_));
                }
                return std::nullopt;
            }
            try {
                header_ = decode_header(view);
            } catch (const Error&) {
                open_ = false;
                throw;
            }
        }
        const std::size_t total = kHeaderSize + static_cast<std::size_t>(header_->payload_len);
        if (have < total) {
            buffer_.reserve(start_ + total);
            return std::nullopt;
        }
        Bytes body(view.begin() + kHeaderSize, view.begin() + static_cast<std::ptrdiff_t>(total));
        Frame frame(*header_, std::move(body));
        header_.reset();
        start_ += total;
        if (start_ == buffer_.size()) {
            buffer_.clear();
            start_ = 0;
        } else if (start_ > (1u << 20)) {
            buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(start_));
            start_ = 0;
        }
        return frame;
    }

    void fill() {
        std::size_t want = 64 * 1024;
        if (header_) {
            const std::size_t total = kHeaderSize + static_cast<std::size_t>(header_->payload_len);
            want = std::max(want, total - (buffer_.size() - start_));
        }
        const std::size_t old = buffer_.size();
        buffer_.resize(old + want);
        ssize_t n;
        do {
            n = ::recv(fd_, buffer_.data() + old, want, 0);
        } while (n < 0 && errno == EINTR);
        if (n <= 0) {
            buffer_.resize(old);
            if (n == 0 || (errno != EAGAIN && errno != EWOULDBLOCK)) eof_ = true;
            return;
        }
        buffer_.resize(old + static_cast<std::size_t>(n));
    }

    int fd_;
    Endpoint peer_;
    std::atomic<bool> open_{true};
    bool eof_ = false;
    std::mutex send_mutex_;
    std::mutex recv_mutex_;
    Bytes buffer_;
    std::size_t start_ = 0;
    std::optional<Envelope> header_;
};

// ---------------------------------------------------------------------------
// Local (in-process) channels

struct LocalPipe {
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<Frame> queue[2];  // queue[i] is read by side i
    bool closed = false;
};

class LocalChannel final : public Channel {
public:
    LocalChannel(std::shared_ptr<LocalPipe> pipe, int side, Endpoint peer)
        : pipe_(std::move(pipe)), side_(side), peer_(std::move(peer)) {}
    ~LocalChannel() override { close(); }

    ChannelKind kind() const noexcept override { return ChannelKind::Local; }
    const Endpoint& peer() const noexcept override { return peer_; }
    bool is_open() const noexcept override {
        std::lock_guard lock(pipe_->mutex);
        return !pipe_->closed;
    }

    void send(const Frame& frame) override {
        std::lock_guard lock(pipe_->mutex);
        if (pipe_->closed) throw ChannelClosed("local channel to " + to_string(peer_) + " is closed");
        if (frame.bytes().size() > kMaxPayload) throw SizeError("payload exceeds cap");
        // The payload handle is shared, not copied.
        pipe_->queue[1 - side_].push_back(frame);
        pipe_->cv.notify_all();
    }

    Frame recv(Millis timeout) override {
        std::unique_lock lock(pipe_->mutex);
        auto& q = pipe_->queue[side_];
        const bool ready = pipe_->cv.wait_until(lock, deadline_after(timeout),
                                                [&] { return !q.empty() || pipe_->closed; });
        if (!q.empty()) {
            Frame f = std::move(q.front());
            q.pop_front();
            return f;
        }
        if (pipe_->closed) throw ChannelClosed("local channel to " + to_string(peer_) + " closed");
        (void)ready;
        throw TimeoutError("recv from " + to_string(peer_) + " timed out");
    }

    void close() noexcept override {
        std::lock_guard lock(pipe_->mutex);
        pipe_->closed = true;
        pipe_->cv.notify_all();
    }

private:
    std::shared_ptr<LocalPipe> pipe_;
    int side_;
    Endpoint peer_;
};

// Listeners that accept local connections, keyed by port.
class LocalRegistry {
public:
    static LocalRegistry& instance() {
        static LocalRegistry registry;
        return registry;
    }
    void add(std::uint16_t port, std::weak_ptr<Listener::State> st) {
        std::lock_guard lock(mutex_);
        entries_[port] = std::move(st);
    }
    void remove(std::uint16_t port, const Listener::State* st);
    std::shared_ptr<Listener::State> find(std::uint16_t port) {
        std::lock_guard lock(mutex_);
        auto it = entries_.find(port);
        return it == entries_.end() ? nullptr : it->second.lock();
    }

private:
    std::mutex mutex_;
    std::map<std::uint16_t, std::weak_ptr<Listener::State>> entries_;
};

}  // namespace

struct Listener::State {
    int fd = -1;
    int wake_fd = -1;
    std::uint16_t port = 0;
    std::string ip;
    bool registered = false;
    std::mutex mutex;
    std::deque<ChannelPtr> local_pending;
    bool closed = false;

    ~State() {
        if (fd >= 0) ::close(fd);
        if (wake_fd >= 0) ::close(wake_fd);
    }
    void wake() const {
        const std::uint64_t one = 1;
        [[maybe_unused]] auto n = ::write(wake_fd, &one, sizeof(one));
    }
};

namespace {

void LocalRegistry::remove(std::uint16_t port, const Listener::State* st) {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(port);
    if (it == entries_.end()) return;
    auto cur = it->second.lock();
    if (!cur || cur.get() == st) entries_.erase(it);
}

}  // namespace

Listener::Listener(std::shared_ptr<State> state) : state_(std::move(state)) {}

Listener::~Listener() { close(); }

std::unique_ptr<Listener> Listener::bind(const Endpoint& ep, Options options) {
    auto st = std::make_shared<State>();
    st->fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (st->fd < 0) throw IoError("socket: " + errno_text(errno));
    int one = 1;
    ::setsockopt(st->fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(ep.port);
    addr.sin_addr = resolve_ipv4(ep.ip);
    if (::bind(st->fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        throw IoError("bind " + to_string(ep) + ": " + errno_text(errno));
    }
    if (::listen(st->fd, options.backlog) != 0) throw IoError("listen " + to_string(ep) + ": " + errno_text(errno));
    socklen_t len = sizeof(addr);
    ::getsockname(st->fd, reinterpret_cast<sockaddr*>(&addr), &len);
    st->port = ntohs(addr.sin_port);
    st->ip = ep.ip;
    st->wake_fd = ::eventfd(0, EFD_CLOEXEC | EFD_NONBLOCK);
    if (st->wake_fd < 0) throw IoError("eventfd: " + errno_text(errno));
    if (options.register_local) {
        LocalRegistry::instance().add(st->port, st);
        st->registered = true;
    }
    return std::unique_ptr<Listener>(new Listener(std::move(st)));
}

std::uint16_t Listener::port() const noexcept { return state_->port; }

Endpoint Listener::endpoint() const { return {state_->ip, state_->port}; }

ChannelPtr Listener::accept(Millis timeout) {
    const auto deadline = deadline_after(timeout);
    for (;;) {
        {
            std::lock_guard lock(state_->mutex);
            if (state_->closed) throw ChannelClosed("listener on port " + std::to_string(state_->port) + " closed");
            if (!state_->local_pending.empty()) {
                auto ch = std::move(state_->local_pending.front());
                state_->local_pending.pop_front();
                return ch;
            }
        }
        pollfd pfds[2] = {{state_->fd, POLLIN, 0}, {state_->wake_fd, POLLIN, 0}};
        const int rc = ::poll(pfds, 2, remaining_ms(deadline));
        if (rc < 0) {
            if (errno == EINTR) continue;
            throw IoError("poll: " + errno_text(errno));
        }
        if (rc == 0) throw TimeoutError("accept timed out");
        if (pfds[1].revents & POLLIN) {
            std::uint64_t v;
            [[maybe_unused]] auto n = ::read(state_->wake_fd, &v, sizeof(v));
        }
        if (pfds[0].revents & POLLIN) {
            sockaddr_in peer{};
            socklen_t len = sizeof(peer);
            const int fd = ::accept4(state_->fd, reinterpret_cast<sockaddr*>(&peer), &len, SOCK_CLOEXEC);
            if (fd < 0) continue;
            char buf[INET_ADDRSTRLEN] = {};
            ::inet_ntop(AF_INET, &peer.sin_addr, buf, sizeof(buf));
            return std::make_shared<TcpChannel>(fd, Endpoint{buf, ntohs(peer.sin_port)});
        }
    }
}

void Listener::close() noexcept {
    if (!state_) return;
    std::deque<ChannelPtr> pending;
    {
        std::lock_guard lock(state_->mutex);
        if (state_->closed) return;
        state_->closed = true;
        pending.swap(state_->local_pending);
    }
    if (state_->registered) LocalRegistry::instance().remove(state_->port, state_.get());
    // The descriptor itself is released with the state; shutdown already
    // stops the kernel from accepting new connections.
    ::shutdown(state_->fd, SHUT_RDWR);
    state_->wake();
    for (auto& ch : pending) ch->close();
}

std::pair<ChannelPtr, ChannelPtr> make_local_pair(const Endpoint& a_peer, const Endpoint& b_peer) {
    auto pipe = std::make_shared<LocalPipe>();
    return {std::make_shared<LocalChannel>(pipe, 0, a_peer), std::make_shared<LocalChannel>(pipe, 1, b_peer)};
}

bool is_self_address(const std::string& ip) {
    if (ip == "localhost" || ip == "0.0.0.0") return true;
    in_addr addr{};
    if (::inet_pton(AF_INET, ip.c_str(), &addr) != 1) return false;
    if ((ntohl(addr.s_addr) >> 24) == 127) return true;
    ifaddrs* list = nullptr;
    if (::getifaddrs(&list) != 0) return false;
    bool found = false;
    for (auto* it = list; it != nullptr && !found; it = it->ifa_next) {
        if (it->ifa_addr && it->ifa_addr->sa_family == AF_INET) {
            found = reinterpret_cast<sockaddr_in*>(it->ifa_addr)->sin_addr.s_addr == addr.s_addr;
        }
    }
    ::freeifaddrs(list);
    return found;
}

ChannelPtr open_channel(const Endpoint& ep, Millis timeout, ChannelPreference pref) {
    if (pref == ChannelPreference::Auto && is_self_address(ep.ip)) {
        if (auto st = LocalRegistry::instance().find(ep.port)) {
            std::lock_guard lock(st->mutex);
            if (!st->closed) {
                auto [client, server] = make_local_pair(ep, Endpoint{"local", 0});
                st->local_pending.push_back(std::move(server));
                st->wake();
                return client;
            }
        }
    }

    const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0);
    if (fd < 0) throw ConnectError("socket: " + errno_text(errno));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(ep.port);
    try {
        addr.sin_addr = resolve_ipv4(ep.ip);
    } catch (...) {
        ::close(fd);
        throw;
    }
    const auto deadline = deadline_after(timeout);
    int rc = ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
    if (rc != 0 && errno != EINPROGRESS) {
        const int err = errno;
        ::close(fd);
        throw ConnectError("connect " + to_string(ep) + ": " + errno_text(err));
    }
    if (rc != 0) {
        for (;;) {
            pollfd pfd{fd, POLLOUT, 0};
            rc = ::poll(&pfd, 1, remaining_ms(deadline));
            if (rc < 0 && errno == EINTR) continue;
            break;
        }
        if (rc == 0) {
            ::close(fd);
            throw TimeoutError("connect " + to_string(ep) + " timed out after " + std::to_string(timeout.count()) +
                               " ms");
        }
        int err = 0;
        socklen_t len = sizeof(err);
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        if (rc < 0 || err != 0) {
            ::close(fd);
            throw ConnectError("connect " + to_string(ep) + ": " + errno_text(rc < 0 ? errno : err));
        }
    }
    // Blocking mode from here on; recv/send use poll for deadlines.
    ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) & ~O_NONBLOCK);
    return std::make_shared<TcpChannel>(fd, ep);
}

}  // namespace mpiq
