// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>

#include "mpiq/wire.hpp"

namespace mpiq {

using Millis = std::chrono::milliseconds;

struct Endpoint {
    std::string ip;
    std::uint16_t port = 0;

    bool operator==(const Endpoint&) const = default;
};

std::string to_string(const Endpoint& ep);

enum class ChannelKind { Tcp, Local };

/// How open_channel picks a channel kind. Auto uses the in-process queue
/// whenever the endpoint is a self address served by a listener in this
/// process.
enum class ChannelPreference { Auto, TcpOnly };

/// Default I/O timeout: MPIQ_TIMEOUT_MS if set, otherwise 5000 ms.
Millis default_timeout();

/// A reliable, ordered, full-duplex frame pipe. One sender and one receiver
/// may use a channel concurrently; sends are additionally serialized
/// internally.
class Channel {
public:
    virtual ~Channel() = default;

    virtual ChannelKind kind() const noexcept = 0;
    virtual const Endpoint& peer() const noexcept = 0;
    virtual bool is_open() const noexcept = 0;

    /// Throws ChannelClosed if this side or the peer has closed.
    virtual void send(const Frame& frame) = 0;
    /// Blocks up to `timeout`. Throws TimeoutError or ChannelClosed.
    virtual Frame recv(Millis timeout) = 0;
    /// Idempotent. Wakes any blocked recv on this side.
    virtual void close() noexcept = 0;
};

using ChannelPtr = std::shared_ptr<Channel>;

/// Accepts both TCP connections and in-process local connections for one
/// port.
class Listener {
public:
    struct Options {
        bool register_local = true;
        int backlog = 128;
    };

    /// Binds `ep` (port 0 picks an ephemeral port). Throws IoError.
    static std::unique_ptr<Listener> bind(const Endpoint& ep, Options options);
    static std::unique_ptr<Listener> bind(const Endpoint& ep) { return bind(ep, Options{}); }

    ~Listener();
    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;

    std::uint16_t port() const noexcept;
    Endpoint endpoint() const;

    /// Blocks up to `timeout`; throws TimeoutError, or ChannelClosed once the
    /// listener is closed.
    ChannelPtr accept(Millis timeout);
    void close() noexcept;

    struct State;

private:
    explicit Listener(std::shared_ptr<State> state);
    std::shared_ptr<State> state_;
};

/// Connects to `ep`. Throws TimeoutError when the connect does not
/// complete in time and ConnectError when it is refused or unroutable.
ChannelPtr open_channel(const Endpoint& ep, Millis timeout, ChannelPreference pref = ChannelPreference::Auto);

/// A connected in-process pair (both ends local kind).
std::pair<ChannelPtr, ChannelPtr> make_local_pair(const Endpoint& a_peer, const Endpoint& b_peer);

/// True for loopback addresses, "localhost", and addresses of local
/// interfaces.
bool is_self_address(const std::string& ip);

}  // namespace mpiq
