// SPDX-License-Identifier: Apache-2.0
#include "mpiq/launcher.hpp"

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "mpiq/channel.hpp"
#include "mpiq/payload.hpp"
#include "mpiq/wire.hpp"

extern char** environ;

namespace mpiq {

namespace {

using Clock = std::chrono::steady_clock;

std::string join_argv(const std::vector<std::string>& argv) {
    std::string s;
    for (const auto& a : argv) s += (s.empty() ? "" : " ") + a;
    return s;
}

/// Last control tag block, kept clear of per-handle tags.
constexpr std::uint32_t kFleetShutdownTag = 0xFFFFFF00u;

}  // namespace

std::filesystem::path find_monitor_binary() {
    if (const char* env = std::getenv("MPIQ_MONITOR_BIN"); env && *env) return env;
    std::error_code ec;
    const auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
    if (!ec) {
        for (const auto& dir : {self.parent_path(), self.parent_path().parent_path() / "tools"}) {
            const auto candidate = dir / "mpiq-monitor";
            if (std::filesystem::exists(candidate)) return candidate;
        }
    }
#ifdef MPIQ_DEFAULT_MONITOR_BIN
    return MPIQ_DEFAULT_MONITOR_BIN;
#else
    throw LaunchError("cannot locate mpiq-monitor; set MPIQ_MONITOR_BIN");
#endif
}

int decode_wait_status(int status) {
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
    return 255;
}

pid_t spawn_process(const std::vector<std::string>& argv, const std::map<std::string, std::string>& env_overrides) {
    if (argv.empty()) throw LaunchError("empty command line");
    std::vector<std::string> env_storage;
    for (char** e = environ; *e; ++e) {
        const std::string entry(*e);
        const auto eq = entry.find('=');
        if (eq != std::string::npos && env_overrides.contains(entry.substr(0, eq))) continue;
        env_storage.push_back(entry);
    }
    for (const auto& [k, v] : env_overrides) env_storage.push_back(k + "=" + v);

    std::vector<char*> cargv, cenv;
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);
    for (const auto& e : env_storage) cenv.push_back(const_cast<char*>(e.c_str()));
    cenv.push_back(nullptr);

    pid_t pid = -1;
    const int rc = ::posix_spawnp(&pid, cargv[0], nullptr, nullptr, cargv.data(), cenv.data());
    if (rc != 0) throw LaunchError("cannot start '" + join_argv(argv) + "': " + std::strerror(rc));
    return pid;
}

bool port_available(const std::string& ip, std::uint16_t port) {
    try {
        auto l = Listener::bind({ip, port}, Listener::Options{false, 1});
        l->close();
        return true;
    } catch (const Error&) {
        return false;
    }
}

std::uint16_t find_free_port_range(const std::string& ip, std::size_t count) {
    if (count == 0 || count > 1000) throw LaunchError("bad port range size " + std::to_string(count));
    std::uint32_t start = 20000 + static_cast<std::uint32_t>(mix64(monotonic_ns(), ::getpid()) % 30000);
    for (int attempt = 0; attempt < 200; ++attempt) {
        bool ok = true;
        for (std::size_t i = 0; i < count && ok; ++i) ok = port_available(ip, static_cast<std::uint16_t>(start + i));
        if (ok) return static_cast<std::uint16_t>(start);
        start = 20000 + (start - 20000 + 97 + static_cast<std::uint32_t>(count)) % 30000;
    }
    throw LaunchError("no free range of " + std::to_string(count) + " ports on " + ip);
}

MonitorFleet::MonitorFleet(const QuantumNodeConfig& config, Options options) {
    validate_qnode_config(config);
    for (const auto& d : config.devices) {
        if (!port_available(d.ip, d.port)) {
            throw LaunchError("port " + std::to_string(d.port) + " on " + d.ip + " is already in use (device " +
                              std::to_string(d.device_id) + ")");
        }
    }
    const auto binary = options.binary.empty() ? find_monitor_binary() : options.binary;
    try {
        for (std::size_t i = 0; i < config.devices.size(); ++i) {
            const auto& d = config.devices[i];
            std::vector<std::string> argv{binary.string(),
                                          "--ip", d.ip,
                                          "--port", std::to_string(d.port),
                                          "--device-id", std::to_string(d.device_id),
                                          "--qubits", std::to_string(d.qubit_count),
                                          "--seed", std::to_string(mix64(options.seed, i)),
                                          "--delay-ms", std::to_string(options.delay.count())};
            Child c{{d.ip, d.port, d.device_id}, spawn_process(argv, {}), std::nullopt};
            children_.push_back(std::move(c));
        }
        const auto deadline = Clock::now() + options.ready_timeout;
        for (auto& c : children_) {
            for (;;) {
                if (reap(c, false)) {
                    throw LaunchError("monitor " + to_string(c.device) + " exited with code " +
                                      std::to_string(*c.exit_code) + " during startup");
                }
                try {
                    open_channel({c.device.ip, c.device.port}, Millis(200), ChannelPreference::TcpOnly)->close();
                    break;
                } catch (const Error&) {
                    if (Clock::now() > deadline) throw LaunchError("monitor " + to_string(c.device) + " never came up");
                    std::this_thread::sleep_for(Millis(10));
                }
            }
        }
    } catch (...) {
        for (std::size_t i = 0; i < children_.size(); ++i) kill(i);
        throw;
    }
}

MonitorFleet::~MonitorFleet() {
    for (std::size_t i = 0; i < children_.size(); ++i) kill(i);
}

bool MonitorFleet::reap(Child& child, bool block) {
    if (child.exit_code) return true;
    int status = 0;
    pid_t r;
    do {
        r = ::waitpid(child.pid, &status, block ? 0 : WNOHANG);
    } while (r < 0 && errno == EINTR);
    if (r == child.pid) {
        child.exit_code = decode_wait_status(status);
        return true;
    }
    if (r < 0) {
        child.exit_code = 255;
        return true;
    }
    return false;
}

void MonitorFleet::kill(std::size_t index) {
    auto& c = children_.at(index);
    if (reap(c, false)) return;
    ::kill(c.pid, SIGKILL);
    reap(c, true);
}

bool MonitorFleet::wait_all(std::chrono::milliseconds timeout) {
    const auto deadline = Clock::now() + timeout;
    for (;;) {
        bool all = true;
        for (auto& c : children_) all = reap(c, false) && all;
        if (all) return true;
        if (Clock::now() > deadline) return false;
        std::this_thread::sleep_for(Millis(5));
    }
}

std::vector<int> MonitorFleet::shutdown(std::chrono::milliseconds grace) {
    for (std::size_t i = 0; i < children_.size(); ++i) {
        auto& c = children_[i];
        if (reap(c, false)) continue;
        try {
            auto ch = open_channel({c.device.ip, c.device.port}, grace, ChannelPreference::TcpOnly);
            Envelope env;
            env.msg_type = MsgType::Shutdown;
            env.dst = static_cast<std::uint32_t>(i);
            env.tag = kFleetShutdownTag;
            ch->send(Frame(env, Bytes{}));
            ch->recv(grace);
            ch->close();
        } catch (const Error&) {
            // Falls through to the kill below if the monitor does not exit.
        }
    }
    wait_all(grace);
    std::vector<int> codes;
    for (std::size_t i = 0; i < children_.size(); ++i) {
        kill(i);
        codes.push_back(*children_[i].exit_code);
    }
    return codes;
}

LaunchResult launch(const LaunchOptions& options) {
    if (options.np < 1) throw LaunchError("need at least one classical rank");
    if (options.program.empty()) throw LaunchError("no program given");
    const auto config = load_qnode_config(options.config_path);

    std::string peers;
    for (std::uint32_t r = 0; r < options.np; ++r) {
        auto l = Listener::bind({"127.0.0.1", 0}, Listener::Options{false, 1});
        peers += (peers.empty() ? "" : ",") + std::string("127.0.0.1:") + std::to_string(l->port());
    }

    const std::uint64_t seed = options.seed.value_or(0);
    MonitorFleet fleet(config, {seed, options.delay, Millis(10000), {}});

    LaunchResult result;
    result.children = fleet.size() + options.np;
    std::vector<pid_t> pids;
    for (std::uint32_t r = 0; r < options.np; ++r) {
        std::map<std::string, std::string> env{
            {"MPIQ_RANK", std::to_string(r)},
            {"MPIQ_NP", std::to_string(options.np)},
            {"MPIQ_PEERS", peers},
            {"MPIQ_QCONFIG", std::filesystem::absolute(options.config_path).string()},
            {"MPIQ_SEED", std::to_string(seed)},
            {"MPIQ_OWNS_MONITORS", r == 0 ? "1" : "0"},
            {"MPIQ_DELAY_MS", std::to_string(options.delay.count())},
        };
        try {
            pids.push_back(spawn_process(options.program, env));
        } catch (...) {
            for (auto p : pids) ::kill(p, SIGKILL);
            for (auto p : pids) ::waitpid(p, nullptr, 0);
            throw;
        }
    }

    result.classical_codes.assign(options.np, 0);
    std::size_t remaining = pids.size();
    while (remaining > 0) {
        for (std::size_t r = 0; r < pids.size(); ++r) {
            if (pids[r] <= 0) continue;
            int status = 0;
            const pid_t p = ::waitpid(pids[r], &status, WNOHANG);
            if (p == 0 || (p < 0 && errno == EINTR)) continue;
            const int code = p < 0 ? 255 : decode_wait_status(status);
            result.classical_codes[r] = code;
            pids[r] = -1;
            --remaining;
            if (code != 0 && result.exit_code == 0) {
                result.exit_code = code;
                for (auto q : pids) {
                    if (q > 0) ::kill(q, SIGTERM);
                }
            }
        }
        if (remaining > 0) std::this_thread::sleep_for(Millis(5));
    }

    result.monitor_codes = fleet.shutdown();
    return result;
}

}  // namespace mpiq
