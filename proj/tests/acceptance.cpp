// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "mpiq/bench.hpp"
#include "mpiq/collectives.hpp"
#include "mpiq/ghz_cutting.hpp"
#include "mpiq/launcher.hpp"
#include "mpiq/messaging.hpp"
#include "mpiq/sync.hpp"
#include "mpiq/wire.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace mpiq;
using namespace std::chrono_literals;

namespace {

/// Collects failed expectations; a criterion passes when none fail.
struct Check {
    std::vector<std::string> failures;
    std::string note;

    void expect(bool ok, const std::string& what) {
        if (!ok && failures.size() < 8) failures.push_back(what);
    }
};

int run_criterion(int id, const char* title, double budget_s, const std::function<void(Check&)>& body) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.failures.push_back(std::string("unexpected exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > budget_s) {
        c.failures.push_back("runtime " + std::to_string(secs) + " s exceeds budget " + std::to_string(budget_s) + " s");
    }
    const bool ok = c.failures.empty();
    std::printf("%s criterion %2d: %s (%.2f s)%s%s\n", ok ? "PASS" : "FAIL", id, title, secs,
                c.note.empty() ? "" : " | ", c.note.c_str());
    for (const auto& f : c.failures) std::printf("      - %s\n", f.c_str());
    std::fflush(stdout);
    return ok ? 0 : 1;
}

std::string fmt(double v, int prec = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

// ---------------------------------------------------------------------------

void wire_round_trip(Check& c) {
    std::mt19937_64 rng(0xC0FFEE);
    int mismatches = 0;
    for (int i = 0; i < 10000; ++i) {
        Envelope e;
        e.msg_type = static_cast<MsgType>(1 + rng() % 9);
        e.src_kind = static_cast<SrcKind>(rng() % 2);
        e.context = static_cast<std::uint32_t>(rng());
        e.src = static_cast<std::uint32_t>(rng());
        e.dst = static_cast<std::uint32_t>(rng());
        e.tag = static_cast<std::uint32_t>(rng());
        Bytes payload(rng() % 512);
        for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
        const auto bytes = encode_frame(e, payload);
        const auto [frame, used] = decode_frame(bytes);
        e.payload_len = payload.size();
        if (!(frame.envelope == e) || frame.bytes() != payload || used != bytes.size() ||
            encode_frame(frame.envelope, frame.bytes()) != bytes) {
            ++mismatches;
        }
        if (i % 10 == 0) {
            auto bad = bytes;
            bad[rng() % 4] ^= 0x20;
            bool got_protocol = false;
            try {
                decode_frame(bad);
            } catch (const ProtocolError&) {
                got_protocol = true;
            }
            c.expect(got_protocol, "malformed magic did not raise ProtocolError");
            const auto cut = rng() % bytes.size();
            bool got_incomplete = false;
            try {
                decode_frame(ByteView(bytes).first(cut));
            } catch (const IncompleteFrame&) {
                got_incomplete = true;
            }
            c.expect(got_incomplete, "truncated input did not raise IncompleteFrame");
        }
    }
    c.expect(mismatches == 0, std::to_string(mismatches) + " round-trip mismatches");
    c.note = "10000 frames, 1000 magic + 1000 truncation probes";
}

void mapping_bijection(Check& c) {
    const auto cfg = make_loopback_config(24, 9000, 20);
    const auto d = make_domain(kWorldContext, 4, cfg);
    for (QRank q = 0; q < 24; ++q) {
        c.expect(resolve_qrank(d, map_quantum(d, q)) == q, "resolve(map(q)) != q");
    }
    for (const auto& dev : cfg.devices) {
        const DeviceIdentifier id{dev.ip, dev.port, dev.device_id};
        c.expect(map_quantum(d, resolve_qrank(d, id)) == id, "map(resolve(dev)) != dev");
    }
    auto replay = [&](std::uint64_t seed) {
        auto dom = make_domain(kWorldContext, 16, cfg);
        std::vector<std::uint32_t> picks;
        for (int i = 0; i < 48; ++i) picks.push_back(map_classical(dom.topology, 1, mix64(seed, i)));
        return picks;
    };
    c.expect(replay(99) == replay(99), "map_classical does not replay for a fixed seed");
    c.expect(replay(99) != replay(100), "map_classical ignores its seed");
    c.note = "24 devices";
}

std::vector<std::pair<std::uint32_t, std::uint64_t>> monitor_log(const MonitorServer& m) {
    std::vector<std::pair<std::uint32_t, std::uint64_t>> out;
    for (const auto& e : m.events()) {
        if (e.kind == MonitorEvent::Kind::Received) out.emplace_back(e.tag, e.digest);
    }
    return out;
}

std::uint64_t digest_of(const std::vector<ShotTable>& tables) {
    GatherResult g;
    g.tables = tables;
    return fnv1a64(serialize_gather_result(g));
}

void collective_equivalence(Check& c) {
    int configs = 0;
    for (std::uint32_t devices = 1; devices <= 8; ++devices) {
        for (std::uint32_t np = 1; np <= 4; ++np) {
            ++configs;
            const std::uint64_t seed = 100 * devices + np;
            test::MonitorCluster ca(devices, 3, seed), cb(devices, 3, seed);
            auto wa = test::make_world(ca.config, np);
            auto wb = test::make_world(cb.config, np);
            auto& a = *wa[0];
            auto& b = *wb[0];
            std::vector<QRank> all(devices);
            std::iota(all.begin(), all.end(), 0);
            const auto where = "devices=" + std::to_string(devices) + " np=" + std::to_string(np);

            // Bcast
            const auto tmpl = make_waveform_block(a.world().q_map[0], qsim::build_ghz_circuit(1 + devices % 3), 40);
            mpiq_bcast(a, tmpl, all, 1);
            for (auto q : all) {
                auto blk = tmpl;
                blk.node_ip = b.world().q_map[q].ip;
                blk.device_id = b.world().q_map[q].device_id;
                mpiq_send(b, b.world().q_map[q], 1, blk);
            }
            // Scatter of an uneven cut
            const auto n = 2 * devices + devices / 2;
            const auto plan = cut_equal(n, devices);
            mpiq_scatter(a, compile_fragments(plan, 30, a.world()), build_send_q(n, plan.sizes), 2);
            const auto ref_blocks = compile_fragments(plan, 30, b.world());
            for (auto q : all) mpiq_send(b, b.world().q_map[q], 2, ref_blocks[q]);

            // Gather both tags
            for (std::uint32_t tag : {1u, 2u}) {
                const auto g = mpiq_gather(a, all, tag);
                std::vector<ShotTable> ref;
                for (auto q : all) ref.push_back(mpiq_recv(b, b.world().q_map[q], tag));
                c.expect(g.complete && digest_of(g.tables) == digest_of(ref), "gather differs: " + where);
            }
            // Allgather: every rank must end up with the reference tables.
            mpiq_scatter(a, compile_fragments(plan, 20, a.world()), build_send_q(n, plan.sizes), 3);
            for (auto q : all) mpiq_send(b, b.world().q_map[q], 3, compile_fragments(plan, 20, b.world())[q]);
            std::vector<GatherResult> got(np);
            test::run_ranks(np, [&](std::size_t r) { got[r] = mpiq_allgather(*wa[r], all, 3); });
            std::vector<std::uint64_t> ref_digest(np);
            test::run_ranks(np, [&](std::size_t r) {
                auto& h = *wb[r];
                if (r == 0) {
                    std::vector<ShotTable> ref;
                    for (auto q : all) ref.push_back(mpiq_recv(h, h.world().q_map[q], 3));
                    GatherResult g;
                    g.tables = ref;
                    for (Rank p = 1; p < np; ++p) classical_send(h, p, 3, serialize_gather_result(g));
                    ref_digest[0] = digest_of(ref);
                } else {
                    ref_digest[r] = digest_of(deserialize_gather_result(classical_recv(h, 0, 3), all).tables);
                }
            });
            for (std::size_t r = 0; r < np; ++r) {
                c.expect(got[r].complete && digest_of(got[r].tables) == ref_digest[r],
                         "allgather differs at rank " + std::to_string(r) + ": " + where);
            }
            // Device-side effects: identical (tag, digest) arrival sequences.
            for (std::size_t i = 0; i < devices; ++i) {
                c.expect(monitor_log(*ca.monitors[i]) == monitor_log(*cb.monitors[i]),
                         "monitor " + std::to_string(i) + " saw different payloads: " + where);
            }
            for (auto& h : wa) h->finalize();
            for (auto& h : wb) h->finalize();
        }
    }
    c.note = std::to_string(configs) + " configurations";
}

void barrier_correctness(Check& c) {
    {
        test::MonitorCluster cluster(1, 2);
        auto world = test::make_world(cluster.config, 4);
        int violations = 0;
        std::mt19937_64 rng(4);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<std::uint64_t> entry(4), exit(4);
            std::vector<int> jitter_us(4);
            for (auto& j : jitter_us) j = static_cast<int>(rng() % 3000);
            test::run_ranks(4, [&](std::size_t r) {
                std::this_thread::sleep_for(std::chrono::microseconds(jitter_us[r]));
                entry[r] = monotonic_ns();
                mpiq_barrier(*world[r], 0);
                exit[r] = monotonic_ns();
            });
            if (*std::min_element(exit.begin(), exit.end()) < *std::max_element(entry.begin(), entry.end())) {
                ++violations;
            }
        }
        c.expect(violations == 0, "CC barrier: " + std::to_string(violations) + " early returns");
        for (auto& h : world) h->finalize();
    }
    {
        const auto cfg = make_loopback_config(10, find_free_port_range("127.0.0.1", 10), 2);
        MonitorFleet fleet(cfg);
        InitOptions o;
        o.config = cfg;
        o.owns_monitors = true;
        o.preference = ChannelPreference::TcpOnly;
        auto h = RuntimeHandle::create(o);
        std::vector<QRank> all(10);
        std::iota(all.begin(), all.end(), 0);
        int within = 0;
        double worst = 0;
        for (int trial = 0; trial < 100; ++trial) {
            const auto rep = quantum_barrier(*h, all);
            worst = std::max(worst, rep.spread_ms());
            if (rep.corrected_release_ns.size() == 10 && rep.spread_ms() <= cfg.epsilon_sync_ms) ++within;
        }
        c.expect(within >= 95, "QQ barrier: only " + std::to_string(within) + "/100 trials within 50 ms");
        bool flag_error = false;
        try {
            mpiq_barrier(*h, 1);
        } catch (const FlagError&) {
            flag_error = true;
        }
        c.expect(flag_error, "flag 1 did not raise FlagError");
        h->finalize();
        fleet.wait_all(5000ms);
        c.note = "CC 100x4 ranks; QQ " + std::to_string(within) + "/100 within 50 ms, worst spread " + fmt(worst) +
                 " ms over 10 monitor processes";
    }
}

void simulator_oracle(Check& c) {
    std::mt19937_64 rng(31337);
    double worst_amp = 0, worst_norm = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto circ = oracle::random_circuit(rng);
        qsim::StateVector sv(circ.n_qubits);
        for (const auto& op : circ.ops) {
            qsim::apply_gate(sv, op);
            worst_norm = std::max(worst_norm, std::abs(sv.norm() - 1.0));
        }
        worst_amp = std::max(worst_amp, (sv.amplitudes() - oracle::dense_evolve(circ)).cwiseAbs().maxCoeff());
    }
    c.expect(worst_amp <= 1e-12, "amplitude error " + std::to_string(worst_amp));
    c.expect(worst_norm <= 1e-10, "norm drift " + std::to_string(worst_norm));
    double worst_chi = 0;
    for (std::uint32_t n = 1; n <= 20; ++n) {
        const auto t = qsim::simulate(qsim::build_ghz_circuit(n), 10000, mix64(n));
        double zeros = 0, ones = 0, other = 0;
        const std::string z(n, '0'), o(n, '1');
        for (const auto& s : t.bitstrings) (s == z ? zeros : s == o ? ones : other) += 1;
        c.expect(other == 0, "GHZ(" + std::to_string(n) + ") produced non-GHZ strings");
        const double chi = oracle::chi_square({zeros, ones}, {0.5, 0.5});
        worst_chi = std::max(worst_chi, chi);
        c.expect(chi < oracle::kCritical001, "GHZ(" + std::to_string(n) + ") chi-square " + fmt(chi));
    }
    char amp[32];
    std::snprintf(amp, sizeof amp, "%.1e", worst_amp);
    c.note = std::string("max |amp err| ") + amp + ", max chi2 " + fmt(worst_chi);
}

void cutting_arithmetic(Check& c) {
    int cases = 0;
    for (std::uint32_t n = 1; n <= 64; ++n) {
        for (std::uint32_t m = 1; m <= n; ++m) {
            ++cases;
            const auto p = cut_equal(n, m);
            std::vector<std::uint32_t> expect;
            for (std::uint32_t i = 0; i < m; ++i) expect.push_back(i < n % m ? (n + m - 1) / m : n / m);
            std::vector<std::uint32_t> bounds;
            std::uint32_t acc = 0;
            for (std::uint32_t i = 0; i + 1 < m; ++i) bounds.push_back(acc += expect[i]);
            c.expect(p.sizes == expect && p.boundaries == bounds,
                     "cut_equal(" + std::to_string(n) + "," + std::to_string(m) + ")");
        }
    }
    c.expect(cut_equal(40, 10).sizes == std::vector<std::uint32_t>(10, 4), "(40,10) -> 4");
    c.expect(cut_equal(480, 24).sizes == std::vector<std::uint32_t>(24, 20), "(480,24) -> 20");
    c.note = std::to_string(cases) + " (n,m) pairs";
}

void distributed_equivalence(Check& c) {
    const auto cfg = make_loopback_config(4, find_free_port_range("127.0.0.1", 4), 8);
    MonitorFleet fleet(cfg, {5, 0ms, 10000ms, {}});
    InitOptions o;
    o.config = cfg;
    o.owns_monitors = true;
    o.preference = ChannelPreference::TcpOnly;
    o.timeout = 20000ms;
    auto h = RuntimeHandle::create(o);
    double worst = 0;
    for (std::uint32_t n : {8u, 12u, 16u}) {
        for (std::uint32_t m : {2u, 3u, 4u}) {
            const auto run = run_parallel(*h, cut_equal(n, m), m, 10000);
            const auto mono = qsim::simulate(qsim::build_ghz_circuit(n), 10000, mix64(n, m));
            const std::string z(n, '0'), one(n, '1');
            double dz = 0, d1 = 0, dother = 0, mz = 0, m1 = 0;
            for (const auto& s : run.global.bitstrings) (s == z ? dz : s == one ? d1 : dother) += 1;
            for (const auto& s : mono.bitstrings) (s == z ? mz : m1) += 1;
            const auto where = "n=" + std::to_string(n) + " m=" + std::to_string(m);
            c.expect(run.global.shots() == 10000 && run.global.width == n, "wrong global shape: " + where);
            c.expect(dother == 0 && run.summary.other == 0, "non-GHZ strings: " + where);
            const double chi = oracle::chi_square_2x2(dz, d1, mz, m1);
            worst = std::max(worst, chi);
            c.expect(chi < oracle::kCritical001, "chi-square " + fmt(chi) + ": " + where);
        }
    }
    h->finalize();
    fleet.wait_all(5000ms);
    c.note = "9 (n,m) pipelines, max chi2 " + fmt(worst);
}

void speedup_trend(Check& c) {
    const std::uint32_t fragment = 4;
    const auto cfg = make_loopback_config(8, find_free_port_range("127.0.0.1", 8), fragment);
    MonitorFleet fleet(cfg, {11, 200ms, 10000ms, {}});
    InitOptions o;
    o.config = cfg;
    o.owns_monitors = true;
    o.preference = ChannelPreference::TcpOnly;
    o.timeout = 10000ms;
    auto h = RuntimeHandle::create(o);
    std::map<std::uint32_t, double> s;
    std::ostringstream note;
    for (std::uint32_t k : {1u, 2u, 4u, 8u}) {
        const auto row = run_bench_row(*h, fragment * k, k, k, 1000, 200, BenchMode::Both);
        c.expect(row.valid, "invalid run at nodes=" + std::to_string(k));
        s[k] = row.speedup;
        note << "S(" << k << ")=" << fmt(row.speedup, 2) << " ";
    }
    c.expect(s[1] >= 0.8 && s[1] <= 1.1, "S(1) outside [0.8, 1.1]");
    c.expect(s[4] >= 3.0, "S(4) < 3");
    c.expect(s[8] >= 6.0, "S(8) < 6");
    c.expect(s[2] <= s[4] && s[4] <= s[8], "S not nondecreasing over {2,4,8}");
    h->finalize();
    fleet.wait_all(5000ms);
    c.note = note.str() + "(delay 200 ms, 4-qubit fragments)";
}

void speedup_arithmetic(Check& c) {
    const double a = compute_speedup(13.29, 2.57), b = compute_speedup(177.74, 9.47);
    c.expect(std::abs(a - 5.18) <= 0.01, "13.29/2.57 = " + fmt(a, 4));
    c.expect(std::abs(b - 18.76) <= 0.01, "177.74/9.47 = " + fmt(b, 4));
    c.note = fmt(a, 4) + ", " + fmt(b, 4);
}

void failure_attribution(Check& c) {
    const auto cfg = make_loopback_config(4, find_free_port_range("127.0.0.1", 4), 3);
    MonitorFleet fleet(cfg);
    InitOptions o;
    o.config = cfg;
    o.preference = ChannelPreference::TcpOnly;
    o.timeout = 2000ms;
    auto h = RuntimeHandle::create(o);
    const DeviceIdentifier victim = h->world().q_map[2];
    fleet.kill(2);
    const std::vector<QRank> all{0, 1, 2, 3};

    const auto tmpl = make_waveform_block(h->world().q_map[0], qsim::build_ghz_circuit(2), 16);
    std::vector<DeviceIdentifier> bcast_failed;
    try {
        mpiq_bcast(*h, tmpl, all, 1);
    } catch (const CollectiveError& e) {
        bcast_failed = e.failed;
    }
    c.expect(bcast_failed == std::vector<DeviceIdentifier>{victim}, "Bcast did not name exactly the killed device");

    const auto g = mpiq_gather(*h, all, 1);
    c.expect(g.tables.size() == 3 && g.missing_devices == std::vector<DeviceIdentifier>{victim},
             "Gather did not name exactly the killed device");

    std::vector<DeviceIdentifier> absent;
    try {
        quantum_barrier(*h, all);
    } catch (const BarrierTimeout& e) {
        absent = e.absent_devices;
    }
    c.expect(absent == std::vector<DeviceIdentifier>{victim}, "Barrier did not name exactly the killed device");
    h->finalize();

    std::vector<DeviceIdentifier> init_failed;
    try {
        RuntimeHandle::create(o);
    } catch (const InitError& e) {
        init_failed = e.failed_devices;
    }
    c.expect(init_failed == std::vector<DeviceIdentifier>{victim}, "InitError did not name exactly the down device");
    fleet.shutdown();
    c.note = "victim " + to_string(victim);
}

}  // namespace

int main() {
    int failed = 0;
    failed += run_criterion(1, "wire round-trip and malformed input", 10, wire_round_trip);
    failed += run_criterion(2, "mapping bijection and seeded replay", 1, mapping_bijection);
    failed += run_criterion(3, "collectives equal the point-to-point reference", 60, collective_equivalence);
    failed += run_criterion(4, "CC and QQ barrier correctness", 120, barrier_correctness);
    failed += run_criterion(5, "simulator oracle, norm, GHZ sampling", 120, simulator_oracle);
    failed += run_criterion(6, "cutting arithmetic", 1, cutting_arithmetic);
    failed += run_criterion(7, "distributed vs monolithic GHZ statistics", 300, distributed_equivalence);
    failed += run_criterion(8, "speedup trend over nodes {1,2,4,8}", 180, speedup_trend);
    failed += run_criterion(9, "speedup arithmetic spot checks", 1, speedup_arithmetic);
    failed += run_criterion(10, "failure attribution", 30, failure_attribution);
    std::printf("%d/10 criteria passed\n", 10 - failed);
    return failed == 0 ? 0 : 1;
}
