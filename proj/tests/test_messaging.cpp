// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "mpiq/messaging.hpp"
#include "support.hpp"

using namespace mpiq;
using namespace std::chrono_literals;

TEST_CASE("execute payload round trip") {
    const DeviceIdentifier dev{"127.0.0.1", 7000, 3};
    const auto block = make_waveform_block(dev, qsim::build_ghz_circuit(4), 123);
    CHECK(block.channels.size() == 4);
    CHECK(block.circuit_digest == compute_block_digest(block.channels));
    auto decoded = decode_execute_payload(encode_execute_payload(block));
    CHECK(decoded.channels == block.channels);
    CHECK(decoded.shots == 123);
    CHECK(decoded.circuit_digest == block.circuit_digest);
    auto bytes = encode_execute_payload(block);
    bytes.pop_back();
    CHECK_THROWS_AS(decode_execute_payload(bytes), DecodeError);
}

TEST_CASE("result payload packs rows MSB first") {
    ShotTable t{2, 10, {"1000000001", "0000000000", "1111111111"}};
    const auto bytes = encode_result_payload(t);
    REQUIRE(bytes.size() == 4 + 2 + 3 * 2);
    CHECK(bytes[6] == 0x80);
    CHECK(bytes[7] == 0x40);
    CHECK(decode_result_payload(bytes, 2) == t);

    std::mt19937_64 rng(1);
    for (int i = 0; i < 200; ++i) {
        ShotTable r{0, static_cast<std::uint16_t>(1 + rng() % 40), {}};
        for (int s = 0; s < 17; ++s) {
            std::string row;
            for (int b = 0; b < r.width; ++b) row += rng() % 2 ? '1' : '0';
            r.bitstrings.push_back(row);
        }
        REQUIRE(decode_result_payload(encode_result_payload(r), 0) == r);
    }
}

TEST_CASE("ack payloads") {
    CHECK(decode_ack(encode_ack({})).status == ErrorCode::Ok);
    const auto nak = decode_ack(encode_ack({ErrorCode::Integrity, "bad digest", 0}));
    CHECK(nak.status == ErrorCode::Integrity);
    CHECK(nak.text == "bad digest");
    CHECK(decode_ack(encode_release_ack(987654321)).release_local_ns == 987654321);
}

TEST_CASE("monitor validation before execution") {
    MonitorState st;
    st.device = {"127.0.0.1", 1, 0};
    st.qubit_count = 4;
    auto block = make_waveform_block(st.device, qsim::build_ghz_circuit(4), 10);
    CHECK_NOTHROW(verify_block(st, block));

    auto tampered = block;
    tampered.channels[0].stream[4] = 2;
    CHECK_THROWS_AS(verify_block(st, tampered), IntegrityError);

    st.qubit_count = 3;
    CHECK_THROWS_AS(verify_block(st, block), QubitRangeError);

    st.qubit_count = 4;
    const auto a = handle_execute(st, 5, block);
    CHECK(a == handle_execute(st, 5, block));
    CHECK(a.shots() == 10);
    CHECK(execution_seed(1, 5, block.circuit_digest) != execution_seed(1, 6, block.circuit_digest));
}

TEST_CASE("send and receive against a live monitor") {
    test::MonitorCluster cluster(2, 4);
    auto h = RuntimeHandle::create(test::options_for(cluster.config));
    const auto dev0 = h->world().q_map[0];
    const auto dev1 = h->world().q_map[1];

    SUBCASE("results match by source and tag, out of order") {
        mpiq_send(*h, dev0, 1, make_waveform_block(dev0, qsim::build_ghz_circuit(2), 50));
        mpiq_send(*h, dev0, 2, make_waveform_block(dev0, qsim::build_ghz_circuit(3), 60));
        mpiq_send(*h, dev1, 1, make_waveform_block(dev1, qsim::build_ghz_circuit(4), 70));
        const auto b = mpiq_recv(*h, dev0, 2);
        const auto c = mpiq_recv(*h, dev1, 1);
        const auto a = mpiq_recv(*h, dev0, 1);
        CHECK(a.width == 2);
        CHECK(a.shots() == 50);
        CHECK(b.width == 3);
        CHECK(c.width == 4);
        CHECK(c.qrank == 1);
    }
    SUBCASE("a monitor NAK is raised as its error") {
        auto block = make_waveform_block(dev0, qsim::build_ghz_circuit(2), 5);
        block.circuit_digest ^= 1;
        CHECK_THROWS_AS(mpiq_send(*h, dev0, 3, block), IntegrityError);
        // Nothing was executed for that tag.
        CHECK_THROWS_AS(recv_result(*h, 0, 3, Mailbox::Clock::now() + 200ms), TimeoutError);
    }
    SUBCASE("oversized blocks never leave the host") {
        CHECK_THROWS_AS(mpiq_send(*h, dev0, 4, make_waveform_block(dev0, qsim::build_ghz_circuit(5), 5)),
                        QubitRangeError);
    }
    SUBCASE("misaddressed blocks are refused") {
        CHECK_THROWS_AS(mpiq_send(*h, dev0, 4, make_waveform_block(dev1, qsim::build_ghz_circuit(2), 5)),
                        AddressError);
        CHECK_THROWS_AS(mpiq_send(*h, DeviceIdentifier{"10.1.1.1", 1, 0}, 4,
                                  make_waveform_block(dev0, qsim::build_ghz_circuit(2), 5)),
                        AddressError);
    }
    SUBCASE("truncation keeps the result") {
        mpiq_send(*h, dev0, 9, make_waveform_block(dev0, qsim::build_ghz_circuit(4), 100));
        CHECK_THROWS_AS(mpiq_recv(*h, dev0, 9, 10), TruncationError);
        CHECK(mpiq_recv(*h, dev0, 9).shots() == 100);
    }
    SUBCASE("finalize") {
        h->finalize();
        CHECK_THROWS_AS(h->finalize(), StateError);
        CHECK_THROWS_AS(mpiq_send(*h, dev0, 1, make_waveform_block(dev0, qsim::build_ghz_circuit(2), 5)), StateError);
        CHECK_THROWS_AS(mpiq_recv(*h, dev0, 1), StateError);
    }
}

TEST_CASE("monitors execute payloads in arrival order") {
    test::MonitorCluster cluster(1, 4, 1, 20ms);
    auto h = RuntimeHandle::create(test::options_for(cluster.config));
    const auto dev = h->world().q_map[0];
    for (std::uint32_t tag = 1; tag <= 5; ++tag) mpiq_send(*h, dev, tag, make_waveform_block(dev, qsim::build_ghz_circuit(2), 4));
    for (std::uint32_t tag = 1; tag <= 5; ++tag) mpiq_recv(*h, dev, tag);
    std::vector<std::uint32_t> executed;
    for (const auto& e : cluster.monitors[0]->events()) {
        if (e.kind == MonitorEvent::Kind::Executed) executed.push_back(e.tag);
    }
    CHECK(executed == std::vector<std::uint32_t>{1, 2, 3, 4, 5});
}

TEST_CASE("classical point-to-point between ranks") {
    test::MonitorCluster cluster(1, 2);
    for (auto pref : {ChannelPreference::Auto, ChannelPreference::TcpOnly}) {
        auto world = test::make_world(cluster.config, 3, pref);
        test::run_ranks(3, [&](std::size_t r) {
            auto& h = *world[r];
            const Rank next = static_cast<Rank>((r + 1) % 3), prev = static_cast<Rank>((r + 2) % 3);
            classical_send(h, next, 77, Bytes{static_cast<std::uint8_t>(r)});
            classical_send(h, h.rank(), 78, Bytes{42});
            CHECK(classical_recv(h, prev, 77) == Bytes{static_cast<std::uint8_t>(prev)});
            CHECK(classical_recv(h, h.rank(), 78) == Bytes{42});
        });
        for (auto& h : world) h->finalize();
    }
}

TEST_CASE("init against a down monitor names it") {
    test::MonitorCluster cluster(3, 2);
    const auto down = DeviceIdentifier{"127.0.0.1", cluster.monitors[1]->port(), 1};
    cluster.monitors[1]->kill();
    auto o = test::options_for(cluster.config);
    o.timeout = 500ms;
    try {
        RuntimeHandle::create(o);
        FAIL("expected InitError");
    } catch (const InitError& e) {
        REQUIRE(e.failed_devices.size() == 1);
        CHECK(e.failed_devices[0] == down);
    }
}

TEST_CASE("re-init against idle monitors succeeds and one handle per process") {
    test::MonitorCluster cluster(2, 2);
    for (int i = 0; i < 3; ++i) {
        auto h = mpiq_init(test::options_for(cluster.config));
        CHECK(h->world().quantum_size() == 2);
        CHECK_THROWS_AS(mpiq_init(test::options_for(cluster.config)), StateError);
        mpiq_finalize(*h);
    }
}

TEST_CASE("sub-domains get fresh context ids on every rank") {
    test::MonitorCluster cluster(2, 2);
    auto world = test::make_world(cluster.config, 2);
    std::vector<HybridDomain> subs(2);
    test::run_ranks(2, [&](std::size_t r) { subs[r] = mpiq_comm_create(*world[r], cluster.config); });
    CHECK(subs[0].context.value == 1);
    CHECK(subs[1].context.value == 1);
    CHECK(world[1]->mailbox().admits(1));
}
