#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>
#include <thread>

#include "entnet/secure_sum.hpp"

using namespace entnet;
using securesum::Announcement;
using securesum::RingTopology;

namespace {

RingTopology abcd() { return {{"A", "B", "C", "D"}}; }

securesum::PadKey pad(std::uint64_t value, int n_bits) {
    return {value, n_bits, false};
}

}  // namespace

TEST_CASE("modulus mask", "[secure-sum]") {
    CHECK(securesum::modulus_mask(1) == 1);
    CHECK(securesum::modulus_mask(8) == 255);
    CHECK(securesum::modulus_mask(25) == (1ULL << 25) - 1);
    CHECK(securesum::modulus_mask(64) == ~std::uint64_t{0});
    CHECK_THROWS_AS(securesum::modulus_mask(0), domain_error);
    CHECK_THROWS_AS(securesum::modulus_mask(65), domain_error);
}

TEST_CASE("ring topology validation", "[secure-sum]") {
    CHECK_NOTHROW(abcd().validate());
    CHECK_THROWS_AS((RingTopology{{"A", "B"}}.validate()), domain_error);
    CHECK_THROWS_AS((RingTopology{{"A", "B", "A"}}.validate()), domain_error);
    CHECK_THROWS_AS((RingTopology{{"A", "B", ""}}.validate()), domain_error);

    const auto ring = abcd();
    CHECK(ring.index_of("C") == 2);
    CHECK_THROWS_AS(ring.index_of("E"), domain_error);
    CHECK(ring.edge_name(0) == "A-B");
    CHECK(ring.edge_name(3) == "D-A");
}

TEST_CASE("pads come off the key material front to back", "[secure-sum]") {
    securesum::KeyMaterial material(BitVec::from_hex("b"));
    CHECK(material.remaining() == 4);
    const auto p = securesum::derive_pad(material, 4);
    CHECK(p.value == 11);
    CHECK(p.bit_width == 4);
    CHECK_FALSE(p.consumed);
    CHECK(material.remaining() == 0);
    CHECK_THROWS_AS(securesum::derive_pad(material, 4), key_exhausted_error);

    securesum::KeyMaterial two(BitVec::from_hex("b"));
    CHECK(securesum::derive_pad(two, 2).value == 2);  // bits 10
    CHECK(securesum::derive_pad(two, 2).value == 3);  // bits 11
    CHECK_THROWS_AS(securesum::derive_pad(two, 0), domain_error);
}

TEST_CASE("announcement masking", "[secure-sum]") {
    auto next = pad(9, 4);
    auto prev = pad(9, 4);
    CHECK(securesum::compute_announcement(6, next, prev, 4) == 6);  // equal pads cancel
    CHECK(next.consumed);
    CHECK(prev.consumed);
    CHECK_THROWS_AS(securesum::compute_announcement(6, next, prev, 4), pad_reuse_error);

    auto n2 = pad(0, 4);
    auto p2 = pad(1, 4);
    CHECK(securesum::compute_announcement(0, n2, p2, 4) == 15);  // -1 mod 16

    auto n3 = pad(0, 4);
    auto p3 = pad(0, 4);
    CHECK_THROWS_AS(securesum::compute_announcement(16, n3, p3, 4), domain_error);
    auto wide = pad(0, 5);
    auto ok = pad(0, 4);
    CHECK_THROWS_AS(securesum::compute_announcement(1, wide, ok, 4), domain_error);
}

TEST_CASE("masked announcements telescope to the plain sum", "[secure-sum]") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const int n_parties = 3 + static_cast<int>(rng() % 6);
        const int n_bits = 1 + static_cast<int>(rng() % 64);
        const std::uint64_t mask = securesum::modulus_mask(n_bits);
        std::vector<std::uint64_t> values, edge_pads;
        for (int i = 0; i < n_parties; ++i) {
            values.push_back(rng() & mask);
            edge_pads.push_back(rng() & mask);
        }
        std::uint64_t x_sum = 0, v_sum = 0;
        for (int i = 0; i < n_parties; ++i) {
            auto next = pad(edge_pads[static_cast<std::size_t>(i)], n_bits);
            auto prev = pad(edge_pads[static_cast<std::size_t>((i + n_parties - 1) % n_parties)],
                            n_bits);
            x_sum = (x_sum + securesum::compute_announcement(
                                 values[static_cast<std::size_t>(i)], next, prev, n_bits)) &
                    mask;
            v_sum = (v_sum + values[static_cast<std::size_t>(i)]) & mask;
        }
        REQUIRE(x_sum == v_sum);
    }
}

TEST_CASE("worked four party round", "[secure-sum]") {
    const auto ring = abcd();
    const securesum::MapKeySource keys({{"A-B", BitVec::from_hex("5")},
                                        {"B-C", BitVec::from_hex("9")},
                                        {"C-D", BitVec::from_hex("2")},
                                        {"D-A", BitVec::from_hex("e")}});
    const std::vector<std::uint64_t> values{1, 2, 3, 4};
    const std::vector<std::uint64_t> expect_x{8, 6, 12, 0};

    std::vector<Announcement> round;
    for (std::size_t i = 0; i < 4; ++i) {
        securesum::Party party(ring, ring.members[i], 4, keys);
        const auto x = party.announcement(0, values[i]);
        CHECK(x == expect_x[i]);
        round.push_back({0, ring.members[i], x});
    }
    const auto total = securesum::aggregate(round, ring, 4);
    CHECK(total.round == 0);
    CHECK(total.t == 10);
}

TEST_CASE("aggregate rejects malformed announcement sets", "[secure-sum]") {
    const auto ring = abcd();
    const std::vector<Announcement> good{
        {0, "A", 1}, {0, "B", 2}, {0, "C", 3}, {0, "D", 4}};
    CHECK(securesum::aggregate(good, ring, 4).t == 10);

    CHECK_THROWS_AS(securesum::aggregate({}, ring, 4), protocol_violation_error);
    CHECK_THROWS_AS(securesum::aggregate({{0, "A", 1}, {1, "B", 2}, {0, "C", 3}, {0, "D", 4}},
                                         ring, 4),
                    protocol_violation_error);
    CHECK_THROWS_AS(securesum::aggregate({{0, "A", 16}, {0, "B", 2}, {0, "C", 3}, {0, "D", 4}},
                                         ring, 4),
                    protocol_violation_error);
    CHECK_THROWS_AS(securesum::aggregate({{0, "A", 1}, {0, "A", 2}, {0, "C", 3}, {0, "D", 4}},
                                         ring, 4),
                    protocol_violation_error);
    CHECK_THROWS_AS(securesum::aggregate({{0, "A", 1}, {0, "B", 2}, {0, "C", 3}}, ring, 4),
                    protocol_violation_error);
    CHECK_THROWS_AS(securesum::aggregate({{0, "E", 1}, {0, "B", 2}, {0, "C", 3}, {0, "D", 4}},
                                         ring, 4),
                    domain_error);
}

TEST_CASE("party enforces round lockstep", "[secure-sum]") {
    const auto ring = abcd();
    const securesum::SeededKeySource keys(33, 64);
    securesum::Party party(ring, "B", 4, keys);
    CHECK_NOTHROW(party.announcement(0, 5));
    CHECK_THROWS_AS(party.announcement(0, 5), pad_reuse_error);
    CHECK_THROWS_AS(party.announcement(2, 5), protocol_violation_error);
    CHECK_NOTHROW(party.announcement(1, 5));

    CHECK_THROWS_AS(securesum::Party(ring, "E", 4, keys), domain_error);
    const RingTopology small{{"A", "B"}};
    CHECK_THROWS_AS(securesum::Party(small, "A", 4, keys), domain_error);

    // 4 bits of material per edge feed exactly one 4-bit round
    const securesum::MapKeySource thin({{"A-B", BitVec::from_hex("5")},
                                        {"B-C", BitVec::from_hex("9")},
                                        {"C-D", BitVec::from_hex("2")},
                                        {"D-A", BitVec::from_hex("e")}});
    securesum::Party starved(ring, "A", 4, thin);
    CHECK_NOTHROW(starved.announcement(0, 1));
    CHECK_THROWS_AS(starved.announcement(1, 1), key_exhausted_error);
}

TEST_CASE("four node protocol run over in-process transport", "[secure-sum]") {
    const RingTopology ring{{"A1", "B1", "A2", "B2"}};
    const std::map<std::string, std::uint64_t> inputs{
        {"A1", 55406}, {"B1", 116559}, {"A2", 988150}, {"B2", 2839885}};
    const int rounds = 30;
    std::map<std::string, std::vector<std::uint64_t>> values;
    for (const auto& [id, v] : inputs)
        values[id] = std::vector<std::uint64_t>(rounds, v);

    const securesum::SeededKeySource keys(777, 25 * rounds);
    const auto result = securesum::run_protocol(ring, values, 25, keys, "s1", false);

    REQUIRE(result.by_party.size() == 4);
    for (const auto& [id, transcript] : result.by_party) {
        REQUIRE(transcript.totals.size() == rounds);
        for (int r = 0; r < rounds; ++r) {
            CHECK(transcript.totals[static_cast<std::size_t>(r)].round == r);
            CHECK(transcript.totals[static_cast<std::size_t>(r)].t == 4'000'000);
        }
        CHECK(transcript.announcements.size() == 4 * rounds);
    }

    // every party saw the same announcement log, and the masked words differ
    // from the raw inputs
    const auto& log = result.by_party.at("A1").announcements;
    CHECK(result.by_party.at("B2").announcements == log);
    std::size_t masked = 0;
    for (const auto& a : log)
        if (a.x != inputs.at(a.party)) ++masked;
    CHECK(masked > 4 * rounds / 2);
}

TEST_CASE("three node protocol run over sockets", "[secure-sum]") {
    const RingTopology ring{{"A", "B", "C"}};
    std::map<std::string, std::vector<std::uint64_t>> values{
        {"A", {10, 1}}, {"B", {20, 2}}, {"C", {30, 4}}};
    const securesum::SeededKeySource keys(101, 256);
    const auto result = securesum::run_protocol(ring, values, 16, keys, "s2", true);
    REQUIRE(result.by_party.size() == 3);
    for (const auto& [id, transcript] : result.by_party) {
        REQUIRE(transcript.totals.size() == 2);
        CHECK(transcript.totals[0].t == 60);
        CHECK(transcript.totals[1].t == 7);
    }
}

TEST_CASE("protocol run input validation", "[secure-sum]") {
    const RingTopology ring{{"A", "B", "C"}};
    const securesum::SeededKeySource keys(5, 64);
    std::map<std::string, std::vector<std::uint64_t>> missing{{"A", {1}}, {"B", {2}}};
    CHECK_THROWS_AS(securesum::run_protocol(ring, missing, 8, keys, "s", false), domain_error);
    std::map<std::string, std::vector<std::uint64_t>> ragged{
        {"A", {1}}, {"B", {2, 3}}, {"C", {4}}};
    CHECK_THROWS_AS(securesum::run_protocol(ring, ragged, 8, keys, "s", false), domain_error);
}

TEST_CASE("node runner reports clean completion", "[secure-sum]") {
    const RingTopology ring{{"A", "B", "C"}};
    const securesum::SeededKeySource keys(404, 64);
    auto mesh = transport::make_inprocess_mesh(ring.members);
    std::vector<securesum::NodeOutcome> outcomes(3);
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < 3; ++i)
        threads.emplace_back([&, i]() {
            securesum::Party party(ring, ring.members[i], 8, keys);
            outcomes[i] = securesum::run_node(*mesh[i], ring, party, "s", {{7 + i}});
            mesh[i]->close();
        });
    for (auto& t : threads) t.join();
    for (const auto& out : outcomes) {
        CHECK(out.terminal == securesum::NodeState::done);
        CHECK(out.error.empty());
        REQUIRE(out.transcript.totals.size() == 1);
        CHECK(out.transcript.totals[0].t == 7 + 8 + 9);
        const std::vector<std::string> trail{"0/keyed", "0/announced", "0/done"};
        CHECK(out.transcript.transitions == trail);
    }
}

TEST_CASE("node runner flags a duplicate announcement", "[secure-sum]") {
    const RingTopology ring{{"A", "B", "C"}};
    const securesum::SeededKeySource keys(505, 64);
    auto mesh = transport::make_inprocess_mesh(ring.members);

    transport::Message dup;
    dup.session = "s";
    dup.round = 0;
    dup.sender = "B";
    dup.kind = "ANNOUNCE";
    dup.fields["x"] = "3";
    mesh[1]->send("A", dup);
    mesh[1]->send("A", dup);

    securesum::Party party(ring, "A", 8, keys);
    const auto out = securesum::run_node(*mesh[0], ring, party, "s", {1});
    CHECK(out.terminal == securesum::NodeState::violation);
    CHECK(out.error.find("duplicate announcement") != std::string::npos);
}

TEST_CASE("node runner times out on silent peers", "[secure-sum]") {
    const RingTopology ring{{"A", "B", "C"}};
    const securesum::SeededKeySource keys(606, 64);
    auto mesh = transport::make_inprocess_mesh(ring.members);
    securesum::Party party(ring, "A", 8, keys);
    const auto out = securesum::run_node(*mesh[0], ring, party, "s", {1},
                                         std::chrono::milliseconds(50));
    CHECK(out.terminal == securesum::NodeState::incomplete);
    CHECK_FALSE(out.error.empty());
}

TEST_CASE("audit bins split the modulus range evenly", "[secure-sum]") {
    const auto hist = securesum::audit_bins({0, 31, 32, 128, 255, 255}, 8, 8);
    REQUIRE(hist.size() == 8);
    CHECK(hist[0] == 2);
    CHECK(hist[1] == 1);
    CHECK(hist[4] == 1);
    CHECK(hist[7] == 2);

    const auto fine = securesum::audit_bins({0, 7, 200}, 8, 256);
    CHECK(fine[0] == 1);
    CHECK(fine[7] == 1);
    CHECK(fine[200] == 1);

    CHECK_THROWS_AS(securesum::audit_bins({0}, 8, 1), domain_error);
    CHECK_THROWS_AS(securesum::audit_bins({256}, 8, 8), domain_error);
}

TEST_CASE("privacy audit separates fresh pads from a stuck pad", "[secure-sum]") {
    const RingTopology ring{{"A", "B", "C"}};
    const int rounds = 2000;
    const securesum::SeededKeySource fresh(909, static_cast<std::size_t>(8 * rounds));
    securesum::Party party(ring, "A", 8, fresh);
    std::vector<std::uint64_t> xs;
    for (int r = 0; r < rounds; ++r) xs.push_back(party.announcement(r, 7));
    const auto good = securesum::privacy_audit(xs, 8);
    CHECK(good.uniformity.p_value > 1e-3);
    CHECK(good.monobit_ok);
    CHECK(good.ones_fraction == Catch::Approx(0.5).margin(0.02));

    const auto stuck = securesum::privacy_audit(std::vector<std::uint64_t>(rounds, 7), 8);
    CHECK(stuck.uniformity.p_value < 1e-6);
    CHECK_FALSE(stuck.monobit_ok);
}

TEST_CASE("secure sum csv output", "[secure-sum]") {
    securesum::Transcript t;
    t.announcements = {{0, "A", 8}, {0, "B", 6}};
    t.totals = {{0, 10}, {1, 12}};
    std::ostringstream ann, sums;
    securesum::write_announcements_csv(ann, t);
    securesum::write_sums_csv(sums, t);
    CHECK(ann.str() == "round,party,x\n0,A,8\n0,B,6\n");
    CHECK(sums.str() == "round,t\n0,10\n1,12\n");
}
