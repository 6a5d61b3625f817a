#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>
#include <vector>

#include "entnet/network.hpp"

using namespace entnet;
using net::EndUser;
using net::NetworkConfig;
using net::Side;

namespace {

NetworkConfig lossless() {
    NetworkConfig c;
    c.attenuation_db_per_km = 0.0;
    c.switch_insertion_loss_db = 0.0;
    c.residual_default = net::ResidualDefault::none;
    return c;
}

}  // namespace

TEST_CASE("end user parsing", "[network]") {
    const auto a = net::parse_end_user("A3");
    CHECK(a.side == Side::A);
    CHECK(a.port == 3);
    CHECK(a.name() == "A3");
    const auto b = net::parse_end_user("b12");
    CHECK(b.side == Side::B);
    CHECK(b.port == 12);
    CHECK_THROWS_AS(net::parse_end_user("C1"), usage_error);
    CHECK_THROWS_AS(net::parse_end_user("A"), usage_error);
    CHECK_THROWS_AS(net::parse_end_user("Axy"), usage_error);
}

TEST_CASE("config validation bounds", "[network]") {
    NetworkConfig c;
    CHECK_NOTHROW(c.validate());
    c.source_fidelity = 0.2;
    CHECK_THROWS_AS(c.validate(), domain_error);
    c = NetworkConfig{};
    c.fiber_length_km_b = -1.0;
    CHECK_THROWS_AS(c.validate(), domain_error);
    c = NetworkConfig{};
    c.pair_gen_prob_per_pulse = 1.5;
    CHECK_THROWS_AS(c.validate(), domain_error);
    c = NetworkConfig{};
    CHECK(c.user_valid({Side::A, 8}));
    CHECK_FALSE(c.user_valid({Side::A, 9}));
    CHECK_FALSE(c.user_valid({Side::B, 0}));
}

TEST_CASE("transmittance from fiber and switch losses", "[network]") {
    NetworkConfig c;  // 10 km at 0.2 dB/km plus 1 dB switch = 3 dB
    CHECK(net::transmittance(c, Side::A) == Catch::Approx(0.5011872336272722).epsilon(1e-14));
    c.fiber_length_km_a = 20.0;  // 5 dB
    CHECK(net::transmittance(c, Side::A) == Catch::Approx(0.31622776601683794).epsilon(1e-14));
    CHECK(net::transmittance(c, Side::B) == Catch::Approx(0.5011872336272722).epsilon(1e-14));
    c.detector_efficiency = 0.5;
    CHECK(net::transmittance(c, Side::B) ==
          Catch::Approx(0.5 * 0.5011872336272722).epsilon(1e-14));
}

TEST_CASE("residual rotation pattern tilts each port differently", "[network]") {
    NetworkConfig c;
    const auto a1 = c.residual_angles(Side::A, 1);
    CHECK(a1.x_deg == Catch::Approx(4.0));
    CHECK(a1.y_deg == Catch::Approx(2.0));
    CHECK(a1.z_deg == Catch::Approx(2.0));
    const auto a3 = c.residual_angles(Side::A, 3);
    CHECK(a3.y_deg == Catch::Approx(2.4));
    CHECK(a3.z_deg == Catch::Approx(2.3));
    const auto b4 = c.residual_angles(Side::B, 4);
    CHECK(b4.x_deg == Catch::Approx(4.0));
    CHECK(b4.y_deg == Catch::Approx(-2.75));
    CHECK(b4.z_deg == Catch::Approx(-2.9));

    c.residual_default = net::ResidualDefault::none;
    const auto none = c.residual_angles(Side::A, 5);
    CHECK(none.x_deg == 0.0);
    CHECK(none.y_deg == 0.0);
    CHECK(none.z_deg == 0.0);

    c.residual_overrides[{'A', 5}] = {1.0, -2.0, 0.5};
    const auto over = c.residual_angles(Side::A, 5);
    CHECK(over.y_deg == Catch::Approx(-2.0));
    CHECK(c.residual_unitary(Side::A, 5).is_unitary());
}

TEST_CASE("channel state fidelity", "[network]") {
    NetworkConfig c;
    c.residual_default = net::ResidualDefault::none;
    const auto ideal = quantum::ideal_pair_state(deg_to_rad(c.source_phase_deg));
    const auto rho = net::channel_state(c, {EndUser{Side::A, 1}, EndUser{Side::B, 1}});
    CHECK(quantum::fidelity(rho, ideal) == Catch::Approx(0.9512).margin(1e-12));

    // The default pattern costs a little under a percent per pair.
    NetworkConfig p;
    const std::map<std::string, double> expected = {
        {"A1:B1", 0.9421234300663841},
        {"A1:B2", 0.9408381315912094},
        {"A2:B1", 0.9413150919557912},
        {"A2:B2", 0.9399771602834608},
    };
    for (const auto& [name, fid] : expected) {
        const auto ua = net::parse_end_user(name.substr(0, 2));
        const auto ub = net::parse_end_user(name.substr(3, 2));
        const auto state = net::channel_state(p, {ua, ub});
        CHECK(quantum::fidelity(state, ideal) == Catch::Approx(fid).epsilon(1e-9));
        CHECK(quantum::chsh_analytic(state) > 2.6);
    }
}

TEST_CASE("routing schedule validation", "[network]") {
    NetworkConfig c;
    net::RoutingSchedule s;
    s.entries.push_back({0, 99, {Side::A, 1}, {Side::B, 1}});
    s.entries.push_back({100, 199, {Side::A, 2}, {Side::B, 3}});
    CHECK_NOTHROW(s.validate(c));

    CHECK(net::route(s, 0).has_value());
    CHECK(net::route(s, 150)->first.port == 2);
    CHECK_FALSE(net::route(s, 200).has_value());

    net::RoutingSchedule overlap = s;
    overlap.entries.push_back({150, 250, {Side::A, 1}, {Side::B, 1}});
    CHECK_THROWS_AS(overlap.validate(c), domain_error);

    net::RoutingSchedule sides;
    sides.entries.push_back({0, 9, {Side::B, 1}, {Side::B, 1}});
    CHECK_THROWS_AS(sides.validate(c), domain_error);

    net::RoutingSchedule ports;
    ports.entries.push_back({0, 9, {Side::A, 9}, {Side::B, 1}});
    CHECK_THROWS_AS(ports.validate(c), domain_error);

    net::RoutingSchedule backwards;
    backwards.entries.push_back({9, 0, {Side::A, 1}, {Side::B, 1}});
    CHECK_THROWS_AS(backwards.validate(c), domain_error);
}

TEST_CASE("run_slots is deterministic in the seed", "[network]") {
    const auto c = lossless();
    const auto sched = net::RoutingSchedule::single({Side::A, 1}, {Side::B, 1}, 50'000);
    const auto r1 = net::run_slots(c, sched, net::E91Policy{}, 50'000, 99);
    const auto r2 = net::run_slots(c, sched, net::E91Policy{}, 50'000, 99);
    const auto r3 = net::run_slots(c, sched, net::E91Policy{}, 50'000, 100);
    REQUIRE(r1.records.size() == r2.records.size());
    CHECK(r1.records.size() > 300);
    for (std::size_t i = 0; i < r1.records.size(); ++i) {
        CHECK(r1.records[i].slot == r2.records[i].slot);
        CHECK(r1.records[i].outcome_a == r2.records[i].outcome_a);
        CHECK(r1.records[i].outcome_b == r2.records[i].outcome_b);
    }
    bool differs = r1.records.size() != r3.records.size();
    for (std::size_t i = 0; !differs && i < r1.records.size(); ++i)
        differs = r1.records[i].slot != r3.records[i].slot;
    CHECK(differs);

    CHECK_THROWS_AS(net::run_slots(c, sched, net::E91Policy{}, 0, 1), domain_error);
}

TEST_CASE("lossless slots convert every pair into a record", "[network]") {
    const auto c = lossless();
    const auto sched = net::RoutingSchedule::single({Side::A, 1}, {Side::B, 1}, 200'000);
    const auto r = net::run_slots(c, sched, net::E91Policy{}, 200'000, 5);
    CHECK(r.stats.slots_total == 200'000);
    CHECK(r.stats.pairs_generated == r.stats.coincidences);
    CHECK(r.stats.records == r.records.size());
    CHECK(r.stats.records == r.stats.coincidences);
    CHECK(r.stats.dark_involved == 0);
    // Expect about n * pair_gen_prob = 2000 events, within six sigma.
    const double n = static_cast<double>(r.stats.records);
    CHECK(n > 2000 - 6 * 45);
    CHECK(n < 2000 + 6 * 45);
}

TEST_CASE("loss thins the coincidence rate to t_a t_b", "[network]") {
    NetworkConfig c;  // default losses, both sides 3 dB
    c.residual_default = net::ResidualDefault::none;
    const auto sched = net::RoutingSchedule::single({Side::A, 1}, {Side::B, 1}, 2'000'000);
    const auto r = net::run_slots(c, sched, net::E91Policy{}, 2'000'000, 17);
    const double expect = 2e6 * c.pair_gen_prob_per_pulse * 0.5011872336272722 *
                          0.5011872336272722;
    const double sigma = std::sqrt(expect);
    CHECK(static_cast<double>(r.stats.coincidences) > expect - 6 * sigma);
    CHECK(static_cast<double>(r.stats.coincidences) < expect + 6 * sigma);
    CHECK(r.stats.arrived_a >= r.stats.coincidences);
    CHECK(r.stats.arrived_b >= r.stats.coincidences);
    CHECK(r.stats.pairs_generated >= r.stats.arrived_a);
}

TEST_CASE("E91 policy draws settings from the fixed grids", "[network]") {
    const auto c = lossless();
    const auto sched = net::RoutingSchedule::single({Side::A, 1}, {Side::B, 1}, 300'000);
    const auto r = net::run_slots(c, sched, net::E91Policy{}, 300'000, 7);
    std::set<std::pair<double, double>> seen;
    for (const auto& rec : r.records) {
        seen.insert({rec.theta_a_deg, rec.theta_b_deg});
        const bool a_ok = rec.theta_a_deg == 0.0 || rec.theta_a_deg == 22.5 ||
                          rec.theta_a_deg == 45.0;
        const bool b_ok = rec.theta_b_deg == 22.5 || rec.theta_b_deg == 45.0 ||
                          rec.theta_b_deg == 67.5;
        REQUIRE(a_ok);
        REQUIRE(b_ok);
    }
    CHECK(seen.size() == 9);  // all combinations show up
}

TEST_CASE("fringe policy sweeps the listed angles in slot order", "[network]") {
    const auto c = lossless();
    net::FringePolicy policy;
    policy.basis = 'x';
    policy.theta_b_deg = {0.0, 30.0, 60.0, 90.0};
    const auto sched = net::RoutingSchedule::single({Side::A, 2}, {Side::B, 7}, 100'000);
    const auto r = net::run_slots(c, sched, policy, 100'000, 21);
    std::map<double, std::uint64_t> per_angle;
    for (const auto& rec : r.records) {
        CHECK(rec.theta_a_deg == 45.0);
        CHECK(rec.user_a.port == 2);
        CHECK(rec.user_b.port == 7);
        ++per_angle[rec.theta_b_deg];
    }
    REQUIRE(per_angle.size() == 4);
    // Equal slot shares, so roughly 250 records each.
    for (const auto& [angle, count] : per_angle) {
        CHECK(count > 150);
        CHECK(count < 350);
    }
}

TEST_CASE("dark counts produce flagged records", "[network]") {
    auto c = lossless();
    // One lossy side so lone photons can pair up with dark clicks.
    c.attenuation_db_per_km = 0.2;
    c.fiber_length_km_b = 15.0;
    c.fiber_length_km_a = 0.0;
    c.dark_count_prob_per_slot = 0.01;
    const auto sched = net::RoutingSchedule::single({Side::A, 1}, {Side::B, 1}, 200'000);
    const auto r = net::run_slots(c, sched, net::E91Policy{}, 200'000, 11);
    CHECK(r.stats.dark_involved > 0);
    CHECK(r.stats.records == r.stats.coincidences + r.stats.dark_involved);
    CHECK(r.stats.records == r.records.size());
}
