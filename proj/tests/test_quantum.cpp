#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "entnet/quantum.hpp"

using namespace entnet;
using quantum::PairState;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("ideal pair state is a valid pure state", "[quantum]") {
    const auto psi = quantum::ideal_pair_state(kPi);
    CHECK(psi.is_valid());
    CHECK(psi.is_pure());
    // |HV> and |VH> carry all the weight.
    CHECK(psi.m(0, 0).real() == Catch::Approx(0.0).margin(1e-15));
    CHECK(psi.m(1, 1).real() == Catch::Approx(0.5).epsilon(1e-14));
    CHECK(psi.m(2, 2).real() == Catch::Approx(0.5).epsilon(1e-14));
    CHECK(psi.m(3, 3).real() == Catch::Approx(0.0).margin(1e-15));

    CHECK(quantum::fidelity(psi, psi) == Catch::Approx(1.0).epsilon(1e-14));
    // Opposite relative phase is orthogonal.
    CHECK(quantum::fidelity(quantum::ideal_pair_state(0.0), psi) ==
          Catch::Approx(0.0).margin(1e-14));

    CHECK_THROWS_AS(quantum::ideal_pair_state(std::nan("")), domain_error);
}

TEST_CASE("werner mixing hits the requested fidelity exactly", "[quantum]") {
    const auto target = quantum::ideal_pair_state(kPi);
    for (const double f : {0.25, 0.5, 0.9512, 1.0}) {
        const auto mixed = quantum::werner_mix(target, f);
        CHECK(mixed.is_valid());
        CHECK(quantum::fidelity(mixed, target) == Catch::Approx(f).margin(1e-12));
    }
    CHECK_THROWS_AS(quantum::werner_mix(target, 0.2), domain_error);
    CHECK_THROWS_AS(quantum::werner_mix(target, 1.01), domain_error);
    const auto mixed = quantum::werner_mix(target, 0.8);
    CHECK_THROWS_AS(quantum::werner_mix(mixed, 0.9), domain_error);  // target must be pure
}

TEST_CASE("eom unitary shape", "[quantum]") {
    const auto id = quantum::eom_unitary(0.0);
    CHECK(id.m(0, 0).real() == Catch::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(id.m(0, 1)) == Catch::Approx(0.0).margin(1e-15));

    const auto u = quantum::eom_unitary(0.7);
    CHECK(u.is_unitary());
    // Quarter rotation swaps the ports up to phase.
    const auto q = quantum::eom_unitary(kPi / 2);
    CHECK(std::abs(q.m(0, 0)) == Catch::Approx(0.0).margin(1e-12));
    CHECK(q.m(1, 0).imag() == Catch::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("apply_local preserves state validity and purity", "[quantum]") {
    const auto psi = quantum::ideal_pair_state(kPi);
    const auto rotated =
        quantum::apply_local(psi, quantum::eom_unitary(0.3), quantum::eom_unitary(-1.1));
    CHECK(rotated.is_valid());
    CHECK(rotated.is_pure());
    CHECK(rotated.m.trace().real() == Catch::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("matched analyzers never see the same port on the singlet", "[quantum]") {
    const auto psi = quantum::ideal_pair_state(kPi);
    for (const double t : {0.0, deg_to_rad(22.5), deg_to_rad(45.0)}) {
        const auto d = quantum::born_probabilities(psi, t, t);
        CHECK(d.sum() == Catch::Approx(1.0).epsilon(1e-13));
        CHECK(d.prob(0, 0) == Catch::Approx(0.0).margin(1e-12));
        CHECK(d.prob(1, 1) == Catch::Approx(0.0).margin(1e-12));
        CHECK(d.prob(0, 1) == Catch::Approx(0.5).epsilon(1e-12));
        CHECK(d.prob(1, 0) == Catch::Approx(0.5).epsilon(1e-12));
        // Opposite ports mean agreeing outcome values.
        CHECK(quantum::correlation_value(d) == Catch::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("correlation at the standard offset", "[quantum]") {
    const auto psi = quantum::ideal_pair_state(kPi);
    const auto d = quantum::born_probabilities(psi, 0.0, deg_to_rad(22.5));
    CHECK(quantum::correlation_value(d) == Catch::Approx(0.7071067811865472).epsilon(1e-12));
    CHECK(quantum::correlation_raw(d) == Catch::Approx(-0.7071067811865472).epsilon(1e-12));
}

TEST_CASE("chsh statistic for reference states", "[quantum]") {
    const auto singlet = quantum::ideal_pair_state(kPi);
    CHECK(quantum::chsh_analytic(singlet) == Catch::Approx(2.828427124746189).epsilon(1e-12));

    PairState hh;
    hh.m(0, 0) = 1.0;
    CHECK(quantum::chsh_analytic(hh) == Catch::Approx(-1.414213562373095).epsilon(1e-12));

    PairState hv;
    hv.m(1, 1) = 1.0;
    CHECK(quantum::chsh_analytic(hv) == Catch::Approx(1.414213562373095).epsilon(1e-12));

    const auto werner = quantum::werner_mix(singlet, 0.9512);
    CHECK(quantum::chsh_analytic(werner) == Catch::Approx(2.6443907998293708).epsilon(1e-9));

    // Linear scaling in the mixing weight p = (4F - 1) / 3.
    const auto half = quantum::werner_mix(singlet, 0.625);  // p = 0.5
    CHECK(quantum::chsh_analytic(half) ==
          Catch::Approx(0.5 * 2.828427124746189).epsilon(1e-9));
}

TEST_CASE("one-sided five degree rotation costs known fidelity", "[quantum]") {
    const auto singlet = quantum::ideal_pair_state(kPi);
    const auto werner = quantum::werner_mix(singlet, 0.9512);
    const auto tilted = quantum::apply_local(werner, quantum::eom_unitary(deg_to_rad(5.0)),
                                             quantum::LocalUnitary::identity());
    CHECK(quantum::fidelity(tilted, singlet) == Catch::Approx(0.9440981309414398).epsilon(1e-9));
}
