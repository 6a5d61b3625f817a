#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "entnet/stats.hpp"

using namespace entnet;

TEST_CASE("binary entropy endpoints and reference value", "[stats]") {
    CHECK(stats::binary_entropy(0.0) == 0.0);
    CHECK(stats::binary_entropy(1.0) == 0.0);
    CHECK(stats::binary_entropy(0.5) == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(stats::binary_entropy(0.05) == Catch::Approx(0.28639695711595625).epsilon(1e-12));
    CHECK(stats::binary_entropy(0.3) == Catch::Approx(stats::binary_entropy(0.7)).epsilon(1e-14));
}

TEST_CASE("chi-square tail probabilities", "[stats]") {
    CHECK(stats::chi_square_pvalue(0.0, 5) == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(stats::chi_square_pvalue(1.0, 1) == Catch::Approx(0.31731050786291).epsilon(1e-8));
    CHECK(stats::chi_square_pvalue(5.0, 5) == Catch::Approx(0.4158801869955079).epsilon(1e-8));
    CHECK(stats::chi_square_pvalue(30.0, 7) ==
          Catch::Approx(9.495972508134177e-05).epsilon(1e-6));
}

TEST_CASE("uniformity test on flat and degenerate histograms", "[stats]") {
    const auto flat = stats::chi_square_uniform({100, 100, 100, 100});
    CHECK(flat.stat == Catch::Approx(0.0).margin(1e-12));
    CHECK(flat.dof == 3);
    CHECK(flat.p_value == Catch::Approx(1.0).epsilon(1e-12));

    const auto spike = stats::chi_square_uniform({1000, 0, 0, 0});
    CHECK(spike.p_value < 1e-6);

    CHECK_THROWS_AS(stats::chi_square_uniform({5}), domain_error);
    CHECK_THROWS_AS(stats::chi_square_uniform({0, 0}), domain_error);
}

TEST_CASE("two-sample test is scale invariant", "[stats]") {
    const auto same = stats::chi_square_two_sample({50, 50, 50}, {50, 50, 50});
    CHECK(same.stat == Catch::Approx(0.0).margin(1e-12));
    CHECK(same.p_value == Catch::Approx(1.0).epsilon(1e-12));

    const auto scaled = stats::chi_square_two_sample({200, 100}, {100, 50});
    CHECK(scaled.stat == Catch::Approx(0.0).margin(1e-12));

    const auto disjoint = stats::chi_square_two_sample({100, 0}, {0, 100});
    CHECK(disjoint.p_value < 1e-6);

    CHECK_THROWS_AS(stats::chi_square_two_sample({1, 2}, {1, 2, 3}), domain_error);
    CHECK_THROWS_AS(stats::chi_square_two_sample({0, 0}, {1, 2}), domain_error);
}

TEST_CASE("monobit frequency check", "[stats]") {
    CHECK(stats::monobit_ok(5000, 10000));
    CHECK(stats::monobit_ok(5299, 10000));   // 0.0299 < 3/sqrt(10000)
    CHECK_FALSE(stats::monobit_ok(5305, 10000));
    CHECK_FALSE(stats::monobit_ok(0, 10000));
    CHECK_FALSE(stats::monobit_ok(0, 0));
}
