#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "entnet/errors.hpp"

namespace entnet::stats {

// Binary entropy in bits. h2(0) = h2(1) = 0 by continuity.
inline double binary_entropy(double g) {
    if (g < 0.0 || g > 1.0) throw domain_error("binary_entropy: argument outside [0,1]");
    if (g == 0.0 || g == 1.0) return 0.0;
    return -g * std::log2(g) - (1.0 - g) * std::log2(1.0 - g);
}

namespace detail {

// Regularized lower incomplete gamma P(a,x) by series expansion.
inline double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < 1000; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a,x) by Lentz continued fraction.
inline double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 1000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

// Upper tail Q(a,x) = Gamma(a,x)/Gamma(a).
inline double gamma_q(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw domain_error("gamma_q: bad arguments");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_cf(a, x);
}

// P[chi2_dof >= stat]. Underflows cleanly to 0 for enormous statistics.
inline double chi_square_pvalue(double stat, std::size_t dof) {
    if (stat <= 0.0) return 1.0;
    const double p = gamma_q(0.5 * static_cast<double>(dof), 0.5 * stat);
    return p < 0.0 ? 0.0 : p;
}

struct ChiSquareResult {
    double stat = 0.0;
    std::size_t dof = 0;
    double p_value = 1.0;
};

// Goodness of fit against the uniform distribution over the histogram bins.
inline ChiSquareResult chi_square_uniform(const std::vector<std::uint64_t>& hist) {
    if (hist.size() < 2) throw domain_error("chi_square_uniform: need >= 2 bins");
    std::uint64_t total = 0;
    for (auto c : hist) total += c;
    if (total == 0) throw domain_error("chi_square_uniform: empty histogram");
    const double expected = static_cast<double>(total) / static_cast<double>(hist.size());
    double stat = 0.0;
    for (auto c : hist) {
        const double d = static_cast<double>(c) - expected;
        stat += d * d / expected;
    }
    ChiSquareResult r;
    r.stat = stat;
    r.dof = hist.size() - 1;
    r.p_value = chi_square_pvalue(stat, r.dof);
    return r;
}

// Two-sample chi-square homogeneity test over aligned histograms.
inline ChiSquareResult chi_square_two_sample(const std::vector<std::uint64_t>& h1,
                                             const std::vector<std::uint64_t>& h2) {
    if (h1.size() != h2.size() || h1.size() < 2)
        throw domain_error("chi_square_two_sample: mismatched histograms");
    double n1 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < h1.size(); ++i) {
        n1 += static_cast<double>(h1[i]);
        n2 += static_cast<double>(h2[i]);
    }
    if (n1 == 0.0 || n2 == 0.0) throw domain_error("chi_square_two_sample: empty sample");
    const double k1 = std::sqrt(n2 / n1);
    const double k2 = std::sqrt(n1 / n2);
    double stat = 0.0;
    std::size_t dof = h1.size() - 1;
    for (std::size_t i = 0; i < h1.size(); ++i) {
        const double o1 = static_cast<double>(h1[i]);
        const double o2 = static_cast<double>(h2[i]);
        if (o1 + o2 == 0.0) {
            if (dof > 1) --dof;  // bins empty in both samples carry no information
            continue;
        }
        const double d = k1 * o1 - k2 * o2;
        stat += d * d / (o1 + o2);
    }
    ChiSquareResult r;
    r.stat = stat;
    r.dof = dof;
    r.p_value = chi_square_pvalue(stat, dof);
    return r;
}

// Frequency sanity check used on amplified keys: |ones/m - 1/2| < 3/sqrt(m).
inline bool monobit_ok(std::size_t ones, std::size_t m) {
    if (m == 0) return false;
    const double frac = static_cast<double>(ones) / static_cast<double>(m);
    return std::fabs(frac - 0.5) < 3.0 / std::sqrt(static_cast<double>(m));
}

}  // namespace entnet::stats
