#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>

#include "entnet/errors.hpp"
#include "entnet/util.hpp"

// Exact two-qubit polarization algebra. Basis order is (HH, HV, VH, VV)
// with H = 0 and V = 1, so a joint port pair (pa, pb) indexes entry 2*pa+pb.
namespace entnet::quantum {

using complexd = std::complex<double>;

inline constexpr double kAlgebraTol = 1e-12;
inline constexpr double kEigenvalueTol = 1e-10;

// Outcome sign convention. Alice reads +1 at her H port and -1 at V;
// Bob reads -1 at H and +1 at V. For the singlet source this makes
// matched-basis outcomes agree and the CHSH combination come out positive.
inline constexpr int alice_value(int port) { return port == 0 ? +1 : -1; }
inline constexpr int bob_value(int port) { return port == 0 ? -1 : +1; }

// Outcome bit stored in records: 0 encodes value +1, 1 encodes value -1.
inline constexpr int alice_bit(int port) { return alice_value(port) > 0 ? 0 : 1; }
inline constexpr int bob_bit(int port) { return bob_value(port) > 0 ? 0 : 1; }

struct LocalUnitary {
    Eigen::Matrix2cd m = Eigen::Matrix2cd::Identity();

    bool is_unitary(double tol = kAlgebraTol) const {
        return ((m * m.adjoint()) - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff() <= tol;
    }
    static LocalUnitary identity() { return {}; }
};

struct PairState {
    Eigen::Matrix4cd m = Eigen::Matrix4cd::Zero();

    double trace_error() const { return std::abs(m.trace() - complexd(1.0, 0.0)); }
    double hermiticity_error() const { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }
    double min_eigenvalue() const {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> solver(m, Eigen::EigenvaluesOnly);
        return solver.eigenvalues().minCoeff();
    }
    double purity() const { return (m * m).trace().real(); }

    bool is_valid(double tol = kAlgebraTol, double eig_tol = kEigenvalueTol) const {
        return hermiticity_error() <= tol && trace_error() <= tol &&
               min_eigenvalue() >= -eig_tol;
    }
    bool is_pure(double tol = kEigenvalueTol) const { return std::abs(purity() - 1.0) <= tol; }
};

// |Psi(phi)> = (|HV> + e^{i phi} |VH>) / sqrt(2). phi = pi gives the singlet.
inline PairState ideal_pair_state(double phi) {
    if (!std::isfinite(phi)) throw domain_error("ideal_pair_state: phi must be finite");
    Eigen::Vector4cd psi = Eigen::Vector4cd::Zero();
    psi(1) = complexd(1.0 / std::sqrt(2.0), 0.0);
    psi(2) = std::exp(complexd(0.0, phi)) / std::sqrt(2.0);
    PairState s;
    s.m = psi * psi.adjoint();
    return s;
}

// Isotropic (Werner) mixing calibrated so the result has exactly the
// requested fidelity with the pure target: rho = p*target + (1-p)*I/4
// with p = (4F - 1) / 3.
inline PairState werner_mix(const PairState& target, double fidelity_goal) {
    if (!(fidelity_goal >= 0.25 && fidelity_goal <= 1.0))
        throw domain_error("werner_mix: fidelity goal outside [0.25, 1]");
    if (!target.is_pure())
        throw domain_error("werner_mix: target state is not pure");
    const double p = (4.0 * fidelity_goal - 1.0) / 3.0;
    PairState s;
    s.m = p * target.m + (1.0 - p) * 0.25 * Eigen::Matrix4cd::Identity();
    return s;
}

// EOM polarization rotation: |H> -> cos t |H> - i sin t |V>,
// |V> -> -i sin t |H> + cos t |V>.
inline LocalUnitary eom_unitary(double theta) {
    if (!std::isfinite(theta)) throw domain_error("eom_unitary: theta must be finite");
    LocalUnitary u;
    const complexd c(std::cos(theta), 0.0);
    const complexd s(0.0, -std::sin(theta));
    u.m << c, s, s, c;
    return u;
}

inline Eigen::Matrix4cd kron(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
    Eigen::Matrix4cd out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return out;
}

inline PairState apply_local(const PairState& state, const LocalUnitary& ua,
                             const LocalUnitary& ub) {
    const Eigen::Matrix4cd u = kron(ua.m, ub.m);
    PairState s;
    s.m = u * state.m * u.adjoint();
    return s;
}

// Joint detection probabilities indexed by PBS output ports (pa, pb).
struct OutcomeDistribution {
    std::array<double, 4> p{};  // index 2*pa + pb, ports H = 0, V = 1

    double prob(int port_a, int port_b) const { return p[static_cast<std::size_t>(2 * port_a + port_b)]; }
    double sum() const { return p[0] + p[1] + p[2] + p[3]; }
};

// Born rule through EOM rotations theta_a, theta_b followed by PBS detection.
inline OutcomeDistribution born_probabilities(const PairState& state, double theta_a,
                                              double theta_b) {
    const PairState rotated = apply_local(state, eom_unitary(theta_a), eom_unitary(theta_b));
    OutcomeDistribution d;
    for (int i = 0; i < 4; ++i) {
        double v = rotated.m(i, i).real();
        if (v < 0.0 && v > -kEigenvalueTol) v = 0.0;  // scrub eigenvalue-level noise
        d.p[static_cast<std::size_t>(i)] = v;
    }
    return d;
}

// Correlation under the sign convention above.
inline double correlation_value(const OutcomeDistribution& d) {
    double e = 0.0;
    for (int pa = 0; pa < 2; ++pa)
        for (int pb = 0; pb < 2; ++pb)
            e += alice_value(pa) * bob_value(pb) * d.prob(pa, pb);
    return e;
}

// Port-symmetric correlation p_HH + p_VV - p_HV - p_VH, kept for cross checks.
inline double correlation_raw(const OutcomeDistribution& d) {
    return d.prob(0, 0) + d.prob(1, 1) - d.prob(0, 1) - d.prob(1, 0);
}

// <Psi| rho |Psi> for a pure target.
inline double fidelity(const PairState& state, const PairState& target) {
    if (!target.is_pure()) throw domain_error("fidelity: target state is not pure");
    return (target.m * state.m).trace().real();
}

struct AnglePair {
    double theta_a;  // radians
    double theta_b;
};

// S = E(a1,b1) + E(a2,b1) + E(a2,b2) - E(a1,b2).
inline double chsh_analytic(const PairState& state, const std::array<AnglePair, 4>& angles) {
    const auto e = [&](const AnglePair& ap) {
        return correlation_value(born_probabilities(state, ap.theta_a, ap.theta_b));
    };
    return e(angles[0]) + e(angles[1]) + e(angles[2]) - e(angles[3]);
}

// The measurement settings used throughout: a = (0, 45) deg, b = (22.5, 67.5) deg,
// ordered (a1,b1), (a2,b1), (a2,b2), (a1,b2).
inline std::array<AnglePair, 4> standard_chsh_angles() {
    const double a1 = 0.0, a2 = deg_to_rad(45.0);
    const double b1 = deg_to_rad(22.5), b2 = deg_to_rad(67.5);
    return {AnglePair{a1, b1}, AnglePair{a2, b1}, AnglePair{a2, b2}, AnglePair{a1, b2}};
}

inline double chsh_analytic(const PairState& state) {
    return chsh_analytic(state, standard_chsh_angles());
}

}  // namespace entnet::quantum
