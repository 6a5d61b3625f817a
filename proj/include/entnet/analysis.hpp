#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "entnet/errors.hpp"
#include "entnet/network.hpp"
#include "entnet/util.hpp"

// Estimators on coincidence counts: correlation values, fringe visibility,
// the two-basis fidelity bound and the CHSH statistic, plus the CSV formats
// the command line tools exchange.
namespace entnet::analysis {

// Reals in CSV output carry six significant digits.
inline std::string fmt_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Correlation
// ---------------------------------------------------------------------------

// E from a 2x2 outcome-bit count cell; bit 0 encodes value +1 on both sides.
inline double correlation_from_counts(const net::CountTable::Counts& c) {
    const double n_pp = static_cast<double>(c[0][0]);
    const double n_pm = static_cast<double>(c[0][1]);
    const double n_mp = static_cast<double>(c[1][0]);
    const double n_mm = static_cast<double>(c[1][1]);
    const double total = n_pp + n_pm + n_mp + n_mm;
    if (total == 0) throw undefined_estimate_error("correlation of empty cell");
    return (n_pp + n_mm - n_pm - n_mp) / total;
}

// ---------------------------------------------------------------------------
// Fringe visibility
// ---------------------------------------------------------------------------

struct FringePoint {
    double theta_b_deg = 0.0;
    std::uint64_t count = 0;
};

// Coincidence fringe: counts of the (+,+) outcome per swept angle.
inline std::vector<FringePoint> fringe_points(const net::CountTable& table) {
    std::map<double, std::uint64_t> by_angle;
    for (const auto& [key, c] : table.cells) by_angle[key.second] += c[0][0];
    std::vector<FringePoint> out;
    out.reserve(by_angle.size());
    for (const auto& [angle, count] : by_angle) out.push_back({angle, count});
    return out;
}

struct FringeFit {
    double a0 = 0.0;  // offset
    double a1 = 0.0;  // cos(2 theta) amplitude
    double a2 = 0.0;  // sin(2 theta) amplitude
    double visibility = 0.0;
    double phase_rad = 0.0;  // fringe maximum at theta = phase/2
    double rms_residual = 0.0;
};

// Least squares fit of N(theta) = a0 + a1 cos 2theta + a2 sin 2theta. The
// model is linear in its coefficients, so the normal equations give the
// global optimum directly.
inline FringeFit fit_fringe(const std::vector<FringePoint>& points) {
    std::map<double, bool> distinct;
    for (const auto& p : points) distinct[std::fmod(p.theta_b_deg, 180.0)] = true;
    if (distinct.size() < 3)
        throw fit_failure_error("fringe fit needs at least 3 distinct angles, got " +
                                std::to_string(distinct.size()));

    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd design(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = deg_to_rad(points[static_cast<std::size_t>(i)].theta_b_deg);
        design(i, 0) = 1.0;
        design(i, 1) = std::cos(2 * t);
        design(i, 2) = std::sin(2 * t);
        y(i) = static_cast<double>(points[static_cast<std::size_t>(i)].count);
    }
    const Eigen::Vector3d a = design.colPivHouseholderQr().solve(y);

    FringeFit fit;
    fit.a0 = a(0);
    fit.a1 = a(1);
    fit.a2 = a(2);
    if (!(fit.a0 > 0.0)) throw fit_failure_error("fringe fit offset is not positive");
    fit.visibility = std::sqrt(fit.a1 * fit.a1 + fit.a2 * fit.a2) / fit.a0;
    fit.phase_rad = std::atan2(fit.a2, fit.a1);
    fit.rms_residual = std::sqrt((design * a - y).squaredNorm() / static_cast<double>(n));
    return fit;
}

// Model-free contrast estimate, best paired with fine sweeps; the fitted
// visibility is the one quoted in reports.
inline double visibility_raw(const std::vector<FringePoint>& points) {
    if (points.empty()) throw undefined_estimate_error("visibility of empty scan");
    std::uint64_t lo = points.front().count, hi = points.front().count;
    for (const auto& p : points) {
        lo = std::min(lo, p.count);
        hi = std::max(hi, p.count);
    }
    if (hi + lo == 0) throw undefined_estimate_error("visibility of all-zero scan");
    return static_cast<double>(hi - lo) / static_cast<double>(hi + lo);
}

// Entanglement fidelity lower bound from the fringe visibilities in the
// rectilinear (analyzer at 0 deg) and diagonal (45 deg) bases.
inline double fidelity_bound(double visibility_z, double visibility_x) {
    if (visibility_z < 0 || visibility_x < 0)
        throw domain_error("fidelity bound wants nonnegative visibilities");
    return (visibility_z + visibility_x) / 2.0;
}

// ---------------------------------------------------------------------------
// CHSH
// ---------------------------------------------------------------------------

struct ChshEstimate {
    double s = 0.0;
    double std_dev = 0.0;
    std::array<double, 4> e{};  // per-setting correlations, standard order
    std::uint64_t total = 0;

    bool violates() const { return s - 2.0 * std_dev > 2.0; }
};

inline std::array<std::pair<double, double>, 4> standard_chsh_pairs_deg() {
    return {{{0.0, 22.5}, {45.0, 22.5}, {45.0, 67.5}, {0.0, 67.5}}};
}

// S from the four standard setting pairs, the last entering with a minus
// sign. The spread is a Poisson bootstrap over all sixteen cell counts.
inline ChshEstimate chsh_estimate(const net::CountTable& table, std::uint64_t seed,
                                  int resamples = 1000) {
    if (resamples < 2) throw domain_error("chsh_estimate: resamples must be >= 2");
    const auto pairs = standard_chsh_pairs_deg();
    std::array<net::CountTable::Counts, 4> cells{};
    for (std::size_t k = 0; k < 4; ++k) {
        const auto it = table.cells.find({pairs[k].first, pairs[k].second});
        if (it == table.cells.end())
            throw incomplete_data_error("no counts at theta_a=" + fmt_real(pairs[k].first) +
                                        " theta_b=" + fmt_real(pairs[k].second));
        cells[k] = it->second;
    }

    const auto s_of = [](const std::array<net::CountTable::Counts, 4>& c,
                         std::array<double, 4>* e_out) {
        double s = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
            const double e = correlation_from_counts(c[k]);
            if (e_out) (*e_out)[k] = e;
            s += (k == 3) ? -e : e;
        }
        return s;
    };

    ChshEstimate est;
    est.s = s_of(cells, &est.e);
    for (const auto& c : cells) est.total += c[0][0] + c[0][1] + c[1][0] + c[1][1];

    std::mt19937_64 rng(seed);
    double sum = 0.0, sum_sq = 0.0;
    int used = 0;
    for (int r = 0; r < resamples; ++r) {
        std::array<net::CountTable::Counts, 4> drawn{};
        for (std::size_t k = 0; k < 4; ++k)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    const auto n = cells[k][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                    if (n == 0) continue;
                    std::poisson_distribution<std::uint64_t> pois(static_cast<double>(n));
                    drawn[k][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = pois(rng);
                }
        try {
            const double s = s_of(drawn, nullptr);
            sum += s;
            sum_sq += s * s;
            ++used;
        } catch (const undefined_estimate_error&) {
            // a resample emptied one cell; drop it
        }
    }
    if (used < 2) throw undefined_estimate_error("chsh bootstrap produced too few resamples");
    const double mean = sum / used;
    const double var = std::max(0.0, (sum_sq - used * mean * mean) / (used - 1));
    est.std_dev = std::sqrt(var);
    return est;
}

// ---------------------------------------------------------------------------
// CSV formats
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

inline double field_double(const std::vector<std::string>& f, std::size_t i,
                           const std::string& what) {
    try {
        return std::stod(f.at(i));
    } catch (const std::exception&) {
        throw io_error(what + ": bad numeric field");
    }
}

inline std::uint64_t field_u64(const std::vector<std::string>& f, std::size_t i,
                               const std::string& what) {
    try {
        return std::stoull(f.at(i));
    } catch (const std::exception&) {
        throw io_error(what + ": bad count field");
    }
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open '" + path + "'");
    return in;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write '" + path + "'");
    return out;
}

}  // namespace detail

inline void write_fringe_csv(std::ostream& out, const std::vector<FringePoint>& points) {
    out << "theta_b_deg,count\n";
    for (const auto& p : points) out << fmt_real(p.theta_b_deg) << "," << p.count << "\n";
}

inline void write_fringe_csv(const std::string& path, const std::vector<FringePoint>& points) {
    auto out = detail::open_out(path);
    write_fringe_csv(out, points);
    if (!out) throw io_error("write failed for '" + path + "'");
}

inline std::vector<FringePoint> read_fringe_csv(std::istream& in, const std::string& what) {
    std::string line;
    if (!std::getline(in, line) || trim_eol(line) != "theta_b_deg,count")
        throw io_error(what + ": expected header theta_b_deg,count");
    std::vector<FringePoint> points;
    while (std::getline(in, line)) {
        if (trim_eol(line).empty()) continue;
        const auto f = detail::split_csv_line(trim_eol(line));
        if (f.size() != 2) throw io_error(what + ": expected 2 fields per row");
        points.push_back({detail::field_double(f, 0, what), detail::field_u64(f, 1, what)});
    }
    return points;
}

inline std::vector<FringePoint> read_fringe_csv(const std::string& path) {
    auto in = detail::open_in(path);
    return read_fringe_csv(in, path);
}

inline void write_correlation_csv(std::ostream& out, const net::CountTable& table) {
    out << "theta_a_deg,theta_b_deg,n_pp,n_pm,n_mp,n_mm\n";
    for (const auto& [key, c] : table.cells)
        out << fmt_real(key.first) << "," << fmt_real(key.second) << "," << c[0][0] << ","
            << c[0][1] << "," << c[1][0] << "," << c[1][1] << "\n";
}

inline void write_correlation_csv(const std::string& path, const net::CountTable& table) {
    auto out = detail::open_out(path);
    write_correlation_csv(out, table);
    if (!out) throw io_error("write failed for '" + path + "'");
}

inline net::CountTable read_correlation_csv(std::istream& in, const std::string& what) {
    std::string line;
    if (!std::getline(in, line) ||
        trim_eol(line) != "theta_a_deg,theta_b_deg,n_pp,n_pm,n_mp,n_mm")
        throw io_error(what + ": expected correlation CSV header");
    net::CountTable table;
    while (std::getline(in, line)) {
        if (trim_eol(line).empty()) continue;
        const auto f = detail::split_csv_line(trim_eol(line));
        if (f.size() != 6) throw io_error(what + ": expected 6 fields per row");
        const std::pair<double, double> key{detail::field_double(f, 0, what),
                                            detail::field_double(f, 1, what)};
        auto& c = table.cells[key];
        c[0][0] += detail::field_u64(f, 2, what);
        c[0][1] += detail::field_u64(f, 3, what);
        c[1][0] += detail::field_u64(f, 4, what);
        c[1][1] += detail::field_u64(f, 5, what);
    }
    return table;
}

inline net::CountTable read_correlation_csv(const std::string& path) {
    auto in = detail::open_in(path);
    return read_correlation_csv(in, path);
}

}  // namespace entnet::analysis
