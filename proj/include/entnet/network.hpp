#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "entnet/errors.hpp"
#include "entnet/quantum.hpp"
#include "entnet/util.hpp"

// Discrete-slot simulation of the shared pair source, the lossy fiber
// spans, the 1x8 routing switches and the end-user detection stations.
// One slot per pump pulse; a coincidence is both detectors firing in the
// same slot.
namespace entnet::net {

enum class Side { A, B };

inline char side_letter(Side s) { return s == Side::A ? 'A' : 'B'; }

struct EndUser {
    Side side = Side::A;
    int port = 1;  // 1-based switch output port

    std::string name() const { return std::string(1, side_letter(side)) + std::to_string(port); }
    bool operator==(const EndUser&) const = default;
};

// Parse "A3" / "b12" style user names.
inline EndUser parse_end_user(const std::string& text) {
    if (text.size() < 2 || (text[0] != 'A' && text[0] != 'a' && text[0] != 'B' && text[0] != 'b'))
        throw usage_error("bad end user '" + text + "', expected e.g. A1 or B4");
    EndUser u;
    u.side = (text[0] == 'A' || text[0] == 'a') ? Side::A : Side::B;
    try {
        u.port = std::stoi(text.substr(1));
    } catch (const std::exception&) {
        throw usage_error("bad end user port in '" + text + "'");
    }
    return u;
}

// Residual polarization rotation of one fiber path, as successive rotations
// about the X, Y and Z axes (each angle t applies exp(-i t sigma)).
struct RotationAngles {
    double x_deg = 0.0;
    double y_deg = 0.0;
    double z_deg = 0.0;

    quantum::LocalUnitary unitary() const {
        using Eigen::Matrix2cd;
        using std::complex;
        const double x = deg_to_rad(x_deg), y = deg_to_rad(y_deg), z = deg_to_rad(z_deg);
        Matrix2cd rx, ry, rz;
        rx << complex<double>(std::cos(x), 0), complex<double>(0, -std::sin(x)),
            complex<double>(0, -std::sin(x)), complex<double>(std::cos(x), 0);
        ry << complex<double>(std::cos(y), 0), complex<double>(-std::sin(y), 0),
            complex<double>(std::sin(y), 0), complex<double>(std::cos(y), 0);
        rz << std::exp(complex<double>(0, -z)), complex<double>(0, 0), complex<double>(0, 0),
            std::exp(complex<double>(0, z));
        quantum::LocalUnitary u;
        u.m = rz * ry * rx;
        return u;
    }
};

enum class ResidualDefault {
    pattern,  // built-in per-port compensation error pattern
    none,     // identity on every path
};

struct NetworkConfig {
    double fiber_length_km_a = 10.0;
    double fiber_length_km_b = 10.0;
    double attenuation_db_per_km = 0.2;
    double switch_insertion_loss_db = 1.0;
    int ports_per_side = 8;
    double pulse_rate_hz = 76e6;
    double pair_gen_prob_per_pulse = 0.01;
    double source_fidelity = 0.9512;
    double source_phase_deg = 180.0;
    double detector_efficiency = 1.0;
    double dark_count_prob_per_slot = 0.0;
    ResidualDefault residual_default = ResidualDefault::pattern;
    std::map<std::pair<char, int>, RotationAngles> residual_overrides;

    void validate() const {
        if (fiber_length_km_a < 0 || fiber_length_km_b < 0)
            throw domain_error("config: fiber length must be >= 0");
        if (attenuation_db_per_km < 0) throw domain_error("config: attenuation must be >= 0");
        if (switch_insertion_loss_db < 0) throw domain_error("config: switch loss must be >= 0");
        if (ports_per_side < 1) throw domain_error("config: ports_per_side must be >= 1");
        if (pulse_rate_hz <= 0) throw domain_error("config: pulse rate must be > 0");
        if (pair_gen_prob_per_pulse < 0 || pair_gen_prob_per_pulse > 1)
            throw domain_error("config: pair_gen_prob_per_pulse outside [0,1]");
        if (source_fidelity < 0.25 || source_fidelity > 1)
            throw domain_error("config: source_fidelity outside [0.25,1]");
        if (detector_efficiency < 0 || detector_efficiency > 1)
            throw domain_error("config: detector_efficiency outside [0,1]");
        if (dark_count_prob_per_slot < 0 || dark_count_prob_per_slot > 1)
            throw domain_error("config: dark_count_prob_per_slot outside [0,1]");
        if (!std::isfinite(source_phase_deg)) throw domain_error("config: bad source phase");
    }

    bool user_valid(const EndUser& u) const { return u.port >= 1 && u.port <= ports_per_side; }

    // Imperfect fiber compensation left after the polarization controllers.
    // The pattern tilts each path slightly, a little differently per port,
    // so pairwise fidelity bounds land a few percent under the source value.
    RotationAngles residual_angles(Side side, int port) const {
        auto it = residual_overrides.find({side_letter(side), port});
        if (it != residual_overrides.end()) return it->second;
        if (residual_default == ResidualDefault::none) return {};
        const double k = static_cast<double>(port - 1);
        if (side == Side::A) return {4.0, 2.0 + 0.2 * k, 2.0 + 0.15 * k};
        return {4.0, -(2.0 + 0.25 * k), -(2.0 + 0.3 * k)};
    }

    quantum::LocalUnitary residual_unitary(Side side, int port) const {
        return residual_angles(side, port).unitary();
    }
};

// One-way survival probability: fiber attenuation, one switch pass, and the
// detector efficiency folded in.
inline double transmittance(const NetworkConfig& cfg, Side side) {
    const double length = side == Side::A ? cfg.fiber_length_km_a : cfg.fiber_length_km_b;
    const double loss_db = length * cfg.attenuation_db_per_km + cfg.switch_insertion_loss_db;
    return std::pow(10.0, -loss_db / 10.0) * cfg.detector_efficiency;
}

struct RoutingSchedule {
    struct Entry {
        std::uint64_t slot_start = 0;
        std::uint64_t slot_end = 0;  // inclusive
        EndUser user_a;
        EndUser user_b;
    };
    std::vector<Entry> entries;

    void validate(const NetworkConfig& cfg) const {
        for (const auto& e : entries) {
            if (e.slot_start > e.slot_end)
                throw domain_error("schedule: slot_start > slot_end");
            if (e.user_a.side != Side::A || e.user_b.side != Side::B)
                throw domain_error("schedule: pair sides must be (A, B)");
            if (!cfg.user_valid(e.user_a) || !cfg.user_valid(e.user_b))
                throw domain_error("schedule: port out of range");
        }
        for (std::size_t i = 0; i < entries.size(); ++i)
            for (std::size_t j = i + 1; j < entries.size(); ++j)
                if (entries[i].slot_start <= entries[j].slot_end &&
                    entries[j].slot_start <= entries[i].slot_end)
                    throw domain_error("schedule: overlapping entries");
    }

    static RoutingSchedule single(const EndUser& a, const EndUser& b, std::uint64_t n_slots) {
        RoutingSchedule s;
        s.entries.push_back({0, n_slots == 0 ? 0 : n_slots - 1, a, b});
        return s;
    }
};

inline std::optional<std::pair<EndUser, EndUser>> route(const RoutingSchedule& schedule,
                                                        std::uint64_t slot) {
    for (const auto& e : schedule.entries)
        if (slot >= e.slot_start && slot <= e.slot_end) return std::make_pair(e.user_a, e.user_b);
    return std::nullopt;
}

// State delivered to a routed pair: source noise then per-path residuals.
inline quantum::PairState channel_state(const NetworkConfig& cfg,
                                        const std::pair<EndUser, EndUser>& pair) {
    const auto ideal = quantum::ideal_pair_state(deg_to_rad(cfg.source_phase_deg));
    const auto noisy = quantum::werner_mix(ideal, cfg.source_fidelity);
    return quantum::apply_local(noisy, cfg.residual_unitary(Side::A, pair.first.port),
                                cfg.residual_unitary(Side::B, pair.second.port));
}

// ---------------------------------------------------------------------------
// Measurement setting policies
// ---------------------------------------------------------------------------

// Fringe scan: one analyzer fixed at 0 deg (Z) or 45 deg (X), the other
// stepped through a list of angles, equal slot shares each.
struct FringePolicy {
    char basis = 'z';                 // 'z' or 'x'
    std::vector<double> theta_b_deg;  // swept analyzer angles

    double theta_a_deg() const { return basis == 'z' ? 0.0 : 45.0; }

    static std::vector<double> default_sweep() {
        std::vector<double> v;
        for (int d = 0; d <= 180; d += 15) v.push_back(static_cast<double>(d));
        return v;
    }
};

// Random settings per slot: theta_a in {0, 22.5, 45}, theta_b in
// {22.5, 45, 67.5} degrees, uniform and independent.
struct E91Policy {
    static constexpr std::array<double, 3> alice_angles{0.0, 22.5, 45.0};
    static constexpr std::array<double, 3> bob_angles{22.5, 45.0, 67.5};
};

using SettingPolicy = std::variant<FringePolicy, E91Policy>;

struct CoincidenceRecord {
    std::uint64_t slot = 0;
    EndUser user_a;
    EndUser user_b;
    double theta_a_deg = 0.0;
    double theta_b_deg = 0.0;
    std::uint8_t outcome_a = 0;  // 0 encodes value +1, 1 encodes value -1
    std::uint8_t outcome_b = 0;
};

// Aggregated counts per analyzer angle pair, indexed by outcome bits.
struct CountTable {
    using Counts = std::array<std::array<std::uint64_t, 2>, 2>;
    std::map<std::pair<double, double>, Counts> cells;

    void add(double theta_a_deg, double theta_b_deg, int bit_a, int bit_b) {
        auto& c = cells[{theta_a_deg, theta_b_deg}];
        ++c[static_cast<std::size_t>(bit_a)][static_cast<std::size_t>(bit_b)];
    }
    void add(const CoincidenceRecord& r) {
        add(r.theta_a_deg, r.theta_b_deg, r.outcome_a, r.outcome_b);
    }
    std::uint64_t total() const {
        std::uint64_t n = 0;
        for (const auto& [k, c] : cells) n += c[0][0] + c[0][1] + c[1][0] + c[1][1];
        return n;
    }
    static CountTable from_records(const std::vector<CoincidenceRecord>& records) {
        CountTable t;
        for (const auto& r : records) t.add(r);
        return t;
    }
};

struct LossStats {
    std::uint64_t slots_total = 0;
    std::uint64_t slots_scheduled = 0;
    std::uint64_t pairs_generated = 0;
    std::uint64_t arrived_a = 0;
    std::uint64_t arrived_b = 0;
    std::uint64_t coincidences = 0;       // both photons detected
    std::uint64_t dark_involved = 0;      // records with at least one dark click
    std::uint64_t records = 0;
};

struct RunResult {
    std::vector<CoincidenceRecord> records;
    LossStats stats;
};

namespace detail {

struct AngleChooser {
    const SettingPolicy& policy;
    std::uint64_t n_slots;
    std::mt19937_64& rng;

    std::pair<double, double> operator()(std::uint64_t slot) {
        if (const auto* f = std::get_if<FringePolicy>(&policy)) {
            if (f->theta_b_deg.empty())
                throw domain_error("fringe policy: empty angle list");
            const std::uint64_t n = f->theta_b_deg.size();
            std::uint64_t idx = n_slots == 0 ? 0 : slot * n / n_slots;
            if (idx >= n) idx = n - 1;
            return {f->theta_a_deg(), f->theta_b_deg[static_cast<std::size_t>(idx)]};
        }
        const auto& e91 = std::get<E91Policy>(policy);
        std::uniform_int_distribution<int> pick(0, 2);
        const double ta = e91.alice_angles[static_cast<std::size_t>(pick(rng))];
        const double tb = e91.bob_angles[static_cast<std::size_t>(pick(rng))];
        return {ta, tb};
    }
};

// Joint outcome sampler with a per-angle-pair cumulative table.
class BornSampler {
public:
    BornSampler(const NetworkConfig& cfg, const std::pair<EndUser, EndUser>& pair)
        : state_(channel_state(cfg, pair)) {}

    std::pair<int, int> sample(double ta_deg, double tb_deg, double u) {
        const auto key = std::make_pair(ta_deg, tb_deg);
        auto it = cdf_.find(key);
        if (it == cdf_.end()) {
            const auto d =
                quantum::born_probabilities(state_, deg_to_rad(ta_deg), deg_to_rad(tb_deg));
            std::array<double, 4> cdf{};
            double acc = 0.0;
            for (int i = 0; i < 4; ++i) {
                acc += d.p[static_cast<std::size_t>(i)];
                cdf[static_cast<std::size_t>(i)] = acc;
            }
            cdf[3] = 1.0;  // close the table against rounding
            it = cdf_.emplace(key, cdf).first;
        }
        const auto& cdf = it->second;
        int idx = 0;
        while (idx < 3 && u >= cdf[static_cast<std::size_t>(idx)]) ++idx;
        return {idx >> 1, idx & 1};  // ports (pa, pb)
    }

private:
    quantum::PairState state_;
    std::map<std::pair<double, double>, std::array<double, 4>> cdf_;
};

}  // namespace detail

// Monte Carlo slot engine. Deterministic for a fixed argument tuple.
inline RunResult run_slots(const NetworkConfig& cfg, const RoutingSchedule& schedule,
                           const SettingPolicy& policy, std::uint64_t n_slots,
                           std::uint64_t seed) {
    if (n_slots < 1) throw domain_error("run_slots: n_slots must be >= 1");
    cfg.validate();
    schedule.validate(cfg);

    RunResult out;
    out.stats.slots_total = n_slots;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    detail::AngleChooser angles{policy, n_slots, rng};

    const double t_a = transmittance(cfg, Side::A);
    const double t_b = transmittance(cfg, Side::B);
    const double p_pair = cfg.pair_gen_prob_per_pulse;
    const double p_dark = cfg.dark_count_prob_per_slot;

    std::map<std::pair<int, int>, detail::BornSampler> samplers;

    for (const auto& entry : schedule.entries) {
        if (entry.slot_start >= n_slots) continue;
        const std::uint64_t last = std::min<std::uint64_t>(entry.slot_end, n_slots - 1);
        out.stats.slots_scheduled += last - entry.slot_start + 1;

        auto& sampler = samplers
                            .try_emplace(std::make_pair(entry.user_a.port, entry.user_b.port),
                                         cfg, std::make_pair(entry.user_a, entry.user_b))
                            .first->second;

        const auto emit = [&](std::uint64_t slot, double ta, double tb, int bit_a, int bit_b,
                              bool dark) {
            CoincidenceRecord r;
            r.slot = slot;
            r.user_a = entry.user_a;
            r.user_b = entry.user_b;
            r.theta_a_deg = ta;
            r.theta_b_deg = tb;
            r.outcome_a = static_cast<std::uint8_t>(bit_a);
            r.outcome_b = static_cast<std::uint8_t>(bit_b);
            out.records.push_back(r);
            ++out.stats.records;
            if (dark) ++out.stats.dark_involved;
        };

        if (p_dark <= 0.0) {
            // Dark counts off: only slots that generate a pair can matter,
            // so hop between generated pairs geometrically.
            std::uint64_t slot = entry.slot_start;
            if (p_pair <= 0.0) continue;
            std::geometric_distribution<std::uint64_t> gap(p_pair);
            while (true) {
                if (p_pair < 1.0) {
                    const std::uint64_t skip = gap(rng);
                    if (skip > last || slot > last - skip) break;
                    slot += skip;
                }
                if (slot > last) break;
                ++out.stats.pairs_generated;
                const bool got_a = uni(rng) < t_a;
                const bool got_b = uni(rng) < t_b;
                if (got_a) ++out.stats.arrived_a;
                if (got_b) ++out.stats.arrived_b;
                if (got_a && got_b) {
                    ++out.stats.coincidences;
                    const auto [ta, tb] = angles(slot);
                    const auto [pa, pb] = sampler.sample(ta, tb, uni(rng));
                    emit(slot, ta, tb, quantum::alice_bit(pa), quantum::bob_bit(pb), false);
                }
                if (slot == last) break;
                ++slot;
            }
        } else {
            // Dark counts on: every scheduled slot can produce a detection.
            for (std::uint64_t slot = entry.slot_start; slot <= last; ++slot) {
                bool photon_a = false, photon_b = false;
                if (p_pair > 0.0 && uni(rng) < p_pair) {
                    ++out.stats.pairs_generated;
                    photon_a = uni(rng) < t_a;
                    photon_b = uni(rng) < t_b;
                    if (photon_a) ++out.stats.arrived_a;
                    if (photon_b) ++out.stats.arrived_b;
                }
                const bool dark_a = !photon_a && uni(rng) < p_dark;
                const bool dark_b = !photon_b && uni(rng) < p_dark;
                if (!(photon_a || dark_a) || !(photon_b || dark_b)) continue;

                const auto [ta, tb] = angles(slot);
                int bit_a, bit_b;
                if (photon_a && photon_b) {
                    ++out.stats.coincidences;
                    const auto [pa, pb] = sampler.sample(ta, tb, uni(rng));
                    bit_a = quantum::alice_bit(pa);
                    bit_b = quantum::bob_bit(pb);
                } else if (photon_a || photon_b) {
                    // One real photon: its outcome is the joint sample's
                    // marginal on that side; the dark side is a coin flip.
                    const auto [pa, pb] = sampler.sample(ta, tb, uni(rng));
                    if (photon_a) {
                        bit_a = quantum::alice_bit(pa);
                        bit_b = static_cast<int>(rng() & 1);
                    } else {
                        bit_b = quantum::bob_bit(pb);
                        bit_a = static_cast<int>(rng() & 1);
                    }
                } else {
                    bit_a = static_cast<int>(rng() & 1);
                    bit_b = static_cast<int>(rng() & 1);
                }
                emit(slot, ta, tb, bit_a, bit_b, dark_a || dark_b);
            }
        }
    }
    return out;
}

}  // namespace entnet::net
