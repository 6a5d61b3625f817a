#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "entnet/analysis.hpp"
#include "entnet/errors.hpp"
#include "entnet/ldpc.hpp"
#include "entnet/network.hpp"
#include "entnet/stats.hpp"
#include "entnet/util.hpp"

// Entanglement-based QKD post-processing: sifting, the CHSH security check,
// QBER estimation on a sacrificed sample, syndrome reconciliation and
// Toeplitz privacy amplification, plus a session driver that runs the whole
// chain against the simulated network.
namespace entnet::qkd {

// ---------------------------------------------------------------------------
// Sifting
// ---------------------------------------------------------------------------

struct SiftResult {
    BitVec alice;
    BitVec bob;
    net::CountTable chsh_counts;  // records at the four CHSH setting pairs
    std::uint64_t records_seen = 0;
};

// Keep coincidences measured in the same basis (22.5 or 45 deg on both
// sides); route the four CHSH setting pairs to the security check.
inline SiftResult sift(const std::vector<net::CoincidenceRecord>& records) {
    SiftResult out;
    const auto chsh_pairs = analysis::standard_chsh_pairs_deg();
    for (const auto& r : records) {
        ++out.records_seen;
        if (r.theta_a_deg == r.theta_b_deg &&
            (r.theta_a_deg == 22.5 || r.theta_a_deg == 45.0)) {
            out.alice.push_back(r.outcome_a != 0);
            out.bob.push_back(r.outcome_b != 0);
            continue;
        }
        for (const auto& p : chsh_pairs)
            if (r.theta_a_deg == p.first && r.theta_b_deg == p.second) {
                out.chsh_counts.add(r);
                break;
            }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Security check and QBER estimate
// ---------------------------------------------------------------------------

// Demand a CHSH violation by more than two bootstrap deviations.
inline analysis::ChshEstimate chsh_security_check(const net::CountTable& chsh_counts,
                                                  std::uint64_t seed, int resamples = 1000) {
    const auto est = analysis::chsh_estimate(chsh_counts, seed, resamples);
    if (!est.violates())
        throw chsh_abort_error("chsh check failed: s = " + analysis::fmt_real(est.s) +
                               ", std = " + analysis::fmt_real(est.std_dev));
    return est;
}

struct QberEstimate {
    double gamma = 0.0;
    std::uint64_t errors = 0;
    std::uint64_t sample_size = 0;
    BitVec alice_rest;  // unsampled bits, original order
    BitVec bob_rest;
};

// Sacrifice a random fraction of the sifted key to measure the error rate.
// The compared bits are publicly disclosed and dropped from the key.
inline QberEstimate estimate_qber(const BitVec& alice, const BitVec& bob, double sample_fraction,
                                  double abort_threshold, std::uint64_t seed) {
    if (alice.size() != bob.size()) throw domain_error("qber: key length mismatch");
    if (!(sample_fraction > 0.0 && sample_fraction < 1.0))
        throw domain_error("qber: sample fraction must lie in (0, 1)");
    if (!(abort_threshold > 0.0 && abort_threshold < 0.5))
        throw domain_error("qber: abort threshold must lie in (0, 0.5)");
    const std::size_t n = alice.size();
    const auto k = static_cast<std::size_t>(
        std::ceil(sample_fraction * static_cast<double>(n)));
    if (k == 0 || k >= n) throw incomplete_data_error("qber: key too short to sample");

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);

    std::vector<bool> sampled(n, false);
    for (std::size_t i = 0; i < k; ++i) sampled[idx[i]] = true;

    QberEstimate est;
    est.sample_size = k;
    for (std::size_t i = 0; i < n; ++i) {
        if (sampled[i]) {
            if (alice.get(i) != bob.get(i)) ++est.errors;
        } else {
            est.alice_rest.push_back(alice.get(i));
            est.bob_rest.push_back(bob.get(i));
        }
    }
    est.gamma = static_cast<double>(est.errors) / static_cast<double>(k);
    if (est.gamma >= abort_threshold)
        throw qber_abort_error(est.gamma, "qber " + analysis::fmt_real(est.gamma) +
                                              " at or above threshold " +
                                              analysis::fmt_real(abort_threshold));
    return est;
}

// ---------------------------------------------------------------------------
// Reconciliation
// ---------------------------------------------------------------------------

struct BlockOutcome {
    bool bp_converged = false;
    bool hash_ok = false;
    int iterations = 0;
};

struct ReconcileStage {
    BitVec key;        // receiver's corrected blocks, concatenated
    BitVec key_alice;  // sender's copy of the same blocks
    std::uint64_t leak_bits = 0;
    int blocks_total = 0;
    int blocks_ok = 0;
    std::vector<BlockOutcome> blocks;
};

// Cut both keys into full blocks (the tail is discarded), have the receiving
// side decode toward the sender's syndrome, and verify each corrected block
// with a short hash. Each kept block leaks its syndrome plus the hash tag.
inline ReconcileStage reconcile_blocks(const BitVec& alice, const BitVec& bob, int block_len,
                                       double gamma_estimate, std::uint64_t seed,
                                       int bp_max_iters = 60) {
    if (alice.size() != bob.size()) throw domain_error("reconcile: key length mismatch");
    ReconcileStage stage;
    stage.blocks_total = static_cast<int>(alice.size() / static_cast<std::size_t>(block_len));
    if (stage.blocks_total == 0)
        throw insufficient_key_error("reconcile: fewer than one block of key");

    const auto code = ldpc::generate_code(block_len, derive_seed(seed, "ldpc.code"));
    // The decoder prior needs a crossover strictly inside (0, 0.5); a sampled
    // estimate can sit on 0.
    const double gamma_prior = std::clamp(gamma_estimate, 1e-3, 0.49);

    for (int b = 0; b < stage.blocks_total; ++b) {
        const auto off = static_cast<std::size_t>(b) * static_cast<std::size_t>(block_len);
        const BitVec block_a = alice.slice(off, static_cast<std::size_t>(block_len));
        const BitVec block_b = bob.slice(off, static_cast<std::size_t>(block_len));
        const BitVec syn = ldpc::syndrome(code, block_a);
        const std::uint64_t hash_seed = derive_seed(seed, "hash.block." + std::to_string(b));

        BlockOutcome outcome;
        auto rec = ldpc::reconcile(code, block_b, syn, gamma_prior, bp_max_iters);
        outcome.bp_converged = rec.converged;
        outcome.iterations = rec.iterations;
        if (rec.converged)
            outcome.hash_ok =
                ldpc::block_hash(rec.bits, hash_seed) == ldpc::block_hash(block_a, hash_seed);
        stage.blocks.push_back(outcome);
        if (outcome.bp_converged && outcome.hash_ok) {
            stage.key.append(rec.bits);
            stage.key_alice.append(block_a);
            stage.leak_bits += static_cast<std::uint64_t>(code.m) + 64;
            ++stage.blocks_ok;
        }
    }
    if (stage.blocks_ok == 0)
        throw session_abort_error("reconciliation", "no block survived reconciliation");
    return stage;
}

// ---------------------------------------------------------------------------
// Privacy amplification
// ---------------------------------------------------------------------------

struct FinalKey {
    BitVec bits;
    std::uint64_t input_bits = 0;
    std::uint64_t leak_bits = 0;
    std::uint64_t entropy_term = 0;
    int security_param = 0;
};

// Compress with a seeded Toeplitz matrix. The output length removes the
// reconciliation leakage, the eavesdropper entropy bound n*h2(gamma) and a
// security margin s, leaving a key within 2^-s of uniform.
inline FinalKey privacy_amplify(const BitVec& key, std::uint64_t leak_bits, double gamma,
                                int security_param, std::uint64_t seed) {
    if (key.empty()) throw insufficient_key_error("privacy amplification of empty key");
    if (!(gamma >= 0.0 && gamma <= 0.5)) throw domain_error("pa: gamma outside [0, 0.5]");
    if (security_param < 1) throw domain_error("pa: security parameter must be >= 1");

    FinalKey out;
    out.input_bits = key.size();
    out.leak_bits = leak_bits;
    out.security_param = security_param;
    const auto n = key.size();
    out.entropy_term = static_cast<std::uint64_t>(
        std::ceil(static_cast<double>(n) * stats::binary_entropy(gamma)));
    const auto debit = leak_bits + out.entropy_term +
                       static_cast<std::uint64_t>(security_param);
    if (debit >= n)
        throw insufficient_key_error("pa: leakage and entropy terms consume the whole key");
    const std::size_t m = n - static_cast<std::size_t>(debit);

    // Diagonal-constant matrix T(i,j) = d[i - j + n - 1]; out[i] is then the
    // parity of key AND a sliding window of d reversed.
    const std::size_t dlen = m + n - 1;
    BitVec rev(dlen);
    {
        std::mt19937_64 rng(derive_seed(seed, "pa.toeplitz"));
        BitVec d(dlen);
        std::uint64_t w = 0;
        for (std::size_t i = 0; i < dlen; ++i) {
            if (i % 64 == 0) w = rng();
            d.set(i, (w >> (i % 64)) & 1ULL);
        }
        for (std::size_t i = 0; i < dlen; ++i) rev.set(i, d.get(dlen - 1 - i));
    }

    out.bits = BitVec(m);
    const std::size_t words = key.word_count();
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t base = m - 1 - i;
        std::uint64_t parity = 0;
        for (std::size_t w = 0; w < words; ++w)
            parity ^= std::popcount(key.word(w) & rev.window(base + 64 * w)) & 1U;
        out.bits.set(i, parity != 0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Session driver
// ---------------------------------------------------------------------------

struct SessionParams {
    std::uint64_t target_sifted_bits = 12000;
    int block_len = 4096;
    double sample_fraction = 0.2;
    double qber_abort_threshold = 0.11;
    int pa_security_param = 300;
    int bp_max_iters = 60;
    int chsh_resamples = 1000;
    std::uint64_t slots_per_chunk = 8'000'000;
    int max_chunks = 40;
};

enum class SessionStatus {
    ok,
    abort_collection,      // not enough sifted bits within the slot budget
    abort_chsh,            // no significant CHSH violation
    abort_qber,            // error rate at or above threshold
    abort_reconciliation,  // no block survived reconciliation
    abort_amplification,   // nothing left after the leakage debit
};

inline const char* to_string(SessionStatus s) {
    switch (s) {
        case SessionStatus::ok: return "ok";
        case SessionStatus::abort_collection: return "abort_collection";
        case SessionStatus::abort_chsh: return "abort_chsh";
        case SessionStatus::abort_qber: return "abort_qber";
        case SessionStatus::abort_reconciliation: return "abort_reconciliation";
        case SessionStatus::abort_amplification: return "abort_amplification";
    }
    return "unknown";
}

struct SessionReport {
    SessionStatus status = SessionStatus::ok;
    std::string user_a;
    std::string user_b;
    std::uint64_t slots_used = 0;
    std::uint64_t coincidences = 0;
    std::optional<analysis::ChshEstimate> chsh;
    std::uint64_t sifted_bits = 0;
    std::uint64_t sample_bits = 0;
    double gamma = 0.0;
    int blocks_total = 0;
    int blocks_ok = 0;
    std::uint64_t reconciled_bits = 0;
    std::uint64_t leak_bits = 0;
    std::uint64_t entropy_term = 0;
    std::uint64_t final_bits = 0;
    BitVec final_key;      // sender side
    BitVec final_key_bob;  // receiver side; equal to final_key when all went well
    bool keys_match = false;
};

// Full pipeline for one routed user pair. Protocol aborts land in the report
// status rather than escaping, so callers always get the partial accounting.
inline SessionReport run_qkd_session(const net::NetworkConfig& cfg, const net::EndUser& user_a,
                                     const net::EndUser& user_b, const SessionParams& params,
                                     std::uint64_t seed) {
    if (params.target_sifted_bits < 16) throw domain_error("session: sifted target too small");
    if (params.block_len < 12 || params.block_len % 2 != 0)
        throw domain_error("session: block length must be even and >= 12");
    if (!cfg.user_valid(user_a) || !cfg.user_valid(user_b) || user_a.side != net::Side::A ||
        user_b.side != net::Side::B)
        throw domain_error("session: bad user pair");

    SessionReport rep;
    rep.user_a = user_a.name();
    rep.user_b = user_b.name();

    // Collect coincidences in slot chunks until the sift target is covered.
    BitVec alice, bob;
    net::CountTable chsh_counts;
    for (int chunk = 0; chunk < params.max_chunks; ++chunk) {
        if (alice.size() >= params.target_sifted_bits) break;
        const auto schedule =
            net::RoutingSchedule::single(user_a, user_b, params.slots_per_chunk);
        const auto run = net::run_slots(cfg, schedule, net::E91Policy{}, params.slots_per_chunk,
                                        derive_seed(seed, "qkd.chunk." + std::to_string(chunk)));
        rep.slots_used += run.stats.slots_total;
        rep.coincidences += run.stats.records;
        const auto sifted = sift(run.records);
        for (std::size_t i = 0; i < sifted.alice.size(); ++i) {
            alice.push_back(sifted.alice.get(i));
            bob.push_back(sifted.bob.get(i));
        }
        for (const auto& [key, c] : sifted.chsh_counts.cells) {
            auto& cell = chsh_counts.cells[key];
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    cell[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +=
                        c[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    if (alice.size() < params.target_sifted_bits) {
        rep.status = SessionStatus::abort_collection;
        rep.sifted_bits = alice.size();
        return rep;
    }
    alice = alice.slice(0, static_cast<std::size_t>(params.target_sifted_bits));
    bob = bob.slice(0, static_cast<std::size_t>(params.target_sifted_bits));
    rep.sifted_bits = alice.size();

    try {
        rep.chsh = chsh_security_check(chsh_counts, derive_seed(seed, "qkd.chsh"),
                                       params.chsh_resamples);
    } catch (const chsh_abort_error&) {
        rep.chsh = analysis::chsh_estimate(chsh_counts, derive_seed(seed, "qkd.chsh"),
                                           params.chsh_resamples);
        rep.status = SessionStatus::abort_chsh;
        return rep;
    }

    QberEstimate qber;
    try {
        qber = estimate_qber(alice, bob, params.sample_fraction, params.qber_abort_threshold,
                             derive_seed(seed, "qkd.sample"));
    } catch (const qber_abort_error& e) {
        rep.gamma = e.gamma();
        rep.status = SessionStatus::abort_qber;
        return rep;
    }
    rep.sample_bits = qber.sample_size;
    rep.gamma = qber.gamma;

    ReconcileStage stage;
    try {
        stage = reconcile_blocks(qber.alice_rest, qber.bob_rest, params.block_len, qber.gamma,
                                 derive_seed(seed, "qkd.reconcile"), params.bp_max_iters);
    } catch (const session_abort_error&) {
        rep.blocks_total =
            static_cast<int>(qber.alice_rest.size() / static_cast<std::size_t>(params.block_len));
        rep.status = SessionStatus::abort_reconciliation;
        return rep;
    }
    rep.blocks_total = stage.blocks_total;
    rep.blocks_ok = stage.blocks_ok;
    rep.reconciled_bits = stage.key.size();
    rep.leak_bits = stage.leak_bits;

    try {
        // Both sides hash with the same public Toeplitz seed; equal inputs
        // give byte-identical final keys.
        const auto fin_a = privacy_amplify(stage.key_alice, stage.leak_bits, qber.gamma,
                                           params.pa_security_param, derive_seed(seed, "qkd.pa"));
        const auto fin_b = privacy_amplify(stage.key, stage.leak_bits, qber.gamma,
                                           params.pa_security_param, derive_seed(seed, "qkd.pa"));
        rep.entropy_term = fin_a.entropy_term;
        rep.final_bits = fin_a.bits.size();
        rep.final_key = fin_a.bits;
        rep.final_key_bob = fin_b.bits;
        rep.keys_match = rep.final_key == rep.final_key_bob;
    } catch (const insufficient_key_error&) {
        rep.status = SessionStatus::abort_amplification;
        return rep;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Report output
// ---------------------------------------------------------------------------

inline void write_report_text(std::ostream& out, const SessionReport& r) {
    out << "status = " << to_string(r.status) << "\n";
    out << "user_a = " << r.user_a << "\n";
    out << "user_b = " << r.user_b << "\n";
    out << "slots_used = " << r.slots_used << "\n";
    out << "coincidences = " << r.coincidences << "\n";
    if (r.chsh) {
        out << "chsh_s = " << analysis::fmt_real(r.chsh->s) << "\n";
        out << "chsh_std = " << analysis::fmt_real(r.chsh->std_dev) << "\n";
    }
    out << "sifted_bits = " << r.sifted_bits << "\n";
    out << "sample_bits = " << r.sample_bits << "\n";
    out << "gamma = " << analysis::fmt_real(r.gamma) << "\n";
    out << "blocks_total = " << r.blocks_total << "\n";
    out << "blocks_ok = " << r.blocks_ok << "\n";
    out << "reconciled_bits = " << r.reconciled_bits << "\n";
    out << "leak_bits = " << r.leak_bits << "\n";
    out << "entropy_term = " << r.entropy_term << "\n";
    out << "final_bits = " << r.final_bits << "\n";
    if (r.final_bits > 0) out << "keys_match = " << (r.keys_match ? "yes" : "no") << "\n";
}

// One row per completed stage; cells empty until their stage has run.
inline void write_report_csv(std::ostream& out, const SessionReport& r) {
    const std::string s_value = r.chsh ? analysis::fmt_real(r.chsh->s) : "";
    const std::string gamma =
        (r.sample_bits > 0 || r.status == SessionStatus::abort_qber)
            ? analysis::fmt_real(r.gamma)
            : "";
    out << "stage,bits,gamma,s_value,blocks_ok,final_len\n";
    out << "sifted," << r.sifted_bits << ",,,,\n";
    if (r.chsh) out << "chsh," << r.sifted_bits << ",," << s_value << ",,\n";
    if (!gamma.empty()) out << "sample," << r.sample_bits << "," << gamma << ",,,\n";
    if (r.blocks_total > 0)
        out << "reconciled," << r.reconciled_bits << "," << gamma << "," << s_value << ","
            << r.blocks_ok << ",\n";
    if (r.status == SessionStatus::ok)
        out << "final," << r.final_bits << "," << gamma << "," << s_value << "," << r.blocks_ok
            << "," << r.final_bits << "\n";
}

inline void write_key_hex(std::ostream& out, const BitVec& key) { out << key.to_hex() << "\n"; }

}  // namespace entnet::qkd
