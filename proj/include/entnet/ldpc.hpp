#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <unordered_map>
#include <vector>

#include "entnet/errors.hpp"
#include "entnet/util.hpp"

// Regular (3,6) rate-1/2 LDPC codes for syndrome-based key reconciliation:
// pseudorandom construction, syndrome computation, sum-product decoding and
// a short verification hash.
namespace entnet::ldpc {

inline constexpr int kVarDegree = 3;
inline constexpr int kCheckDegree = 6;

struct LdpcCode {
    int n = 0;                  // variables (block length)
    int m = 0;                  // checks, n/2
    std::vector<int> slot_var;  // edge list: check c owns slots [6c, 6c+6)

    int check_of_slot(int s) const { return s / kCheckDegree; }

    std::vector<std::array<int, kVarDegree>> var_slots() const {
        std::vector<std::array<int, kVarDegree>> out(static_cast<std::size_t>(n));
        std::vector<int> fill(static_cast<std::size_t>(n), 0);
        for (int s = 0; s < static_cast<int>(slot_var.size()); ++s) {
            const int v = slot_var[static_cast<std::size_t>(s)];
            out[static_cast<std::size_t>(v)][static_cast<std::size_t>(fill[static_cast<std::size_t>(v)]++)] = s;
        }
        for (int v = 0; v < n; ++v)
            if (fill[static_cast<std::size_t>(v)] != kVarDegree)
                throw construction_error("ldpc: variable degree broken");
        return out;
    }
};

namespace detail {

// One validation sweep: flag slots involved in a repeated edge or a length-4
// cycle (two checks sharing two variables).
inline std::vector<int> bad_slots(const LdpcCode& code) {
    std::vector<int> bad;
    std::unordered_map<std::uint64_t, int> pair_first_check;
    pair_first_check.reserve(static_cast<std::size_t>(code.m) * 16);
    std::array<int, kCheckDegree> vars{};
    for (int c = 0; c < code.m; ++c) {
        const int base = c * kCheckDegree;
        for (int k = 0; k < kCheckDegree; ++k)
            vars[static_cast<std::size_t>(k)] = code.slot_var[static_cast<std::size_t>(base + k)];
        for (int i = 0; i < kCheckDegree; ++i)
            for (int j = i + 1; j < kCheckDegree; ++j) {
                const int vi = vars[static_cast<std::size_t>(i)];
                const int vj = vars[static_cast<std::size_t>(j)];
                if (vi == vj) {  // repeated edge
                    bad.push_back(base + j);
                    continue;
                }
                const std::uint64_t key =
                    (static_cast<std::uint64_t>(std::min(vi, vj)) << 32) |
                    static_cast<std::uint64_t>(std::max(vi, vj));
                const auto [it, fresh] = pair_first_check.try_emplace(key, c);
                if (!fresh && it->second != c) bad.push_back(base + j);
            }
    }
    std::sort(bad.begin(), bad.end());
    bad.erase(std::unique(bad.begin(), bad.end()), bad.end());
    return bad;
}

}  // namespace detail

// Build a code by shuffling variable stubs onto check stubs, then swapping
// edges until no repeated edges or 4-cycles remain.
inline LdpcCode generate_code(int block_len, std::uint64_t seed) {
    if (block_len < 2 * kCheckDegree || block_len % 2 != 0)
        throw construction_error("ldpc: block length must be even and >= 12");
    LdpcCode code;
    code.n = block_len;
    code.m = block_len / 2;
    code.slot_var.resize(static_cast<std::size_t>(code.n) * kVarDegree);
    for (int v = 0; v < code.n; ++v)
        for (int k = 0; k < kVarDegree; ++k)
            code.slot_var[static_cast<std::size_t>(v * kVarDegree + k)] = v;

    std::mt19937_64 rng(seed);
    std::shuffle(code.slot_var.begin(), code.slot_var.end(), rng);

    const int total_slots = static_cast<int>(code.slot_var.size());
    std::uniform_int_distribution<int> any_slot(0, total_slots - 1);
    for (int round = 0; round < 500; ++round) {
        const auto bad = detail::bad_slots(code);
        if (bad.empty()) return code;
        for (const int s : bad)
            std::swap(code.slot_var[static_cast<std::size_t>(s)],
                      code.slot_var[static_cast<std::size_t>(any_slot(rng))]);
    }
    throw construction_error("ldpc: girth repair did not converge");
}

inline BitVec syndrome(const LdpcCode& code, const BitVec& bits) {
    if (static_cast<int>(bits.size()) != code.n)
        throw domain_error("ldpc: bit count does not match block length");
    BitVec syn(static_cast<std::size_t>(code.m));
    for (int c = 0; c < code.m; ++c) {
        int parity = 0;
        for (int k = 0; k < kCheckDegree; ++k)
            parity ^= bits.get(static_cast<std::size_t>(
                code.slot_var[static_cast<std::size_t>(c * kCheckDegree + k)]));
        syn.set(static_cast<std::size_t>(c), parity != 0);
    }
    return syn;
}

struct ReconcileResult {
    BitVec bits;
    bool converged = false;
    int iterations = 0;
};

// Syndrome decoding with the sum-product algorithm: find the word nearest
// the received bits whose syndrome equals the target.
inline ReconcileResult reconcile(const LdpcCode& code, const BitVec& received,
                                 const BitVec& target_syndrome, double gamma,
                                 int max_iters = 60) {
    if (static_cast<int>(received.size()) != code.n)
        throw domain_error("ldpc: received length does not match block length");
    if (static_cast<int>(target_syndrome.size()) != code.m)
        throw domain_error("ldpc: syndrome length does not match check count");
    if (!(gamma > 0.0 && gamma < 0.5))
        throw domain_error("ldpc: crossover probability must lie in (0, 0.5)");
    if (max_iters < 1) throw domain_error("ldpc: max_iters must be >= 1");

    const double llr0 = std::log((1.0 - gamma) / gamma);
    const auto var_slots = code.var_slots();
    const int total_slots = code.n * kVarDegree;

    std::vector<double> prior(static_cast<std::size_t>(code.n));
    for (int v = 0; v < code.n; ++v)
        prior[static_cast<std::size_t>(v)] =
            received.get(static_cast<std::size_t>(v)) ? -llr0 : llr0;

    std::vector<double> msg_vc(static_cast<std::size_t>(total_slots));
    std::vector<double> msg_cv(static_cast<std::size_t>(total_slots), 0.0);
    std::vector<double> posterior(static_cast<std::size_t>(code.n));
    constexpr double kMsgClamp = 40.0;

    ReconcileResult result;
    result.bits = BitVec(static_cast<std::size_t>(code.n));

    for (int iter = 1; iter <= max_iters; ++iter) {
        for (int v = 0; v < code.n; ++v) {
            double s = prior[static_cast<std::size_t>(v)];
            for (const int slot : var_slots[static_cast<std::size_t>(v)])
                s += msg_cv[static_cast<std::size_t>(slot)];
            posterior[static_cast<std::size_t>(v)] = s;
            for (const int slot : var_slots[static_cast<std::size_t>(v)])
                msg_vc[static_cast<std::size_t>(slot)] = std::clamp(
                    s - msg_cv[static_cast<std::size_t>(slot)], -kMsgClamp, kMsgClamp);
        }

        for (int c = 0; c < code.m; ++c) {
            const int base = c * kCheckDegree;
            std::array<double, kCheckDegree> t{};
            for (int k = 0; k < kCheckDegree; ++k)
                t[static_cast<std::size_t>(k)] =
                    std::tanh(msg_vc[static_cast<std::size_t>(base + k)] / 2.0);
            std::array<double, kCheckDegree + 1> fwd{}, bwd{};
            fwd[0] = 1.0;
            bwd[kCheckDegree] = 1.0;
            for (int k = 0; k < kCheckDegree; ++k)
                fwd[static_cast<std::size_t>(k + 1)] =
                    fwd[static_cast<std::size_t>(k)] * t[static_cast<std::size_t>(k)];
            for (int k = kCheckDegree - 1; k >= 0; --k)
                bwd[static_cast<std::size_t>(k)] =
                    bwd[static_cast<std::size_t>(k + 1)] * t[static_cast<std::size_t>(k)];
            const double sign = target_syndrome.get(static_cast<std::size_t>(c)) ? -1.0 : 1.0;
            for (int k = 0; k < kCheckDegree; ++k) {
                double prod = fwd[static_cast<std::size_t>(k)] * bwd[static_cast<std::size_t>(k + 1)];
                prod = std::clamp(prod, -1.0 + 1e-12, 1.0 - 1e-12);
                msg_cv[static_cast<std::size_t>(base + k)] =
                    std::clamp(sign * 2.0 * std::atanh(prod), -kMsgClamp, kMsgClamp);
            }
        }

        for (int v = 0; v < code.n; ++v)
            result.bits.set(static_cast<std::size_t>(v), posterior[static_cast<std::size_t>(v)] < 0.0);
        result.iterations = iter;
        if (syndrome(code, result.bits) == target_syndrome) {
            result.converged = true;
            return result;
        }
    }
    return result;
}

// Seeded multiply-shift hash over the packed words, for post-reconciliation
// verification. 64 tag bits make an undetected block mismatch negligible.
inline std::uint64_t block_hash(const BitVec& bits, std::uint64_t seed) {
    std::uint64_t state = seed;
    unsigned __int128 acc = splitmix64(state);
    for (std::size_t w = 0; w < bits.word_count(); ++w)
        acc += static_cast<unsigned __int128>(splitmix64(state) | 1ULL) * bits.word(w);
    acc += static_cast<unsigned __int128>(splitmix64(state) | 1ULL) *
           static_cast<std::uint64_t>(bits.size());
    return static_cast<std::uint64_t>(acc >> 64) ^ static_cast<std::uint64_t>(acc);
}

}  // namespace entnet::ldpc
