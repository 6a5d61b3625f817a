#pragma once

#include <bit>
#include <chrono>
#include <cstdint>
#include <exception>
#include <latch>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "entnet/errors.hpp"
#include "entnet/stats.hpp"
#include "entnet/transport.hpp"
#include "entnet/util.hpp"

// N-party secure summation on a ring: every adjacent pair shares one-time
// pad material, each party announces its value masked by the two adjacent
// pads, and the pads telescope out of the public sum.
namespace entnet::securesum {

struct RingTopology {
    std::vector<std::string> members;  // ring order; each member neighbors two others

    void validate() const {
        if (members.size() < 3) throw domain_error("ring needs at least three members");
        std::set<std::string> seen;
        for (const auto& m : members) {
            if (m.empty()) throw domain_error("ring member with empty name");
            if (!seen.insert(m).second) throw domain_error("duplicate ring member '" + m + "'");
        }
    }

    std::size_t index_of(const std::string& id) const {
        for (std::size_t i = 0; i < members.size(); ++i)
            if (members[i] == id) return i;
        throw domain_error("'" + id + "' is not on the ring");
    }

    // Edge i joins members[i] to members[i+1 mod N].
    std::string edge_name(std::size_t i) const {
        return members[i % members.size()] + "-" + members[(i + 1) % members.size()];
    }
};

inline std::uint64_t modulus_mask(int n_bits) {
    if (n_bits < 1 || n_bits > 64) throw domain_error("word size must lie in [1, 64]");
    return n_bits == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n_bits) - 1;
}

// ---------------------------------------------------------------------------
// Pad material
// ---------------------------------------------------------------------------

// One n-bit pad word cut from shared key material, usable exactly once.
struct PadKey {
    std::uint64_t value = 0;
    int bit_width = 0;
    bool consumed = false;
};

// A party's copy of one edge's shared key bits, consumed front to back.
class KeyMaterial {
public:
    KeyMaterial() = default;
    explicit KeyMaterial(BitVec bits) : bits_(std::move(bits)) {}

    std::size_t remaining() const { return bits_.size() - next_; }

private:
    friend PadKey derive_pad(KeyMaterial&, int);
    BitVec bits_;
    std::size_t next_ = 0;
};

// Read the next n key bits as one pad, first bit most significant, and
// advance the material cursor.
inline PadKey derive_pad(KeyMaterial& material, int n_bits) {
    modulus_mask(n_bits);
    if (material.remaining() < static_cast<std::size_t>(n_bits))
        throw key_exhausted_error("pad material exhausted (" +
                                  std::to_string(material.remaining()) + " bits left, " +
                                  std::to_string(n_bits) + " wanted)");
    PadKey pad;
    pad.bit_width = n_bits;
    for (int k = 0; k < n_bits; ++k)
        pad.value = (pad.value << 1) | (material.bits_.get(material.next_++) ? 1ULL : 0ULL);
    return pad;
}

// X = (v + R_next - R_prev) mod 2^n. Burns both pads; presenting a pad a
// second time is a hard one-time-pad violation.
inline std::uint64_t compute_announcement(std::uint64_t value, PadKey& pad_next, PadKey& pad_prev,
                                          int n_bits) {
    const std::uint64_t mask = modulus_mask(n_bits);
    if (value > mask) throw domain_error("input value exceeds the modulus");
    if (pad_next.bit_width != n_bits || pad_prev.bit_width != n_bits)
        throw domain_error("pad width does not match the modulus");
    if (pad_next.consumed || pad_prev.consumed)
        throw pad_reuse_error("one-time pad presented twice");
    pad_next.consumed = true;
    pad_prev.consumed = true;
    const std::uint64_t neg_prev = (mask - pad_prev.value + 1) & mask;
    return (value + pad_next.value + neg_prev) & mask;
}

// Source of shared edge keys. Implementations must hand both ends of an
// edge identical bits.
class KeySource {
public:
    virtual ~KeySource() = default;
    virtual BitVec edge_key(const std::string& edge_name) const = 0;
};

// Expands a master seed per edge. Stands in for distributed keys in tests
// and in seeded CLI runs.
class SeededKeySource final : public KeySource {
public:
    SeededKeySource(std::uint64_t master_seed, std::size_t bits_per_edge)
        : master_seed_(master_seed), bits_per_edge_(bits_per_edge) {}

    BitVec edge_key(const std::string& edge_name) const override {
        std::mt19937_64 rng(derive_seed(master_seed_, "pad." + edge_name));
        BitVec bits(bits_per_edge_);
        std::uint64_t w = 0;
        for (std::size_t i = 0; i < bits_per_edge_; ++i) {
            if (i % 64 == 0) w = rng();
            bits.set(i, (w >> (i % 64)) & 1ULL);
        }
        return bits;
    }

private:
    std::uint64_t master_seed_;
    std::size_t bits_per_edge_;
};

// Keys loaded from elsewhere, e.g. QKD session outputs.
class MapKeySource final : public KeySource {
public:
    explicit MapKeySource(std::map<std::string, BitVec> keys) : keys_(std::move(keys)) {}

    BitVec edge_key(const std::string& edge_name) const override {
        const auto it = keys_.find(edge_name);
        if (it == keys_.end())
            throw domain_error("no key material for edge '" + edge_name + "'");
        return it->second;
    }

private:
    std::map<std::string, BitVec> keys_;
};

// ---------------------------------------------------------------------------
// Announcements and aggregation
// ---------------------------------------------------------------------------

struct Announcement {
    int round = 0;
    std::string party;
    std::uint64_t x = 0;

    bool operator==(const Announcement&) const = default;
};

struct SumResult {
    int round = 0;
    std::uint64_t t = 0;

    bool operator==(const SumResult&) const = default;
};

// T = sum of the announced words mod 2^n; wants exactly one announcement
// per ring member, all of the same round.
inline SumResult aggregate(const std::vector<Announcement>& announcements,
                           const RingTopology& ring, int n_bits) {
    const std::uint64_t mask = modulus_mask(n_bits);
    if (announcements.empty()) throw protocol_violation_error("aggregate of nothing");
    SumResult result;
    result.round = announcements.front().round;
    std::set<std::string> seen;
    for (const auto& a : announcements) {
        ring.index_of(a.party);
        if (a.round != result.round)
            throw protocol_violation_error("announcements span several rounds");
        if (a.x > mask) throw protocol_violation_error("announcement exceeds the modulus");
        if (!seen.insert(a.party).second)
            throw protocol_violation_error("duplicate announcement from '" + a.party + "'");
        result.t = (result.t + a.x) & mask;
    }
    if (seen.size() != ring.members.size())
        throw protocol_violation_error("announcements missing for some parties");
    return result;
}

// ---------------------------------------------------------------------------
// Party state machine
// ---------------------------------------------------------------------------

class Party {
public:
    Party(const RingTopology& ring, std::string id, int n_bits, const KeySource& keys)
        : id_(std::move(id)), n_bits_(n_bits), mask_(modulus_mask(n_bits)) {
        ring.validate();
        const std::size_t i = ring.index_of(id_);
        const std::size_t prev = (i + ring.members.size() - 1) % ring.members.size();
        next_material_ = KeyMaterial(keys.edge_key(ring.edge_name(i)));
        prev_material_ = KeyMaterial(keys.edge_key(ring.edge_name(prev)));
    }

    const std::string& id() const { return id_; }
    int n_bits() const { return n_bits_; }

    // Masked announcement for this round. Rounds must advance one at a time
    // so both ends of each edge stay in pad lockstep.
    std::uint64_t announcement(int round, std::uint64_t value) {
        if (round <= last_round_)
            throw pad_reuse_error("pads for round " + std::to_string(round) +
                                  " were already consumed");
        if (round != last_round_ + 1)
            throw protocol_violation_error("rounds must advance one at a time");
        last_round_ = round;
        PadKey pad_next = derive_pad(next_material_, n_bits_);
        PadKey pad_prev = derive_pad(prev_material_, n_bits_);
        return compute_announcement(value, pad_next, pad_prev, n_bits_);
    }

private:
    std::string id_;
    int n_bits_;
    std::uint64_t mask_;
    KeyMaterial next_material_;
    KeyMaterial prev_material_;
    int last_round_ = -1;
};

// ---------------------------------------------------------------------------
// Protocol driver
// ---------------------------------------------------------------------------

struct Transcript {
    std::vector<Announcement> announcements;  // all parties, ring order per round
    std::vector<SumResult> totals;
    std::vector<std::string> transitions;  // "round/state" trail of this node
};

// Per-round exchange as one party sees it: announce, collect the other
// announcements, then cross-check everyone computed the same total before
// advancing. The cross-check rides on CONTROL messages.
inline Transcript run_party(transport::Endpoint& ep, const RingTopology& ring, Party& party,
                            const std::string& session,
                            const std::vector<std::uint64_t>& values,
                            std::chrono::milliseconds timeout = transport::kDefaultTimeout) {
    ring.validate();
    const auto n = ring.members.size();
    ring.index_of(party.id());  // membership check
    if (values.empty()) throw domain_error("run_party: no rounds to run");

    Transcript transcript;
    std::vector<transport::Message> held;
    const auto note = [&](int round, const char* state) {
        transcript.transitions.push_back(std::to_string(round) + "/" + state);
    };

    const auto next_message = [&](int round, const std::string& kind) {
        for (std::size_t i = 0; i < held.size(); ++i)
            if (held[i].round == round && held[i].kind == kind) {
                transport::Message m = held[i];
                held.erase(held.begin() + static_cast<std::ptrdiff_t>(i));
                return m;
            }
        for (;;) {
            transport::Message m = ep.recv(timeout);
            if (m.session != session)
                throw protocol_violation_error("message for session '" + m.session + "'");
            if (m.round == round && m.kind == kind) return m;
            const bool early_control = m.kind == "CONTROL" && m.round == round && kind == "ANNOUNCE";
            const bool early_announce =
                m.kind == "ANNOUNCE" && m.round == round + 1 && kind == "CONTROL";
            if (early_control || early_announce) {
                held.push_back(m);
                continue;
            }
            throw protocol_violation_error("unexpected " + m.kind + " for round " +
                                           std::to_string(m.round) + " from '" + m.sender + "'");
        }
    };

    for (int round = 0; round < static_cast<int>(values.size()); ++round) {
        note(round, "keyed");
        const std::uint64_t own_x =
            party.announcement(round, values[static_cast<std::size_t>(round)]);

        transport::Message announce;
        announce.session = session;
        announce.round = round;
        announce.sender = party.id();
        announce.kind = "ANNOUNCE";
        announce.fields["x"] = std::to_string(own_x);
        ep.broadcast(announce);
        note(round, "announced");

        std::map<std::string, std::uint64_t> xs;
        xs[party.id()] = own_x;
        while (xs.size() < n) {
            const auto m = next_message(round, "ANNOUNCE");
            ring.index_of(m.sender);  // known member check
            if (!xs.emplace(m.sender, transport::message_x(m)).second)
                throw protocol_violation_error("duplicate announcement from '" + m.sender + "'");
        }

        std::vector<Announcement> round_log;
        round_log.reserve(n);
        for (const auto& member : ring.members)
            round_log.push_back({round, member, xs.at(member)});
        const SumResult total = aggregate(round_log, ring, party.n_bits());
        transcript.announcements.insert(transcript.announcements.end(), round_log.begin(),
                                        round_log.end());

        transport::Message confirm;
        confirm.session = session;
        confirm.round = round;
        confirm.sender = party.id();
        confirm.kind = "CONTROL";
        confirm.fields["t"] = std::to_string(total.t);
        ep.broadcast(confirm);

        std::set<std::string> confirmed{party.id()};
        while (confirmed.size() < n) {
            const auto m = next_message(round, "CONTROL");
            if (!confirmed.insert(m.sender).second)
                throw protocol_violation_error("duplicate control from '" + m.sender + "'");
            const auto it = m.fields.find("t");
            if (it == m.fields.end() || it->second != std::to_string(total.t))
                throw protocol_violation_error("'" + m.sender + "' computed a different total");
        }
        transcript.totals.push_back(total);
        note(round, "done");
    }
    return transcript;
}

// ---------------------------------------------------------------------------
// Node runner
// ---------------------------------------------------------------------------

enum class NodeState { done, violation, incomplete };

inline const char* to_string(NodeState s) {
    switch (s) {
        case NodeState::done: return "done";
        case NodeState::violation: return "violation";
        case NodeState::incomplete: return "incomplete";
    }
    return "unknown";
}

struct NodeOutcome {
    NodeState terminal = NodeState::done;
    Transcript transcript;
    std::string error;
};

// Non-throwing wrapper: protocol violations and receive timeouts become
// terminal states instead of exceptions.
inline NodeOutcome run_node(transport::Endpoint& ep, const RingTopology& ring, Party& party,
                            const std::string& session,
                            const std::vector<std::uint64_t>& values,
                            std::chrono::milliseconds timeout = transport::kDefaultTimeout) {
    NodeOutcome out;
    try {
        out.transcript = run_party(ep, ring, party, session, values, timeout);
        out.terminal = NodeState::done;
    } catch (const protocol_violation_error& e) {
        out.terminal = NodeState::violation;
        out.error = e.what();
    } catch (const pad_reuse_error& e) {
        out.terminal = NodeState::violation;
        out.error = e.what();
    } catch (const io_error& e) {
        out.terminal = NodeState::incomplete;
        out.error = e.what();
    } catch (const channel_closed_error& e) {
        out.terminal = NodeState::incomplete;
        out.error = e.what();
    }
    return out;
}

struct ProtocolResult {
    std::map<std::string, Transcript> by_party;
};

// Run every party on its own thread over a fresh mesh of the requested
// backend. The first party exception wins and is rethrown after join.
inline ProtocolResult run_protocol(const RingTopology& ring,
                                   const std::map<std::string, std::vector<std::uint64_t>>& values,
                                   int n_bits, const KeySource& keys, const std::string& session,
                                   bool use_sockets,
                                   std::chrono::milliseconds timeout = transport::kDefaultTimeout) {
    ring.validate();
    std::size_t rounds = 0;
    for (const auto& member : ring.members) {
        const auto it = values.find(member);
        if (it == values.end()) throw domain_error("no input values for '" + member + "'");
        if (it->second.empty()) throw domain_error("empty input list for '" + member + "'");
        if (rounds == 0) rounds = it->second.size();
        if (it->second.size() != rounds)
            throw domain_error("parties disagree on the number of rounds");
    }

    auto mesh = use_sockets ? transport::make_socket_mesh(ring.members)
                            : transport::make_inprocess_mesh(ring.members);

    ProtocolResult result;
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(ring.members.size());
    std::vector<Transcript> transcripts(ring.members.size());
    // Nobody closes until every party is done, or a finisher's EOF races the
    // peers still draining the final round. A failing party closes at once so
    // lockstep peers unblock instead of waiting out their recv timeout.
    std::latch done(static_cast<std::ptrdiff_t>(ring.members.size()));

    for (std::size_t i = 0; i < ring.members.size(); ++i) {
        threads.emplace_back([&, i]() {
            try {
                Party party(ring, ring.members[i], n_bits, keys);
                transcripts[i] =
                    run_party(*mesh[i], ring, party, session, values.at(ring.members[i]), timeout);
                done.count_down();
                done.wait();
                mesh[i]->close();
            } catch (...) {
                errors[i] = std::current_exception();
                done.count_down();
                mesh[i]->close();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    for (std::size_t i = 0; i < ring.members.size(); ++i)
        result.by_party[ring.members[i]] = std::move(transcripts[i]);
    return result;
}

// ---------------------------------------------------------------------------
// Privacy audit
// ---------------------------------------------------------------------------

// Histogram announced words into equal bins over [0, 2^n).
inline std::vector<std::uint64_t> audit_bins(const std::vector<std::uint64_t>& xs, int n_bits,
                                             int bins = 8) {
    if (bins < 2) throw domain_error("audit wants at least 2 bins");
    const std::uint64_t mask = modulus_mask(n_bits);
    std::vector<std::uint64_t> hist(static_cast<std::size_t>(bins), 0);
    for (const auto x : xs) {
        if (x > mask) throw domain_error("announcement exceeds the modulus");
        const auto b = static_cast<std::size_t>(
            (static_cast<unsigned __int128>(x) * static_cast<unsigned>(bins)) >> n_bits);
        ++hist[b];
    }
    return hist;
}

struct PrivacyAudit {
    stats::ChiSquareResult uniformity;
    double ones_fraction = 0.0;
    bool monobit_ok = false;
};

inline PrivacyAudit privacy_audit(const std::vector<std::uint64_t>& xs, int n_bits,
                                  int bins = 8) {
    PrivacyAudit audit;
    audit.uniformity = stats::chi_square_uniform(audit_bins(xs, n_bits, bins));
    std::uint64_t ones = 0;
    for (const auto x : xs) ones += static_cast<std::uint64_t>(std::popcount(x));
    const auto total_bits = static_cast<std::uint64_t>(xs.size()) * static_cast<std::uint64_t>(n_bits);
    audit.ones_fraction =
        total_bits == 0 ? 0.0 : static_cast<double>(ones) / static_cast<double>(total_bits);
    audit.monobit_ok = stats::monobit_ok(ones, total_bits);
    return audit;
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

inline void write_announcements_csv(std::ostream& out, const Transcript& t) {
    out << "round,party,x\n";
    for (const auto& a : t.announcements)
        out << a.round << "," << a.party << "," << a.x << "\n";
}

inline void write_sums_csv(std::ostream& out, const Transcript& t) {
    out << "round,t\n";
    for (const auto& r : t.totals) out << r.round << "," << r.t << "\n";
}

}  // namespace entnet::securesum
