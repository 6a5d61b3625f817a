// Command line front end for the network simulator and protocol stack.
//
// Subcommands:
//   fringe      polarization fringe scan for one routed pair
//   chsh        CHSH measurement at the four standard settings
//   qkd         one full QKD session with post-processing
//   secure-sum  N-party masked summation over a transport backend
//   demo-paper  end-to-end run: fringes, CHSH, four QKD links, secure sum
//
// Exit codes: 0 success, 1 manifest verification failed, 2 usage error,
// 3 protocol abort, 4 I/O failure.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "entnet/entnet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace entnet;

namespace {

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 1;
    std::string out;
};

void add_common(CLI::App* sub, CommonOpts& c) {
    sub->add_option("--config", c.config_path, "network config file (key = value lines)");
    sub->add_option("--seed", c.seed, "master random seed")->capture_default_str();
    sub->add_option("--out", c.out, "output path");
}

net::NetworkConfig load_config(const CommonOpts& c) {
    if (c.config_path.empty()) return {};
    return cfg::load_network_config(c.config_path);
}

std::pair<net::EndUser, net::EndUser> parse_pair(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw usage_error("pair must look like A1:B1, got '" + text + "'");
    auto a = net::parse_end_user(text.substr(0, colon));
    auto b = net::parse_end_user(text.substr(colon + 1));
    if (a.side != net::Side::A || b.side != net::Side::B)
        throw usage_error("pair must name one A-side and one B-side user, got '" + text + "'");
    return {a, b};
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write '" + path + "'");
    out << content;
    if (!out) throw io_error("write failed for '" + path + "'");
}

std::string hash_hex(const std::string& bytes) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

// ---------------------------------------------------------------------------
// fringe
// ---------------------------------------------------------------------------

struct FringeOpts {
    CommonOpts common;
    std::string pair = "A1:B1";
    std::string basis = "z";
    std::uint64_t slots = 4'000'000;
};

net::RunResult run_fringe_scan(const net::NetworkConfig& config,
                               const std::pair<net::EndUser, net::EndUser>& users, char basis,
                               std::uint64_t slots, std::uint64_t seed) {
    net::FringePolicy policy;
    policy.basis = basis;
    policy.theta_b_deg = net::FringePolicy::default_sweep();
    const auto schedule = net::RoutingSchedule::single(users.first, users.second, slots);
    return net::run_slots(config, schedule, policy, slots, seed);
}

int cmd_fringe(const FringeOpts& o) {
    const auto config = load_config(o.common);
    const auto users = parse_pair(o.pair);
    if (o.basis != "z" && o.basis != "x") throw usage_error("--basis must be z or x");
    if (o.slots == 0) {
        if (!o.common.out.empty()) analysis::write_fringe_csv(o.common.out, {});
        std::cerr << "error: no pump slots requested, nothing to scan\n";
        return 2;
    }

    // Scan both bases: the requested one feeds the CSV, the pair together
    // bound the fidelity.
    double vis[2] = {0.0, 0.0};
    std::vector<analysis::FringePoint> points;
    analysis::FringeFit fit;
    std::uint64_t coincidences = 0;
    for (const char basis : {'z', 'x'}) {
        const auto run = run_fringe_scan(config, users, basis, o.slots,
                                         derive_seed(o.common.seed, std::string("fringe.") + basis));
        const auto basis_points =
            analysis::fringe_points(net::CountTable::from_records(run.records));
        const auto basis_fit = analysis::fit_fringe(basis_points);
        vis[basis == 'z' ? 0 : 1] = basis_fit.visibility;
        if (basis == o.basis[0]) {
            points = basis_points;
            fit = basis_fit;
            coincidences = run.stats.records;
        }
    }

    if (!o.common.out.empty()) analysis::write_fringe_csv(o.common.out, points);

    std::cout << "pair = " << users.first.name() << ":" << users.second.name() << "\n";
    std::cout << "basis = " << o.basis << "\n";
    std::cout << "coincidences = " << coincidences << "\n";
    std::cout << "visibility = " << analysis::fmt_real(fit.visibility) << "\n";
    std::cout << "phase_deg = " << analysis::fmt_real(rad_to_deg(fit.phase_rad)) << "\n";
    std::cout << "visibility_z = " << analysis::fmt_real(vis[0]) << "\n";
    std::cout << "visibility_x = " << analysis::fmt_real(vis[1]) << "\n";
    std::cout << "fidelity_bound = " << analysis::fmt_real(analysis::fidelity_bound(vis[0], vis[1]))
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// chsh
// ---------------------------------------------------------------------------

struct ChshOpts {
    CommonOpts common;
    std::string pair = "A1:B1";
    std::uint64_t slots = 8'000'000;
    int resamples = 1000;
};

net::CountTable run_chsh_measurement(const net::NetworkConfig& config,
                                     const std::pair<net::EndUser, net::EndUser>& users,
                                     std::uint64_t slots, std::uint64_t seed) {
    net::CountTable table;
    const auto pairs = analysis::standard_chsh_pairs_deg();
    const std::uint64_t share = slots / pairs.size();
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        net::FringePolicy policy;
        policy.basis = pairs[k].first == 0.0 ? 'z' : 'x';
        policy.theta_b_deg = {pairs[k].second};
        const auto schedule = net::RoutingSchedule::single(users.first, users.second, share);
        const auto run = net::run_slots(config, schedule, policy, share,
                                        derive_seed(seed, "chsh.pair." + std::to_string(k)));
        for (const auto& r : run.records) table.add(r);
    }
    return table;
}

int cmd_chsh(const ChshOpts& o) {
    const auto config = load_config(o.common);
    const auto users = parse_pair(o.pair);
    if (o.slots < 4) throw usage_error("--slots too small");

    const auto table = run_chsh_measurement(config, users, o.slots, o.common.seed);
    for (const auto& p : analysis::standard_chsh_pairs_deg()) {
        const auto it = table.cells.find(p);
        const std::uint64_t got =
            it == table.cells.end()
                ? 0
                : it->second[0][0] + it->second[0][1] + it->second[1][0] + it->second[1][1];
        if (got < 1000)
            throw usage_error("only " + std::to_string(got) + " coincidences at (" +
                              analysis::fmt_real(p.first) + ", " + analysis::fmt_real(p.second) +
                              ") deg, need 1000; raise --slots");
    }
    const auto est =
        analysis::chsh_estimate(table, derive_seed(o.common.seed, "chsh.boot"), o.resamples);

    if (!o.common.out.empty()) analysis::write_correlation_csv(o.common.out, table);

    std::cout << "pair = " << users.first.name() << ":" << users.second.name() << "\n";
    std::cout << "coincidences = " << est.total << "\n";
    for (std::size_t k = 0; k < est.e.size(); ++k) {
        const auto pairs = analysis::standard_chsh_pairs_deg();
        std::cout << "e_" << analysis::fmt_real(pairs[k].first) << "_"
                  << analysis::fmt_real(pairs[k].second) << " = "
                  << analysis::fmt_real(est.e[k]) << "\n";
    }
    std::cout << "s = " << analysis::fmt_real(est.s) << "\n";
    std::cout << "s_std = " << analysis::fmt_real(est.std_dev) << "\n";
    std::cout << "violation = " << (est.violates() ? "yes" : "no") << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// qkd
// ---------------------------------------------------------------------------

struct QkdOpts {
    CommonOpts common;
    std::string pair = "A1:B1";
    std::string key_out;
    qkd::SessionParams params;
};

int cmd_qkd(const QkdOpts& o) {
    const auto config = load_config(o.common);
    const auto users = parse_pair(o.pair);
    if (o.params.target_sifted_bits < 8192)
        throw usage_error("--target-sifted must be >= 8192 (two reconciliation blocks)");

    const auto report = qkd::run_qkd_session(config, users.first, users.second, o.params,
                                             derive_seed(o.common.seed, "qkd." + o.pair));
    qkd::write_report_text(std::cout, report);

    if (!o.common.out.empty()) {
        std::ostringstream csv;
        qkd::write_report_csv(csv, report);
        write_file(o.common.out, csv.str());
    }
    if (!o.key_out.empty() && report.status == qkd::SessionStatus::ok) {
        std::ostringstream key;
        qkd::write_key_hex(key, report.final_key);
        write_file(o.key_out, key.str());
    }
    return report.status == qkd::SessionStatus::ok ? 0 : 3;
}

// ---------------------------------------------------------------------------
// secure-sum
// ---------------------------------------------------------------------------

struct SecureSumOpts {
    CommonOpts common;
    std::string ring = "A1,B1,A2,B2";
    std::string values = "A1=55406,B1=116559,A2=988150,B2=2839885";
    int rounds = 1;
    int bits = 25;
    std::string transport = "inproc";
    std::string sums_out;
    std::vector<std::string> key_files;
    std::string session = "secure-sum";
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(text);
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::map<std::string, std::uint64_t> parse_values(const std::string& text) {
    std::map<std::string, std::uint64_t> out;
    for (const auto& item : split_list(text)) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw usage_error("values must look like NAME=INT, got '" + item + "'");
        try {
            std::size_t used = 0;
            const auto v = std::stoull(item.substr(eq + 1), &used);
            if (used != item.size() - eq - 1) throw std::invalid_argument(item);
            out[item.substr(0, eq)] = v;
        } catch (const std::exception&) {
            throw usage_error("bad value in '" + item + "'");
        }
    }
    return out;
}

int cmd_secure_sum(const SecureSumOpts& o) {
    securesum::RingTopology ring{split_list(o.ring)};
    ring.validate();
    if (o.rounds < 1) throw usage_error("--rounds must be >= 1");
    if (o.transport != "inproc" && o.transport != "socket")
        throw usage_error("--transport must be inproc or socket");

    const auto single = parse_values(o.values);
    std::map<std::string, std::vector<std::uint64_t>> values;
    for (const auto& member : ring.members) {
        const auto it = single.find(member);
        if (it == single.end()) throw usage_error("no value for ring member '" + member + "'");
        values[member] = std::vector<std::uint64_t>(static_cast<std::size_t>(o.rounds),
                                                    it->second);
    }
    if (single.size() != ring.members.size())
        throw usage_error("values name parties outside the ring");

    const auto mask = securesum::modulus_mask(o.bits);
    std::uint64_t plain_sum = 0;
    bool over = false;
    for (const auto& [who, v] : single) {
        if (v > mask) throw usage_error("value for '" + who + "' exceeds the word size");
        over |= __builtin_add_overflow(plain_sum, v, &plain_sum);
    }
    if (over || plain_sum > mask)
        std::cerr << "warning: inputs sum past 2^" << o.bits << ", totals wrap around\n";

    std::unique_ptr<securesum::KeySource> keys;
    if (o.key_files.empty()) {
        const auto bits_per_edge =
            static_cast<std::size_t>(o.rounds) * static_cast<std::size_t>(o.bits);
        keys = std::make_unique<securesum::SeededKeySource>(
            derive_seed(o.common.seed, "secure-sum.pads"), bits_per_edge);
    } else {
        std::map<std::string, BitVec> material;
        for (const auto& entry : o.key_files) {
            const auto eq = entry.find('=');
            if (eq == std::string::npos)
                throw usage_error("--key-file wants EDGE=PATH, got '" + entry + "'");
            material[entry.substr(0, eq)] =
                BitVec::from_hex(trim_eol(read_file(entry.substr(eq + 1))));
        }
        keys = std::make_unique<securesum::MapKeySource>(std::move(material));
    }

    const auto result = securesum::run_protocol(ring, values, o.bits, *keys, o.session,
                                                o.transport == "socket");
    const auto& transcript = result.by_party.at(ring.members.front());
    for (const auto& [id, t] : result.by_party)
        if (t.totals != transcript.totals)
            throw protocol_violation_error("parties disagree on totals");

    if (!o.common.out.empty()) {
        std::ostringstream csv;
        securesum::write_announcements_csv(csv, transcript);
        write_file(o.common.out, csv.str());
    }
    if (!o.sums_out.empty()) {
        std::ostringstream csv;
        securesum::write_sums_csv(csv, transcript);
        write_file(o.sums_out, csv.str());
    }

    std::cout << "ring = " << o.ring << "\n";
    std::cout << "bits = " << o.bits << "\n";
    std::cout << "rounds = " << o.rounds << "\n";
    std::cout << "transport = " << o.transport << "\n";
    for (const auto& r : transcript.totals) std::cout << "t_" << r.round << " = " << r.t << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// demo-paper
// ---------------------------------------------------------------------------

struct DemoOpts {
    CommonOpts common;
    std::string transport = "inproc";
    std::string manifest;  // defaults to <out>/manifest.json
};

int cmd_demo(const DemoOpts& o) {
    if (o.transport != "inproc" && o.transport != "socket")
        throw usage_error("--transport must be inproc or socket");
    const std::string out_dir = o.common.out.empty() ? "demo-out" : o.common.out;
    const std::string manifest_path =
        o.manifest.empty() ? out_dir + "/manifest.json" : o.manifest;

    // An existing manifest replays its recorded seed and configuration so
    // the fresh output tree can be checked byte for byte against it.
    std::uint64_t seed = o.common.seed;
    std::string transport = o.transport;
    net::NetworkConfig config = load_config(o.common);
    json previous;
    bool verifying = false;
    if (fs::exists(manifest_path)) {
        try {
            previous = json::parse(read_file(manifest_path));
        } catch (const json::exception& e) {
            throw io_error("bad manifest '" + manifest_path + "': " + e.what());
        }
        verifying = true;
        seed = previous.value("seed", seed);
        transport = previous.value("transport", transport);
        if (previous.contains("config"))
            config = cfg::parse_network_config(previous["config"].get<std::string>());
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw io_error("cannot create '" + out_dir + "': " + ec.message());

    std::vector<std::string> written;
    std::ostringstream summary;
    const auto emit = [&](const std::string& name, const std::string& content) {
        write_file(out_dir + "/" + name, content);
        written.push_back(name);
    };

    emit("config.txt", cfg::serialize_network_config(config));

    // Fringe scans in both bases and CHSH for each of the four routed pairs.
    const std::vector<std::pair<std::string, std::string>> pairs = {
        {"A1B1", "A1:B1"}, {"A1B2", "A1:B2"}, {"A2B1", "A2:B1"}, {"A2B2", "A2:B2"}};
    for (const auto& [tag, pair_text] : pairs) {
        const auto users = parse_pair(pair_text);
        double vis_z = 0.0, vis_x = 0.0;
        for (const char basis : {'z', 'x'}) {
            const auto run =
                run_fringe_scan(config, users, basis, 4'000'000,
                                derive_seed(seed, "demo.fringe." + tag + "." + basis));
            const auto points =
                analysis::fringe_points(net::CountTable::from_records(run.records));
            const auto fit = analysis::fit_fringe(points);
            (basis == 'z' ? vis_z : vis_x) = fit.visibility;
            std::ostringstream csv;
            analysis::write_fringe_csv(csv, points);
            emit("fringe_" + tag + "_" + basis + ".csv", csv.str());
            summary << "fringe_" << tag << "_visibility_" << basis << " = "
                    << analysis::fmt_real(fit.visibility) << "\n";
        }
        summary << "fidelity_bound_" << tag << " = "
                << analysis::fmt_real(analysis::fidelity_bound(vis_z, vis_x)) << "\n";

        const auto chsh_table =
            run_chsh_measurement(config, users, 8'000'000, derive_seed(seed, "demo.chsh." + tag));
        const auto chsh =
            analysis::chsh_estimate(chsh_table, derive_seed(seed, "demo.chsh.boot." + tag));
        std::ostringstream csv;
        analysis::write_correlation_csv(csv, chsh_table);
        emit("chsh_" + tag + ".csv", csv.str());
        summary << "chsh_" << tag << "_s = " << analysis::fmt_real(chsh.s) << "\n";
        summary << "chsh_" << tag << "_std = " << analysis::fmt_real(chsh.std_dev) << "\n";
        summary << "chsh_" << tag << "_violation = " << (chsh.violates() ? "yes" : "no") << "\n";
    }

    // One QKD session per ring edge.
    const securesum::RingTopology ring{{"A1", "B1", "A2", "B2"}};
    const std::vector<std::pair<std::string, std::string>> edge_pairs = {
        {"A1-B1", "A1:B1"}, {"B1-A2", "A2:B1"}, {"A2-B2", "A2:B2"}, {"B2-A1", "A1:B2"}};
    std::map<std::string, BitVec> edge_keys;
    bool all_sessions_ok = true;
    for (const auto& [edge, pair_text] : edge_pairs) {
        const auto users = parse_pair(pair_text);
        qkd::SessionParams params;
        const auto report = qkd::run_qkd_session(config, users.first, users.second, params,
                                                 derive_seed(seed, "demo.qkd." + edge));
        std::ostringstream csv;
        qkd::write_report_csv(csv, report);
        emit("qkd_" + edge + ".csv", csv.str());
        summary << "qkd_" << edge << "_status = " << qkd::to_string(report.status) << "\n";
        summary << "qkd_" << edge << "_sifted = " << report.sifted_bits << "\n";
        summary << "qkd_" << edge << "_gamma = " << analysis::fmt_real(report.gamma) << "\n";
        if (report.chsh)
            summary << "qkd_" << edge << "_s = " << analysis::fmt_real(report.chsh->s) << "\n";
        summary << "qkd_" << edge << "_reconciled = " << report.reconciled_bits << "\n";
        summary << "qkd_" << edge << "_final = " << report.final_bits << "\n";
        summary << "qkd_" << edge << "_keys_match = " << (report.keys_match ? "yes" : "no")
                << "\n";
        if (report.status != qkd::SessionStatus::ok) {
            all_sessions_ok = false;
            continue;
        }
        std::ostringstream key;
        qkd::write_key_hex(key, report.final_key);
        emit("qkd_" + edge + ".key", key.str());
        edge_keys[edge] = report.final_key;
    }
    if (!all_sessions_ok) {
        emit("summary.txt", summary.str());
        std::cout << summary.str();
        std::cerr << "demo aborted: a QKD session failed\n";
        return 3;
    }

    // Secure sum over the QKD keys: thirty rounds of the same four inputs.
    const int rounds = 30, bits = 25;
    std::map<std::string, std::vector<std::uint64_t>> values;
    const std::map<std::string, std::uint64_t> inputs = {
        {"A1", 55406}, {"B1", 116559}, {"A2", 988150}, {"B2", 2839885}};
    for (const auto& [who, v] : inputs)
        values[who] = std::vector<std::uint64_t>(rounds, v);

    securesum::MapKeySource keys{std::map<std::string, BitVec>(edge_keys)};
    const auto result = securesum::run_protocol(ring, values, bits, keys, "demo-paper",
                                                transport == "socket");
    const auto& transcript = result.by_party.at("A1");
    {
        std::ostringstream csv;
        securesum::write_announcements_csv(csv, transcript);
        emit("announcements.csv", csv.str());
    }
    {
        std::ostringstream csv;
        securesum::write_sums_csv(csv, transcript);
        emit("sums.csv", csv.str());
    }
    std::uint64_t expected = 0;
    for (const auto& [who, v] : inputs) expected += v;
    bool sums_ok = true;
    for (const auto& r : transcript.totals) sums_ok &= r.t == expected;
    summary << "secure_sum_rounds = " << rounds << "\n";
    summary << "secure_sum_t = " << transcript.totals.front().t << "\n";
    summary << "secure_sum_all_match = " << (sums_ok ? "yes" : "no") << "\n";

    std::vector<std::uint64_t> xs;
    for (const auto& a : transcript.announcements) xs.push_back(a.x);
    const auto audit = securesum::privacy_audit(xs, bits);
    summary << "announce_chi2_p = " << analysis::fmt_real(audit.uniformity.p_value) << "\n";
    summary << "announce_ones_fraction = " << analysis::fmt_real(audit.ones_fraction) << "\n";

    emit("summary.txt", summary.str());
    std::cout << summary.str();

    // Manifest: the run recipe (seed, transport, config snapshot) plus a
    // content hash per output file. A rerun against an existing manifest
    // replays the recipe and must land on the same hashes.
    json manifest;
    manifest["subcommand"] = "demo-paper";
    manifest["seed"] = seed;
    manifest["transport"] = transport;
    manifest["config"] = cfg::serialize_network_config(config);
    manifest["files"] = json::array();
    for (const auto& name : written)
        manifest["files"].push_back(
            {{"path", name}, {"fnv1a64", hash_hex(read_file(out_dir + "/" + name))}});

    if (verifying) {
        std::map<std::string, std::string> old_hashes;
        for (const auto& f : previous.value("files", json::array()))
            old_hashes[f.value("path", "")] = f.value("fnv1a64", "");
        bool match = true;
        for (const auto& f : manifest["files"]) {
            const auto it = old_hashes.find(f["path"]);
            const bool same = it != old_hashes.end() && it->second == f["fnv1a64"];
            if (!same) {
                std::cerr << "manifest mismatch: " << f["path"] << "\n";
                match = false;
            }
        }
        if (old_hashes.size() != manifest["files"].size()) match = false;
        std::cout << "manifest_check = " << (match ? "match" : "mismatch") << "\n";
        if (!match) return 1;
    } else {
        write_file(manifest_path, manifest.dump(2) + "\n");
        std::cout << "manifest_written = " << manifest_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale entanglement access network simulator"};
    app.require_subcommand(1);

    FringeOpts fringe_opts;
    auto* fringe = app.add_subcommand("fringe", "polarization fringe scan");
    add_common(fringe, fringe_opts.common);
    fringe->add_option("--pair", fringe_opts.pair, "routed users, e.g. A1:B1")
        ->capture_default_str();
    fringe->add_option("--basis", fringe_opts.basis, "fixed analyzer basis: z or x")
        ->capture_default_str();
    fringe->add_option("--slots", fringe_opts.slots, "pump slots to simulate")
        ->capture_default_str();

    ChshOpts chsh_opts;
    auto* chsh = app.add_subcommand("chsh", "CHSH measurement");
    add_common(chsh, chsh_opts.common);
    chsh->add_option("--pair", chsh_opts.pair, "routed users")->capture_default_str();
    chsh->add_option("--slots", chsh_opts.slots, "pump slots across all four settings")
        ->capture_default_str();
    chsh->add_option("--resamples", chsh_opts.resamples, "bootstrap resamples")
        ->capture_default_str();

    QkdOpts qkd_opts;
    auto* qkd_cmd = app.add_subcommand("qkd", "one QKD session");
    add_common(qkd_cmd, qkd_opts.common);
    qkd_cmd->add_option("--pair", qkd_opts.pair, "routed users")->capture_default_str();
    qkd_cmd->add_option("--key-out", qkd_opts.key_out, "write the final key as hex");
    qkd_cmd->add_option("--target-sifted", qkd_opts.params.target_sifted_bits,
                        "sifted bits to collect")
        ->capture_default_str();
    qkd_cmd->add_option("--block-len", qkd_opts.params.block_len, "reconciliation block length")
        ->capture_default_str();

    SecureSumOpts sum_opts;
    auto* sum = app.add_subcommand("secure-sum", "N-party masked summation");
    add_common(sum, sum_opts.common);
    sum->add_option("--ring", sum_opts.ring, "ring order, comma separated")
        ->capture_default_str();
    sum->add_option("--values", sum_opts.values, "NAME=INT pairs, comma separated")
        ->capture_default_str();
    sum->add_option("--rounds", sum_opts.rounds, "protocol rounds")->capture_default_str();
    sum->add_option("--bits", sum_opts.bits, "word size in bits")->capture_default_str();
    sum->add_option("--transport", sum_opts.transport, "inproc or socket")
        ->capture_default_str();
    sum->add_option("--sums-out", sum_opts.sums_out, "write totals CSV here");
    sum->add_option("--key-file", sum_opts.key_files,
                    "EDGE=PATH hex key material (repeatable); seeded pads otherwise");
    sum->add_option("--session", sum_opts.session, "session identifier")->capture_default_str();

    DemoOpts demo_opts;
    auto* demo = app.add_subcommand("demo-paper", "end-to-end network demonstration");
    add_common(demo, demo_opts.common);
    demo->add_option("--transport", demo_opts.transport, "inproc or socket")
        ->capture_default_str();
    demo->add_option("--manifest", demo_opts.manifest,
                     "manifest path (default <out>/manifest.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(fringe)) return cmd_fringe(fringe_opts);
        if (app.got_subcommand(chsh)) return cmd_chsh(chsh_opts);
        if (app.got_subcommand(qkd_cmd)) return cmd_qkd(qkd_opts);
        if (app.got_subcommand(sum)) return cmd_secure_sum(sum_opts);
        if (app.got_subcommand(demo)) return cmd_demo(demo_opts);
        throw usage_error("no subcommand selected");
    } catch (const usage_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const session_abort_error& e) {
        std::cerr << "abort: " << e.what() << "\n";
        return 3;
    } catch (const protocol_violation_error& e) {
        std::cerr << "abort: " << e.what() << "\n";
        return 3;
    } catch (const channel_closed_error& e) {
        std::cerr << "abort: " << e.what() << "\n";
        return 3;
    } catch (const key_exhausted_error& e) {
        std::cerr << "abort: " << e.what() << "\n";
        return 3;
    } catch (const pad_reuse_error& e) {
        std::cerr << "abort: " << e.what() << "\n";
        return 3;
    } catch (const insufficient_key_error& e) {
        std::cerr << "abort: " << e.what() << "\n";
        return 3;
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
