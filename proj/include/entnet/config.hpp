#pragma once

#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "entnet/errors.hpp"
#include "entnet/network.hpp"

// Plain key-value config files: one `key = value` per line, '#' comments,
// keys matching the NetworkConfig field names.
namespace entnet::cfg {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::map<std::string, std::string> parse_key_values(std::istream& in,
                                                           const std::string& what) {
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw io_error(what + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw io_error(what + ":" + std::to_string(lineno) + ": empty key");
        if (kv.count(key))
            throw io_error(what + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv[key] = value;
    }
    return kv;
}

namespace detail {

inline double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return d;
    } catch (const std::exception&) {
        throw io_error("config: bad number for '" + key + "': '" + value + "'");
    }
}

inline int to_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw io_error("config: bad integer for '" + key + "': '" + value + "'");
    }
}

// "x y z" triple of degrees.
inline net::RotationAngles to_rotation(const std::string& key, const std::string& value) {
    std::istringstream ss(value);
    net::RotationAngles r;
    if (!(ss >> r.x_deg >> r.y_deg >> r.z_deg))
        throw io_error("config: '" + key + "' wants three angles, got '" + value + "'");
    std::string rest;
    if (ss >> rest)
        throw io_error("config: trailing text after '" + key + "': '" + rest + "'");
    return r;
}

}  // namespace detail

inline net::NetworkConfig network_config_from_kv(const std::map<std::string, std::string>& kv) {
    net::NetworkConfig c;
    for (const auto& [key, value] : kv) {
        if (key == "fiber_length_km_a")
            c.fiber_length_km_a = detail::to_double(key, value);
        else if (key == "fiber_length_km_b")
            c.fiber_length_km_b = detail::to_double(key, value);
        else if (key == "attenuation_db_per_km")
            c.attenuation_db_per_km = detail::to_double(key, value);
        else if (key == "switch_insertion_loss_db")
            c.switch_insertion_loss_db = detail::to_double(key, value);
        else if (key == "ports_per_side")
            c.ports_per_side = detail::to_int(key, value);
        else if (key == "pulse_rate_hz")
            c.pulse_rate_hz = detail::to_double(key, value);
        else if (key == "pair_gen_prob_per_pulse")
            c.pair_gen_prob_per_pulse = detail::to_double(key, value);
        else if (key == "source_fidelity")
            c.source_fidelity = detail::to_double(key, value);
        else if (key == "source_phase_deg")
            c.source_phase_deg = detail::to_double(key, value);
        else if (key == "detector_efficiency")
            c.detector_efficiency = detail::to_double(key, value);
        else if (key == "dark_count_prob_per_slot")
            c.dark_count_prob_per_slot = detail::to_double(key, value);
        else if (key == "residual_rotation_default") {
            if (value == "pattern")
                c.residual_default = net::ResidualDefault::pattern;
            else if (value == "none")
                c.residual_default = net::ResidualDefault::none;
            else
                throw io_error("config: residual_rotation_default must be pattern or none");
        } else if (key.rfind("residual_rotation_", 0) == 0) {
            const std::string who = key.substr(std::string("residual_rotation_").size());
            if (who.size() < 2 || (who[0] != 'a' && who[0] != 'b'))
                throw io_error("config: unknown key '" + key + "'");
            const int port = detail::to_int(key, who.substr(1));
            const char side = static_cast<char>(std::toupper(static_cast<unsigned char>(who[0])));
            c.residual_overrides[{side, port}] = detail::to_rotation(key, value);
        } else {
            throw io_error("config: unknown key '" + key + "'");
        }
    }
    c.validate();
    for (const auto& [who, r] : c.residual_overrides)
        if (who.second < 1 || who.second > c.ports_per_side)
            throw io_error("config: residual rotation port out of range");
    return c;
}

inline net::NetworkConfig load_network_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config file '" + path + "'");
    return network_config_from_kv(parse_key_values(in, path));
}

inline net::NetworkConfig parse_network_config(const std::string& text,
                                               const std::string& what = "<config>") {
    std::istringstream in(text);
    return network_config_from_kv(parse_key_values(in, what));
}

inline std::string serialize_network_config(const net::NetworkConfig& c) {
    std::ostringstream out;
    out.precision(17);
    out << "fiber_length_km_a = " << c.fiber_length_km_a << "\n";
    out << "fiber_length_km_b = " << c.fiber_length_km_b << "\n";
    out << "attenuation_db_per_km = " << c.attenuation_db_per_km << "\n";
    out << "switch_insertion_loss_db = " << c.switch_insertion_loss_db << "\n";
    out << "ports_per_side = " << c.ports_per_side << "\n";
    out << "pulse_rate_hz = " << c.pulse_rate_hz << "\n";
    out << "pair_gen_prob_per_pulse = " << c.pair_gen_prob_per_pulse << "\n";
    out << "source_fidelity = " << c.source_fidelity << "\n";
    out << "source_phase_deg = " << c.source_phase_deg << "\n";
    out << "detector_efficiency = " << c.detector_efficiency << "\n";
    out << "dark_count_prob_per_slot = " << c.dark_count_prob_per_slot << "\n";
    out << "residual_rotation_default = "
        << (c.residual_default == net::ResidualDefault::pattern ? "pattern" : "none") << "\n";
    for (const auto& [who, r] : c.residual_overrides)
        out << "residual_rotation_" << static_cast<char>(std::tolower(who.first)) << who.second
            << " = " << r.x_deg << " " << r.y_deg << " " << r.z_deg << "\n";
    return out.str();
}

}  // namespace entnet::cfg
