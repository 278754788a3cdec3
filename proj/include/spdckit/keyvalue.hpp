#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "spdckit/common.hpp"

namespace spdckit {

/**
 * Minimal sectioned key-value file format used for the dispersion data file and
 * run configurations:
 *
 *   # full-line comment
 *   [section]
 *   key = value
 *
 * Values keep embedded commas and spaces verbatim (needed for citation strings),
 * so comments are recognized only at the start of a line. Section and key names
 * are case sensitive. Duplicate sections or duplicate keys within a section are
 * rejected, as are keys outside any section.
 */
struct KeyValueFile {
    std::string origin;                                             // file name for error messages
    std::vector<std::string> section_order;
    std::map<std::string, std::map<std::string, std::string>> sections;
    std::map<std::string, std::map<std::string, int>> key_lines;    // line numbers for diagnostics

    bool has_section(const std::string& s) const { return sections.count(s) != 0; }

    bool has_key(const std::string& s, const std::string& k) const {
        auto it = sections.find(s);
        return it != sections.end() && it->second.count(k) != 0;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

} // namespace detail

inline KeyValueFile parse_keyvalue(std::istream& in, const std::string& origin) {
    KeyValueFile kv;
    kv.origin = origin;
    std::string line;
    std::string current;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']' || t.size() < 3)
                throw config_error(origin + ":" + std::to_string(lineno) + ": malformed section header '" + t + "'");
            current = detail::trim(t.substr(1, t.size() - 2));
            if (current.empty())
                throw config_error(origin + ":" + std::to_string(lineno) + ": empty section name");
            if (kv.sections.count(current))
                throw config_error(origin + ":" + std::to_string(lineno) + ": duplicate section [" + current + "]");
            kv.sections[current];
            kv.section_order.push_back(current);
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw config_error(origin + ":" + std::to_string(lineno) + ": expected 'key = value', got '" + t + "'");
        if (current.empty())
            throw config_error(origin + ":" + std::to_string(lineno) + ": key outside any [section]");
        std::string key = detail::trim(t.substr(0, eq));
        std::string value = detail::trim(t.substr(eq + 1));
        if (key.empty())
            throw config_error(origin + ":" + std::to_string(lineno) + ": empty key name");
        auto& sec = kv.sections[current];
        if (sec.count(key))
            throw config_error(origin + ":" + std::to_string(lineno) + ": duplicate key '" + current + "." + key + "'");
        sec[key] = value;
        kv.key_lines[current][key] = lineno;
    }
    return kv;
}

inline KeyValueFile load_keyvalue(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open key-value file '" + path + "'");
    return parse_keyvalue(in, path);
}

inline const std::string& kv_get_string(const KeyValueFile& kv, const std::string& section,
                                        const std::string& key) {
    auto sit = kv.sections.find(section);
    if (sit == kv.sections.end())
        throw config_error(kv.origin + ": missing section [" + section + "]");
    auto kit = sit->second.find(key);
    if (kit == sit->second.end())
        throw config_error(kv.origin + ": missing key '" + section + "." + key + "'");
    return kit->second;
}

inline double kv_get_double(const KeyValueFile& kv, const std::string& section, const std::string& key) {
    const std::string& raw = kv_get_string(kv, section, key);
    try {
        std::size_t pos = 0;
        double v = std::stod(raw, &pos);
        if (detail::trim(raw.substr(pos)).size())
            throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw config_error(kv.origin + ": key '" + section + "." + key + "' is not a number: '" + raw + "'");
    }
}

inline long long kv_get_int(const KeyValueFile& kv, const std::string& section, const std::string& key) {
    const std::string& raw = kv_get_string(kv, section, key);
    try {
        std::size_t pos = 0;
        long long v = std::stoll(raw, &pos);
        if (detail::trim(raw.substr(pos)).size())
            throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw config_error(kv.origin + ": key '" + section + "." + key + "' is not an integer: '" + raw + "'");
    }
}

inline bool kv_get_bool(const KeyValueFile& kv, const std::string& section, const std::string& key) {
    const std::string& raw = kv_get_string(kv, section, key);
    if (raw == "true" || raw == "yes" || raw == "on" || raw == "1") return true;
    if (raw == "false" || raw == "no" || raw == "off" || raw == "0") return false;
    throw config_error(kv.origin + ": key '" + section + "." + key + "' is not a boolean: '" + raw + "'");
}

inline std::vector<double> kv_get_double_list(const KeyValueFile& kv, const std::string& section,
                                              const std::string& key) {
    const std::string& raw = kv_get_string(kv, section, key);
    std::vector<double> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = detail::trim(item);
        if (item.empty())
            throw config_error(kv.origin + ": key '" + section + "." + key + "' has an empty list element");
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (detail::trim(item.substr(pos)).size())
                throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw config_error(kv.origin + ": key '" + section + "." + key + "' has a non-numeric element: '" +
                               item + "'");
        }
    }
    if (out.empty())
        throw config_error(kv.origin + ": key '" + section + "." + key + "' is an empty list");
    return out;
}

} // namespace spdckit
