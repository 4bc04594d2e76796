#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>

#include "dropvision/error.hpp"

namespace dropvision {
namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// Chops an unquoted trailing comment.
inline std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

inline nlohmann::json parse_toml_scalar(const std::string& raw, int line_no) {
    const std::string v = trim(raw);
    require(!v.empty(), "config line " + std::to_string(line_no) + ": missing value");
    if (v.front() == '"') {
        require(v.size() >= 2 && v.back() == '"',
                "config line " + std::to_string(line_no) + ": unterminated string");
        std::string out;
        for (std::size_t i = 1; i + 1 < v.size(); ++i) {
            if (v[i] == '\\' && i + 2 < v.size()) {
                ++i;
                switch (v[i]) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                default:
                    throw Error("config line " + std::to_string(line_no) +
                                ": unsupported escape \\" + v[i]);
                }
            } else {
                out += v[i];
            }
        }
        return out;
    }
    if (v == "true") return true;
    if (v == "false") return false;
    try {
        std::size_t used = 0;
        if (v.find_first_of(".eE") == std::string::npos ||
            (v.size() > 1 && (v[1] == 'x' || v[1] == 'X'))) {
            const long long i = std::stoll(v, &used, 0);
            if (used == v.size()) return i;
        }
        const double d = std::stod(v, &used);
        require(used == v.size(),
                "config line " + std::to_string(line_no) + ": bad value '" + v + "'");
        return d;
    } catch (const Error&) {
        throw;
    } catch (...) {
        throw Error("config line " + std::to_string(line_no) + ": bad value '" + v + "'");
    }
}

inline nlohmann::json parse_toml_value(const std::string& raw, int line_no) {
    const std::string v = trim(raw);
    if (!v.empty() && v.front() == '[') {
        require(v.back() == ']',
                "config line " + std::to_string(line_no) + ": unterminated array");
        nlohmann::json arr = nlohmann::json::array();
        std::string body = v.substr(1, v.size() - 2);
        std::string item;
        bool in_string = false;
        for (const char c : body) {
            if (c == '"') in_string = !in_string;
            if (c == ',' && !in_string) {
                if (!trim(item).empty()) arr.push_back(parse_toml_scalar(item, line_no));
                item.clear();
            } else {
                item += c;
            }
        }
        if (!trim(item).empty()) arr.push_back(parse_toml_scalar(item, line_no));
        return arr;
    }
    return parse_toml_scalar(v, line_no);
}

} // namespace detail

// Flat-table TOML subset: [section.sub] headers, key = value pairs with
// strings, numbers, booleans and one-line arrays, # comments.
inline nlohmann::json parse_toml(std::istream& in) {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::trim(detail::strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            require(line.back() == ']' && line.size() > 2,
                    "config line " + std::to_string(line_no) + ": malformed table header");
            table = &root;
            std::string path = line.substr(1, line.size() - 2);
            std::size_t start = 0;
            while (true) {
                const std::size_t dot = path.find('.', start);
                const std::string part =
                    detail::trim(path.substr(start, dot == std::string::npos
                                                        ? std::string::npos
                                                        : dot - start));
                require(!part.empty(),
                        "config line " + std::to_string(line_no) + ": empty table name");
                table = &(*table)[part];
                if (!table->is_object()) *table = nlohmann::json::object();
                if (dot == std::string::npos) break;
                start = dot + 1;
            }
            continue;
        }
        const std::size_t eq = line.find('=');
        require(eq != std::string::npos,
                "config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        require(!key.empty(), "config line " + std::to_string(line_no) + ": empty key");
        (*table)[key] = detail::parse_toml_value(line.substr(eq + 1), line_no);
    }
    return root;
}

// Loads a configuration file, dispatching on extension: .json parses as JSON,
// anything else as the TOML subset above.
inline nlohmann::json load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "load_config_file: cannot open " + path.string());
    if (path.extension() == ".json") {
        try {
            return nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw Error("load_config_file: " + path.string() + ": " + e.what());
        }
    }
    return parse_toml(in);
}

} // namespace dropvision
