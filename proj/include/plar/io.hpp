#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "model.hpp"

namespace plar {

/// 17 significant digits round-trip doubles exactly, so emitted files are
/// byte-comparable across reruns.
inline std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
}

/// JSON numeric field; non-finite values have no JSON literal and map to null.
inline std::string json_number(double x) {
    return std::isfinite(x) ? format_g17(x) : std::string("null");
}

inline std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

inline bool parse_double_token(const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    const auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc() && res.ptr == end;
}

inline bool parse_int_token(const std::string& s, long long& out) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    const auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc() && res.ptr == end;
}

inline bool parse_uint_token(const std::string& s, unsigned long long& out) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    const auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc() && res.ptr == end;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

}  // namespace detail

/// Reads the `t,y,observed` series format: t contiguous from 1, observed in
/// {0,1}, y required and nonnegative on observed rows, ignored otherwise.
inline ObservationSet read_series_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open series file: " + path);
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != "t,y,observed")
        throw std::runtime_error(path + ": expected header 't,y,observed'");
    ObservationSet obs;
    long long expected_t = 1;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string row = detail::trim(line);
        if (row.empty()) continue;
        const std::vector<std::string> fields = detail::split(row, ',');
        if (fields.size() != 3)
            throw std::runtime_error(path + ": row " + std::to_string(lineno) +
                                     ": expected 3 fields, got " + std::to_string(fields.size()));
        long long t = 0;
        if (!detail::parse_int_token(detail::trim(fields[0]), t) || t != expected_t)
            throw std::runtime_error(path + ": row " + std::to_string(lineno) +
                                     ": t must be contiguous starting at 1 (expected " +
                                     std::to_string(expected_t) + ")");
        const std::string obs_field = detail::trim(fields[2]);
        if (obs_field != "0" && obs_field != "1")
            throw std::runtime_error(path + ": row " + std::to_string(lineno) +
                                     ": observed must be 0 or 1");
        const bool observed = obs_field == "1";
        double y = 0.0;
        if (observed) {
            const std::string y_field = detail::trim(fields[1]);
            if (!detail::parse_double_token(y_field, y) || !std::isfinite(y))
                throw std::runtime_error(path + ": row " + std::to_string(lineno) +
                                         ": observed row needs a finite y value");
            if (y < 0.0)
                throw std::runtime_error(path + ": row " + std::to_string(lineno) +
                                         ": y must be >= 0");
        }
        obs.mask.push_back(observed);
        obs.values.push_back(observed ? y : 0.0);
        ++expected_t;
    }
    if (obs.mask.empty()) throw std::runtime_error(path + ": no data rows");
    return obs;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace plar
