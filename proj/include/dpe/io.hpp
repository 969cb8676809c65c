#pragma once

#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <string>
#include <string_view>
#include <initializer_list>
#include <type_traits>
#include <vector>

#include "dpe/error.hpp"

namespace dpe::io {

/// 17 significant digits: parsing the text gives back the same double.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::vector<std::string> split(std::string_view line, char sep = ',') {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

inline double parse_double(std::string_view text, std::string_view what) {
    const std::string s = trim(text);
    if (s.empty()) throw StructuralError("empty numeric field for " + std::string(what));
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size())
        throw StructuralError("cannot parse '" + s + "' as a number for " + std::string(what));
    return v;
}

/// Comma separated list of numbers, e.g. "1, 0.5, 2".
inline std::vector<double> parse_double_list(std::string_view text, std::string_view what) {
    std::vector<double> out;
    if (trim(text).empty()) return out;
    for (const auto& field : split(text, ',')) out.push_back(parse_double(field, what));
    return out;
}

/// Writes one CSV row; doubles are written with format_double.
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}

    CsvWriter& header(std::initializer_list<std::string_view> cols) {
        bool first = true;
        for (auto c : cols) {
            if (!first) os_ << ',';
            os_ << c;
            first = false;
        }
        os_ << '\n';
        return *this;
    }

    template <class... Fields>
    CsvWriter& row(const Fields&... fields) {
        bool first = true;
        ((write_field(fields, first)), ...);
        os_ << '\n';
        return *this;
    }

private:
    void sep(bool& first) {
        if (!first) os_ << ',';
        first = false;
    }
    void write_field(double v, bool& first) {
        sep(first);
        os_ << format_double(v);
    }
    void write_field(std::string_view v, bool& first) {
        sep(first);
        os_ << v;
    }
    void write_field(const std::string& v, bool& first) { write_field(std::string_view(v), first); }
    void write_field(const char* v, bool& first) { write_field(std::string_view(v), first); }
    template <class I>
        requires std::is_integral_v<I>
    void write_field(I v, bool& first) {
        sep(first);
        os_ << v;
    }

    std::ostream& os_;
};

} // namespace dpe::io
