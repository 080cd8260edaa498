#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "walkcause/common.hpp"

namespace walkcause {

// RFC 4180 CSV: comma separated, double-quote quoting, CRLF records.
// Numbers are formatted with the shortest round-trip representation so that
// write -> read is lossless and output bytes are deterministic.

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{}) throw ParseError("not a number: '" + std::string(s) + "'");
    for (const char* p = res.ptr; p < last; ++p) {
        if (*p != ' ' && *p != '\t') {
            throw ParseError("trailing characters in number: '" + std::string(s) + "'");
        }
    }
    return v;
}

inline long parse_long(std::string_view s) {
    long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ParseError("not an integer: '" + std::string(s) + "'");
    }
    return v;
}

inline std::string csv_escape(std::string_view field) {
    const bool needs_quote = field.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!needs_quote) return std::string(field);
    std::string out;
    out.reserve(field.size() + 2);
    out.push_back('"');
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

class CsvWriter {
  public:
    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << csv_escape(fields[i]);
        }
        out_ << "\r\n";
    }

    std::string str() const { return out_.str(); }

  private:
    std::ostringstream out_;
};

/// Parses CSV text into rows of fields. Accepts CRLF or LF line endings.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t i = 0;
    const std::size_t n = text.size();
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };
    while (i < n) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < n && text[i + 1] == '"') {
                    field.push_back('"');
                    i += 2;
                } else {
                    in_quotes = false;
                    ++i;
                }
            } else {
                field.push_back(c);
                ++i;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field.empty() && !field_started) {
                    in_quotes = true;
                } else {
                    field.push_back(c);
                }
                field_started = true;
                ++i;
                break;
            case ',':
                end_field();
                ++i;
                break;
            case '\r':
                if (i + 1 < n && text[i + 1] == '\n') ++i;
                end_row();
                ++i;
                break;
            case '\n':
                end_row();
                ++i;
                break;
            default:
                field.push_back(c);
                field_started = true;
                ++i;
        }
    }
    if (in_quotes) throw ParseError("unterminated quoted CSV field");
    if (field_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace walkcause
