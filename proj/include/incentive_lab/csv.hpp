#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "incentive_lab/error.hpp"

namespace incentive_lab::csv {

// Minimal CSV: comma separated, no quoting. All fields we emit are
// identifiers or numbers.

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        auto b = field.find_first_not_of(" \t\r");
        auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

template <class... Ts>
void write_row(std::ostream& os, const Ts&... fields) {
    bool first = true;
    ((os << (first ? "" : ",") << fields, first = false), ...);
    os << '\n';
}

/// A parsed table with header lookup.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        fail(ErrorCode::MissingColumn, "missing column: " + name);
    }
    bool has_column(const std::string& name) const {
        for (const auto& h : header)
            if (h == name) return true;
        return false;
    }
};

inline Table read(std::istream& is) {
    Table t;
    std::string line;
    if (!std::getline(is, line)) fail(ErrorCode::ParseError, "empty csv");
    t.header = split_line(line);
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto row = split_line(line);
        if (row.size() != t.header.size())
            fail(ErrorCode::ParseError, "csv line " + std::to_string(lineno) + ": expected " +
                                            std::to_string(t.header.size()) + " fields, got " +
                                            std::to_string(row.size()));
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path);
    return read(in);
}

}  // namespace incentive_lab::csv
