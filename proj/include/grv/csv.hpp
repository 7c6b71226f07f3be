#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "grv/errors.hpp"

namespace grv {

// Tabular numeric input: samples as rows, optional header row (auto-detected),
// optional leading ID column (caller-controlled flag). Delimiter is sniffed from
// the first line: tab if present, else comma.
struct Table {
    std::vector<std::string> row_ids;    // empty when the file has no ID column
    std::vector<std::string> col_names;  // empty when the file has no header
    Eigen::MatrixXd values;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_line(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == delim) {
            out.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

inline bool parse_double(std::string_view s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && !s.empty();
}

}  // namespace detail

inline Table read_table(const std::string& path, bool has_ids = false) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open input file: " + path);

    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        std::string_view sv = detail::trim(line);
        if (!sv.empty()) lines.emplace_back(sv);
    }
    if (lines.empty()) throw IoError("empty input file: " + path);

    const char delim = lines.front().find('\t') != std::string::npos ? '\t' : ',';

    Table t;
    std::size_t first_data = 0;
    {
        // Header detection: the first row is a header when any of its data cells
        // fails to parse as a number.
        auto cells = detail::split_line(lines.front(), delim);
        std::size_t data_start = has_ids ? 1 : 0;
        bool numeric = cells.size() > data_start;
        double tmp;
        for (std::size_t c = data_start; c < cells.size() && numeric; ++c)
            numeric = detail::parse_double(cells[c], tmp);
        if (!numeric) {
            first_data = 1;
            for (std::size_t c = data_start; c < cells.size(); ++c)
                t.col_names.emplace_back(cells[c]);
        }
    }
    if (first_data >= lines.size()) throw IoError("no data rows in " + path);

    auto first_cells = detail::split_line(lines[first_data], delim);
    const std::size_t ncols_total = first_cells.size();
    const std::size_t data_start = has_ids ? 1 : 0;
    if (ncols_total <= data_start)
        throw IoError("no data columns in " + path);
    const std::size_t ncols = ncols_total - data_start;
    const std::size_t nrows = lines.size() - first_data;

    t.values.resize(static_cast<Eigen::Index>(nrows), static_cast<Eigen::Index>(ncols));
    for (std::size_t r = 0; r < nrows; ++r) {
        auto cells = detail::split_line(lines[first_data + r], delim);
        if (cells.size() != ncols_total) {
            std::ostringstream msg;
            msg << path << ": row " << (r + 1) << " has " << cells.size()
                << " cells, expected " << ncols_total;
            throw IoError(msg.str());
        }
        if (has_ids) t.row_ids.emplace_back(cells[0]);
        for (std::size_t c = 0; c < ncols; ++c) {
            double v;
            if (!detail::parse_double(cells[data_start + c], v)) {
                std::ostringstream msg;
                msg << path << ": row " << (r + 1) << ", column " << (data_start + c + 1)
                    << ": not a number: '" << std::string(cells[data_start + c]) << "'";
                throw IoError(msg.str());
            }
            t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    }
    return t;
}

inline Eigen::MatrixXd read_dense_matrix(const std::string& path) {
    return read_table(path, false).values;
}

// Full-precision cell formatting so written matrices round-trip exactly.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_dense_matrix(const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open output file: " + path);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path);
}

}  // namespace grv
