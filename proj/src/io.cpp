#include "asmcmc/io.hpp"

#include "asmcmc/errors.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace asmcmc {

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void write_csv_matrix(const std::string& path, const Matrix& m,
                      const std::vector<std::string>& header) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot open for writing: " + path);
    if (!header.empty()) {
        for (std::size_t j = 0; j < header.size(); ++j)
            out << (j ? "," : "") << header[j];
        out << '\n';
    }
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j)
            out << (j ? "," : "") << format_double(m(i, j));
        out << '\n';
    }
}

Matrix read_csv_matrix(const std::string& path, bool expect_header) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open: " + path);
    std::vector<Vec> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && expect_header) continue;
        if (line.empty()) continue;
        Vec row;
        std::stringstream ss(line);
        std::string cell;
        bool parse_failed = false;
        while (std::getline(ss, cell, ',')) {
            std::size_t consumed = 0;
            double value = 0.0;
            try {
                value = std::stod(cell, &consumed);
            } catch (const std::exception&) {
                parse_failed = true;
            }
            if (!parse_failed && consumed < cell.size() &&
                cell.find_first_not_of(" \t\r", consumed) != std::string::npos)
                parse_failed = true;
            if (parse_failed) break;
            row.push_back(value);
        }
        if (parse_failed) {
            // A non-numeric first line is a header; anywhere else it is an error.
            if (lineno == 1) continue;
            throw config_error(path + ": malformed value at line " + std::to_string(lineno) +
                               ": '" + cell + "'");
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw config_error(path + ": ragged row at line " + std::to_string(lineno));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
}

void write_csv_vector(const std::string& path, const Vec& v, const std::string& header) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot open for writing: " + path);
    if (!header.empty()) out << header << '\n';
    for (double x : v) out << format_double(x) << '\n';
}

Vec read_csv_vector(const std::string& path) {
    const Matrix m = read_csv_matrix(path);
    Vec v;
    v.reserve(m.rows() * m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) v.push_back(m(i, j));
    return v;
}

void refuse_overwrite(const std::string& path, bool force) {
    if (!force && std::filesystem::exists(path))
        throw config_error("output exists, pass --force to overwrite: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot open for writing: " + path);
    out << content;
}

} // namespace asmcmc
