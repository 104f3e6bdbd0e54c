#pragma once

#include "asmcmc/linalg.hpp"

#include <string>
#include <vector>

namespace asmcmc {

/// Shortest round-trip decimal for a double ("%.17g"), so rewritten files
/// are byte-identical across runs.
std::string format_double(double x);

void write_csv_matrix(const std::string& path, const Matrix& m,
                      const std::vector<std::string>& header = {});
Matrix read_csv_matrix(const std::string& path, bool expect_header = false);

void write_csv_vector(const std::string& path, const Vec& v, const std::string& header = "");
Vec read_csv_vector(const std::string& path);

/// Throws config_error if `path` exists and `force` is false.
void refuse_overwrite(const std::string& path, bool force);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

} // namespace asmcmc
