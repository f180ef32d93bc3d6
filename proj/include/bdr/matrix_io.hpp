#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace bdr {

/// Dense CSV, row-major. Lines starting with '#' are comments; a non-numeric
/// first row is treated as a header and skipped on load.
Eigen::MatrixXd load_csv(const std::filesystem::path& path);

/// Writes a matrix as CSV with full double precision. Optional header row and
/// leading comment lines (written with a '#' prefix).
void save_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
              const std::vector<std::string>& header = {},
              const std::vector<std::string>& comments = {});

/// Binary matrix format: magic bytes "BDR1", little-endian u64 rows, u64 cols,
/// then rows*cols f64 values row-major.
Eigen::MatrixXd load_bdr1(const std::filesystem::path& path);
void save_bdr1(const std::filesystem::path& path, const Eigen::MatrixXd& m);

/// Dispatches on the BDR1 magic, falling back to CSV.
Eigen::MatrixXd load_matrix(const std::filesystem::path& path);

/// Formats a double with enough digits to round-trip exactly.
std::string format_double(double v);

}  // namespace bdr
