#pragma once

#include <Eigen/Core>
#include <string>

namespace redpca {

// Comma-separated numeric matrix; lines starting with '#' are skipped.
// Throws std::runtime_error on unreadable files or ragged rows.
Eigen::MatrixXd read_matrix_csv(const std::string& path);

// Write with 17 significant digits, atomically (temp file + rename).
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);

// Atomic whole-file text write.
void write_text_atomic(const std::string& path, const std::string& text);

// 17-significant-digit formatting used across all text output.
std::string format_double(double v);

}  // namespace redpca
