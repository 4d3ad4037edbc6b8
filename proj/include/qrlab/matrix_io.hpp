#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <span>
#include <string>

namespace qrlab::io {

/// Binary matrix container: the 4 bytes "QRLB", u32 rows, u32 cols, then
/// rows*cols little-endian f64 values in row-major order.
void write_qrlb(std::ostream& out, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_qrlb(std::istream& in);

void write_qrlb_file(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_qrlb_file(const std::string& path);

/// CSV with a header row `<prefix>1,...,<prefix>cols`. Values are written
/// with 17 significant digits so they parse back exactly.
void write_csv(std::ostream& out, const Eigen::MatrixXd& m,
               const std::string& column_prefix = "x");
Eigen::MatrixXd read_csv(std::istream& in);

/// One-column CSV with header `eigenvalue`.
void write_column_csv(std::ostream& out, std::span<const double> values,
                      const std::string& header = "eigenvalue");

}  // namespace qrlab::io
