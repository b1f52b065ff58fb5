#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <string>
#include <vector>

namespace npspec {

/// Binary matrix dump: 8-byte magic "NPSMAT01", uint64 N, uint64 element
/// size (8), then N*N row-major float64, all little endian.
void write_matrix(std::ostream& os, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(std::istream& is);

void write_matrices(const std::string& path, const std::vector<const Eigen::MatrixXd*>& matrices);
std::vector<Eigen::MatrixXd> read_matrices(const std::string& path);

} // namespace npspec
