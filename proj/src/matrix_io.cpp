#include "npspec/matrix_io.hpp"

#include "npspec/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace npspec {

static_assert(std::endian::native == std::endian::little, "matrix dumps assume little endian");

namespace {
constexpr char kMagic[8] = {'N', 'P', 'S', 'M', 'A', 'T', '0', '1'};
}

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw ConfigError("matrix dump requires a square matrix");
  const std::uint64_t n = static_cast<std::uint64_t>(m.rows());
  const std::uint64_t elem = sizeof(double);
  os.write(kMagic, sizeof kMagic);
  os.write(reinterpret_cast<const char*>(&n), sizeof n);
  os.write(reinterpret_cast<const char*>(&elem), sizeof elem);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  os.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(n * n * elem));
  if (!os) throw NumericalError("failed writing matrix dump");
}

Eigen::MatrixXd read_matrix(std::istream& is) {
  char magic[8];
  std::uint64_t n = 0, elem = 0;
  is.read(magic, sizeof magic);
  is.read(reinterpret_cast<char*>(&n), sizeof n);
  is.read(reinterpret_cast<char*>(&elem), sizeof elem);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ConfigError("not a matrix dump");
  if (elem != sizeof(double)) throw ConfigError("unsupported element size in matrix dump");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(n, n);
  is.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(n * n * elem));
  if (!is) throw ConfigError("truncated matrix dump");
  return rm;
}

void write_matrices(const std::string& path, const std::vector<const Eigen::MatrixXd*>& matrices) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  for (const auto* m : matrices) write_matrix(os, *m);
}

std::vector<Eigen::MatrixXd> read_matrices(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path);
  std::vector<Eigen::MatrixXd> out;
  while (is.peek() != std::char_traits<char>::eof()) out.push_back(read_matrix(is));
  return out;
}

} // namespace npspec
