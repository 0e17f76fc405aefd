#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "kslyap/ode_core.hpp"

namespace kslyap::testing {

/// Classical Gram-Schmidt applied twice per column. Returns R (upper triangular, m x m).
inline Matrix gram_schmidt_r(const Matrix& V, Matrix* Q_out = nullptr) {
  const Eigen::Index n = V.rows(), m = V.cols();
  Matrix Q(n, m);
  Matrix R = Matrix::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    Vector v = V.col(j);
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i < j; ++i) {
        const double c = Q.col(i).dot(v);
        R(i, j) += c;
        v -= c * Q.col(i);
      }
    }
    R(j, j) = v.norm();
    Q.col(j) = v / R(j, j);
  }
  if (Q_out) *Q_out = Q;
  return R;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("kslyap_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace kslyap::testing
