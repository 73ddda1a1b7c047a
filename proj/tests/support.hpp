#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include <Eigen/Dense>

#include "aetransfer/random.hpp"

namespace test_support {

inline Eigen::MatrixXd random_matrix(aetransfer::Rng& rng, Eigen::Index rows, Eigen::Index cols,
                                     double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
  return m;
}

inline Eigen::VectorXd random_vector(aetransfer::Rng& rng, Eigen::Index n, double scale = 1.0) {
  return random_matrix(rng, n, 1, scale).col(0);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("aetransfer-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace test_support
