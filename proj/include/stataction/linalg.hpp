#pragma once

#include <Eigen/Dense>

#include <string>

#include "stataction/errors.hpp"

namespace stataction {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Largest singular value.
inline double spectral_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues()(0);
}

inline void require_dim(const Vec& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(n) +
                         ", got " + std::to_string(v.size()));
  }
}

}  // namespace stataction
