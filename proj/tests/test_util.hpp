#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace testutil {

inline double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

/// Relative error within rel_tol, or absolute error within abs_tol near zero.
inline bool close(double analytic, double numeric, double rel_tol, double abs_tol) {
  return std::abs(analytic - numeric) <= abs_tol || rel_err(analytic, numeric) <= rel_tol;
}

/// Central difference of f at value slot `v`.
inline double central_difference(const std::function<double()>& f, double& v, double h) {
  const double saved = v;
  v = saved + h;
  const double up = f();
  v = saved - h;
  const double down = f();
  v = saved;
  return (up - down) / (2.0 * h);
}

inline Eigen::MatrixXd gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  }
  return m;
}

inline double sample_sd(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

}  // namespace testutil
