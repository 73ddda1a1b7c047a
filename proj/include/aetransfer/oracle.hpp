#pragma once

#include <array>
#include <cstddef>
#include <functional>

#include <Eigen/Dense>

namespace aetransfer::oracle {

/// Brute-force reference computations. They share no code with the main
/// library beyond Eigen, and favour plainness over speed.

inline constexpr std::size_t kDefaultCap = 2000;

/// IoU of integer boxes {x_min, y_min, x_max, y_max} by counting unit pixels.
double pixel_iou(const std::array<long, 4>& a, const std::array<long, 4>& b);

/// Squared-exponential kernel matrix computed entry by entry.
Eigen::MatrixXd se_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::VectorXd& gamma);

struct DensePrediction {
  double mu = 0.0;
  double variance = 0.0;
};

/// GP posterior through a full-pivot LU solve of K + noise I.
DensePrediction dense_gp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& gamma,
                         double noise, const Eigen::VectorXd& target, std::size_t cap = kDefaultCap);

/// Regularized negative log marginal likelihood through LU (log-determinant
/// from the pivots), plus alpha * ||gamma||^2.
double dense_nll(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& gamma,
                 double noise, double alpha, std::size_t cap = kDefaultCap);

/// Central differences of f at x with step h in every coordinate.
Eigen::VectorXd central_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double h);

/// Singular values of A (descending) from the eigenvalues of A^T A.
Eigen::VectorXd singular_values_eig(const Eigen::MatrixXd& a, std::size_t cap = kDefaultCap);

/// sqrt of the sum of squared singular values beyond the first d.
double truncation_error_eig(const Eigen::MatrixXd& a, Eigen::Index d, std::size_t cap = kDefaultCap);

/// Sum of Gaussian bumps (bandwidth h) over `samples`, evaluated at `points`.
Eigen::VectorXd naive_kde(const Eigen::VectorXd& samples, double h, const Eigen::VectorXd& points);

/// 1/2 (KL(p||q) + KL(q||p)) for univariate normals.
double symmetric_gaussian_kl(double mean_p, double sd_p, double mean_q, double sd_q);

}  // namespace aetransfer::oracle
