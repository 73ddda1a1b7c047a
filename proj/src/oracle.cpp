#include "aetransfer/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "aetransfer/error.hpp"

namespace aetransfer::oracle {

namespace {

void check_cap(std::size_t n, std::size_t cap, const char* what) {
  if (n > cap)
    throw ConfigError(std::string(what) + ": " + std::to_string(n) + " rows exceed the oracle cap of " +
                      std::to_string(cap));
}

}  // namespace

double pixel_iou(const std::array<long, 4>& a, const std::array<long, 4>& b) {
  if (a[0] >= a[2] || a[1] >= a[3] || b[0] >= b[2] || b[1] >= b[3])
    throw DataError("pixel_iou: degenerate box");
  const long x0 = std::min(a[0], b[0]);
  const long y0 = std::min(a[1], b[1]);
  const long x1 = std::max(a[2], b[2]);
  const long y1 = std::max(a[3], b[3]);
  long both = 0;
  long either = 0;
  for (long y = y0; y < y1; ++y) {
    for (long x = x0; x < x1; ++x) {
      const bool in_a = x >= a[0] && x < a[2] && y >= a[1] && y < a[3];
      const bool in_b = x >= b[0] && x < b[2] && y >= b[1] && y < b[3];
      both += in_a && in_b;
      either += in_a || in_b;
    }
  }
  return static_cast<double>(both) / static_cast<double>(either);
}

Eigen::MatrixXd se_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::VectorXd& gamma) {
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (Eigen::Index t = 0; t < gamma.size(); ++t) {
        const double z = (a(i, t) - b(j, t)) / gamma(t);
        s += z * z;
      }
      k(i, j) = std::exp(-0.5 * s);
    }
  }
  return k;
}

DensePrediction dense_gp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& gamma,
                         double noise, const Eigen::VectorXd& target, std::size_t cap) {
  check_cap(static_cast<std::size_t>(x.rows()), cap, "dense_gp");
  Eigen::MatrixXd k = se_kernel(x, x, gamma);
  k.diagonal().array() += noise;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
  const Eigen::VectorXd ks = se_kernel(x, target.transpose(), gamma).col(0);
  const Eigen::VectorXd alpha = lu.solve(y);
  const Eigen::VectorXd beta = lu.solve(ks);
  return {ks.dot(alpha), 1.0 - ks.dot(beta)};
}

double dense_nll(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& gamma,
                 double noise, double alpha, std::size_t cap) {
  check_cap(static_cast<std::size_t>(x.rows()), cap, "dense_nll");
  Eigen::MatrixXd k = se_kernel(x, x, gamma);
  k.diagonal().array() += noise;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(k);
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < k.rows(); ++i) log_det += std::log(std::abs(lu.matrixLU()(i, i)));
  const double quad = y.dot(lu.solve(y));
  const double n = static_cast<double>(y.size());
  return 0.5 * quad + 0.5 * log_det + 0.5 * n * std::log(2.0 * std::numbers::pi) +
         alpha * gamma.squaredNorm();
}

Eigen::VectorXd central_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd up = x;
    Eigen::VectorXd down = x;
    up(i) += h;
    down(i) -= h;
    g(i) = (f(up) - f(down)) / (2.0 * h);
  }
  return g;
}

Eigen::VectorXd singular_values_eig(const Eigen::MatrixXd& a, std::size_t cap) {
  check_cap(static_cast<std::size_t>(a.cols()), cap, "singular_values_eig");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a.transpose() * a);
  Eigen::VectorXd values = eig.eigenvalues().reverse().cwiseMax(0.0).cwiseSqrt();
  return values;
}

double truncation_error_eig(const Eigen::MatrixXd& a, Eigen::Index d, std::size_t cap) {
  check_cap(static_cast<std::size_t>(a.cols()), cap, "truncation_error_eig");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a.transpose() * a);
  const Eigen::VectorXd values = eig.eigenvalues().reverse().cwiseMax(0.0);
  double discarded = 0.0;
  for (Eigen::Index i = d; i < values.size(); ++i) discarded += values(i);
  return std::sqrt(discarded);
}

Eigen::VectorXd naive_kde(const Eigen::VectorXd& samples, double h, const Eigen::VectorXd& points) {
  Eigen::VectorXd out(points.size());
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  for (Eigen::Index g = 0; g < points.size(); ++g) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < samples.size(); ++i) {
      const double z = (points(g) - samples(i)) / h;
      s += std::exp(-0.5 * z * z);
    }
    out(g) = s * norm;
  }
  return out;
}

double symmetric_gaussian_kl(double mean_p, double sd_p, double mean_q, double sd_q) {
  auto kl = [](double m1, double s1, double m2, double s2) {
    return std::log(s2 / s1) + (s1 * s1 + (m1 - m2) * (m1 - m2)) / (2.0 * s2 * s2) - 0.5;
  };
  return 0.5 * (kl(mean_p, sd_p, mean_q, sd_q) + kl(mean_q, sd_q, mean_p, sd_p));
}

}  // namespace aetransfer::oracle
