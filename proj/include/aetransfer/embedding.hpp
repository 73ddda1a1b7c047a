#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace aetransfer {

/// Exemplar side of the associative embedding. Rows of `v()` are the embedded
/// exemplars with the singular values folded in, so a window's response
/// vector a is approximated by u * v()^T.
class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  EmbeddingModel(std::string feature_space, Eigen::MatrixXd v);

  const std::string& feature_space() const { return feature_space_; }
  const Eigen::MatrixXd& v() const { return v_; }
  Eigen::Index dim() const { return v_.cols(); }
  Eigen::Index exemplar_count() const { return v_.rows(); }
  bool full_rank() const { return rank_ == v_.cols(); }

  /// Least-squares preimage u of a response vector. Throws NumericalError if
  /// V is rank deficient, since the minimizer is then not unique.
  Eigen::VectorXd embed(const Eigen::Ref<const Eigen::VectorXd>& responses) const;

  bool operator==(const EmbeddingModel& other) const {
    return feature_space_ == other.feature_space_ && v_.rows() == other.v_.rows() &&
           v_.cols() == other.v_.cols() && v_ == other.v_;
  }

 private:
  std::string feature_space_;
  Eigen::MatrixXd v_;
  Eigen::MatrixXd projector_;  // (V^T V)^-1 V^T via column-pivoted QR
  Eigen::Index rank_ = 0;
};

struct EmbeddingFit {
  Eigen::MatrixXd u;  // rows of the fitting sample, orthonormal columns
  EmbeddingModel model;
  Eigen::VectorXd singular_values;  // all of them, descending
};

/// Rank-d truncated SVD of a response sub-matrix. Each singular pair is
/// sign-fixed so the largest-magnitude entry of the right singular vector is
/// positive (lowest index on ties).
EmbeddingFit fit_embedding(const Eigen::Ref<const Eigen::MatrixXd>& responses, Eigen::Index d,
                           const std::string& feature_space);

Eigen::VectorXd embed_window(const Eigen::Ref<const Eigen::VectorXd>& responses,
                             const EmbeddingModel& model);

/// Row-wise embed_window. Returns a (rows x d) matrix.
Eigen::MatrixXd embed_all(const Eigen::Ref<const Eigen::MatrixXd>& responses,
                          const EmbeddingModel& model);

}  // namespace aetransfer
