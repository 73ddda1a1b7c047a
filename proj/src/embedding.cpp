#include "aetransfer/embedding.hpp"

#include <cmath>

#include "aetransfer/error.hpp"

namespace aetransfer {

EmbeddingModel::EmbeddingModel(std::string feature_space, Eigen::MatrixXd v)
    : feature_space_(std::move(feature_space)), v_(std::move(v)) {
  if (v_.cols() < 1 || v_.cols() > v_.rows())
    throw DataError("embedding: V must be N_o x d with 1 <= d <= N_o");
  if (!v_.allFinite()) throw DataError("embedding: non-finite entry in V");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(v_);
  qr.setThreshold(1e-12);
  rank_ = qr.rank();
  if (rank_ == v_.cols())
    projector_ = qr.solve(Eigen::MatrixXd::Identity(v_.rows(), v_.rows()));
}

Eigen::VectorXd EmbeddingModel::embed(const Eigen::Ref<const Eigen::VectorXd>& responses) const {
  if (responses.size() != v_.rows())
    throw DataError("embed_window: expected " + std::to_string(v_.rows()) + " responses, got " +
                    std::to_string(responses.size()));
  if (!full_rank())
    throw NumericalError("embed_window: V is rank deficient (rank " + std::to_string(rank_) +
                         " < " + std::to_string(v_.cols()) + ")");
  Eigen::VectorXd u(v_.cols());
  for (Eigen::Index j = 0; j < v_.cols(); ++j) {
    double sum = 0.0;
    for (Eigen::Index o = 0; o < v_.rows(); ++o) sum += projector_(j, o) * responses(o);
    u(j) = sum;
  }
  return u;
}

EmbeddingFit fit_embedding(const Eigen::Ref<const Eigen::MatrixXd>& responses, Eigen::Index d,
                           const std::string& feature_space) {
  const Eigen::Index max_d = std::min(responses.rows(), responses.cols());
  if (d < 1 || d > max_d)
    throw ConfigError("fit_embedding: d = " + std::to_string(d) + " outside [1, " +
                      std::to_string(max_d) + "]");
  if (!responses.allFinite()) throw DataError("fit_embedding: non-finite response");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(responses, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::MatrixXd u = svd.matrixU().leftCols(d);
  Eigen::MatrixXd v_hat = svd.matrixV().leftCols(d);
  const Eigen::VectorXd& sigma = svd.singularValues();
  for (Eigen::Index j = 0; j < d; ++j) {
    Eigen::Index pivot = 0;
    for (Eigen::Index o = 1; o < v_hat.rows(); ++o)
      if (std::abs(v_hat(o, j)) > std::abs(v_hat(pivot, j))) pivot = o;
    if (v_hat(pivot, j) < 0.0) {
      v_hat.col(j) *= -1.0;
      u.col(j) *= -1.0;
    }
  }
  Eigen::MatrixXd v = v_hat * sigma.head(d).asDiagonal();
  return {std::move(u), EmbeddingModel(feature_space, std::move(v)), sigma};
}

Eigen::VectorXd embed_window(const Eigen::Ref<const Eigen::VectorXd>& responses,
                             const EmbeddingModel& model) {
  return model.embed(responses);
}

Eigen::MatrixXd embed_all(const Eigen::Ref<const Eigen::MatrixXd>& responses,
                          const EmbeddingModel& model) {
  Eigen::MatrixXd out(responses.rows(), model.dim());
  for (Eigen::Index r = 0; r < responses.rows(); ++r)
    out.row(r) = model.embed(responses.row(r).transpose()).transpose();
  return out;
}

}  // namespace aetransfer
