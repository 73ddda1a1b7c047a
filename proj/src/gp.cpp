#include "aetransfer/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/distributions/normal.hpp>

#include "aetransfer/error.hpp"
#include "aetransfer/geometry.hpp"
#include "aetransfer/random.hpp"

namespace aetransfer {

Eigen::VectorXd build_descriptor(const WindowRecord& window, double image_width, double image_height,
                                 const std::map<std::string, Eigen::VectorXd>& embeddings,
                                 const std::vector<FeatureSpace>& feature_spaces) {
  Eigen::Index length = 5;
  for (const auto& space : feature_spaces) {
    const auto it = embeddings.find(space.name);
    if (it == embeddings.end())
      throw DataError("build_descriptor: missing embedding block '" + space.name + "'");
    length += it->second.size();
  }
  Eigen::VectorXd phi(length);
  const auto geometry = geometry_descriptor(window.box, image_width, image_height);
  for (int j = 0; j < 4; ++j) phi(j) = geometry[static_cast<std::size_t>(j)];
  phi(4) = window.objectness;
  // std::map iterates in ascending name order, which fixes the block order.
  Eigen::Index offset = 5;
  for (const auto& [name, block] : embeddings) {
    const bool declared = std::any_of(feature_spaces.begin(), feature_spaces.end(),
                                      [&](const FeatureSpace& s) { return s.name == name; });
    if (!declared) continue;
    phi.segment(offset, block.size()) = block;
    offset += block.size();
  }
  return phi;
}

void KernelHyperparams::validate() const {
  if (gamma.size() == 0) throw ConfigError("kernel: empty length-scale vector");
  for (Eigen::Index j = 0; j < gamma.size(); ++j)
    if (!(std::isfinite(gamma(j)) && gamma(j) > 0.0))
      throw ConfigError("kernel: length-scale " + std::to_string(j) + " must be positive");
  if (!(std::isfinite(noise_variance) && noise_variance > 0.0))
    throw ConfigError("kernel: noise variance must be positive");
}

double kernel(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
              const KernelHyperparams& hp) {
  if (a.size() != b.size() || a.size() != hp.gamma.size())
    throw DataError("kernel: descriptor lengths differ");
  for (Eigen::Index j = 0; j < hp.gamma.size(); ++j)
    if (!(hp.gamma(j) > 0.0)) throw ConfigError("kernel: non-positive length-scale");
  return std::exp(-0.5 * ((a - b).array() / hp.gamma.array()).square().sum());
}

Eigen::MatrixXd kernel_matrix(const Eigen::Ref<const Eigen::MatrixXd>& a,
                              const Eigen::Ref<const Eigen::MatrixXd>& b,
                              const Eigen::VectorXd& gamma) {
  if (a.cols() != gamma.size() || b.cols() != gamma.size())
    throw DataError("kernel_matrix: descriptor length does not match the length-scales");
  // Scaled copies with one descriptor per column keep the inner loop contiguous.
  const Eigen::MatrixXd as = (a * gamma.cwiseInverse().asDiagonal()).transpose();
  const Eigen::MatrixXd bs = (b * gamma.cwiseInverse().asDiagonal()).transpose();
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < bs.cols(); ++j)
    for (Eigen::Index i = 0; i < as.cols(); ++i)
      k(i, j) = std::exp(-0.5 * (as.col(i) - bs.col(j)).squaredNorm());
  return k;
}

// --- posterior -----------------------------------------------------------------

GpModel::GpModel(KernelHyperparams hyperparams, Eigen::MatrixXd inputs, Eigen::VectorXd labels)
    : hyperparams_(std::move(hyperparams)), inputs_(std::move(inputs)), labels_(std::move(labels)) {
  hyperparams_.validate();
  if (inputs_.rows() == 0) throw DataError("GpModel: empty inducing set");
  if (inputs_.rows() != labels_.size()) throw DataError("GpModel: inputs and labels differ in size");
  if (inputs_.cols() != hyperparams_.gamma.size())
    throw DataError("GpModel: descriptor length does not match the length-scales");
  if (!inputs_.allFinite() || !labels_.allFinite()) throw DataError("GpModel: non-finite input");
  Eigen::MatrixXd k = kernel_matrix(inputs_, inputs_, hyperparams_.gamma);
  k.diagonal().array() += hyperparams_.noise_variance;
  llt_.compute(k);
  if (llt_.info() != Eigen::Success)
    throw NumericalError("GpModel: kernel matrix is not positive definite");
  weights_ = llt_.solve(labels_);
}

OverlapPrediction GpModel::predict(const Eigen::Ref<const Eigen::VectorXd>& phi) const {
  if (phi.size() != inputs_.cols()) throw DataError("posterior: descriptor length mismatch");
  const Eigen::VectorXd k = kernel_matrix(inputs_, phi.transpose(), hyperparams_.gamma);
  const double mu = k.dot(weights_);
  const Eigen::VectorXd v = llt_.matrixL().solve(k);
  double var = 1.0 - v.squaredNorm();
  if (var < 0.0) {
    if (var < -1e-10) throw NumericalError("posterior: negative variance " + std::to_string(var));
    var = 0.0;
  }
  return {mu, std::sqrt(var)};
}

OverlapPrediction posterior_exact(const Eigen::Ref<const Eigen::VectorXd>& phi, const GpModel& model) {
  return model.predict(phi);
}

FitcPredictor::FitcPredictor(const GpModel& model, const std::vector<std::size_t>& pseudo_rows)
    : FitcPredictor(model.hyperparams(), model.inputs(), model.labels(), pseudo_rows) {}

FitcPredictor::FitcPredictor(const KernelHyperparams& hyperparams,
                             const Eigen::Ref<const Eigen::MatrixXd>& x,
                             const Eigen::Ref<const Eigen::VectorXd>& labels,
                             const std::vector<std::size_t>& pseudo_rows)
    : hyperparams_(hyperparams) {
  hyperparams_.validate();
  if (pseudo_rows.empty()) throw ConfigError("FITC: need at least one pseudo-input");
  if (x.rows() != labels.size() || x.cols() != hyperparams_.gamma.size())
    throw DataError("FITC: inducing inputs, labels and length-scales disagree in shape");
  pseudo_.resize(static_cast<Eigen::Index>(pseudo_rows.size()), x.cols());
  for (std::size_t i = 0; i < pseudo_rows.size(); ++i) {
    if (pseudo_rows[i] >= static_cast<std::size_t>(x.rows()))
      throw ConfigError("FITC: pseudo-input row out of range");
    pseudo_.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(pseudo_rows[i]));
  }
  const Eigen::Index m = pseudo_.rows();
  const Eigen::MatrixXd kuu = kernel_matrix(pseudo_, pseudo_, hyperparams_.gamma);
  Eigen::LLT<Eigen::MatrixXd> luu;
  for (double jitter : {0.0, 1e-12, 1e-10, 1e-8, 1e-6}) {
    luu.compute(kuu + jitter * Eigen::MatrixXd::Identity(m, m));
    jitter_ = jitter;
    if (luu.info() == Eigen::Success) break;
  }
  if (luu.info() != Eigen::Success) throw NumericalError("FITC: K_uu is not positive definite");
  luu_ = luu.matrixL();

  const Eigen::MatrixXd kuf = kernel_matrix(pseudo_, x, hyperparams_.gamma);
  const Eigen::MatrixXd v = luu_.triangularView<Eigen::Lower>().solve(kuf);
  const Eigen::ArrayXd g =
      (1.0 - v.colwise().squaredNorm().transpose().array()).max(0.0) + hyperparams_.noise_variance;
  const Eigen::MatrixXd v_scaled = v * g.sqrt().inverse().matrix().asDiagonal();
  Eigen::MatrixXd a = v_scaled * v_scaled.transpose();
  a.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> la(a);
  if (la.info() != Eigen::Success) throw NumericalError("FITC: I + V G^-1 V^T is not positive definite");
  la_ = la.matrixL();
  const Eigen::VectorXd rhs = v * (labels.array() / g).matrix();
  weights_ = la_.triangularView<Eigen::Lower>().solve(rhs);
}

OverlapPrediction FitcPredictor::predict(const Eigen::Ref<const Eigen::VectorXd>& phi) const {
  if (phi.size() != pseudo_.cols()) throw DataError("posterior: descriptor length mismatch");
  const Eigen::VectorXd k = kernel_matrix(pseudo_, phi.transpose(), hyperparams_.gamma);
  const Eigen::VectorXd v = luu_.triangularView<Eigen::Lower>().solve(k);
  const Eigen::VectorXd e = la_.triangularView<Eigen::Lower>().solve(v);
  const double mu = e.dot(weights_);
  double var = 1.0 - v.squaredNorm() + e.squaredNorm();
  if (var < 0.0) {
    if (var < -1e-10) throw NumericalError("posterior: negative variance " + std::to_string(var));
    var = 0.0;
  }
  return {mu, std::sqrt(var)};
}

OverlapPrediction posterior_sparse(const Eigen::Ref<const Eigen::VectorXd>& phi, const GpModel& model,
                                   std::size_t m, std::uint64_t seed) {
  if (m < 1) throw ConfigError("posterior_sparse: m must be at least 1");
  const auto n = static_cast<std::size_t>(model.size());
  if (m > n) throw ConfigError("posterior_sparse: m exceeds the inducing set size");
  Rng rng(seed);
  return FitcPredictor(model, rng.sample_indices(n, m)).predict(phi);
}

// --- score ---------------------------------------------------------------------

double beta(double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("lambda must lie in (0, 1)");
  if (lambda == 0.5) return 0.0;
  return boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - lambda);
}

double score(const OverlapPrediction& prediction, double lambda) {
  const double b = beta(lambda);
  if (prediction.sigma == 0.0) return prediction.mu;
  return prediction.mu + b * prediction.sigma;
}

}  // namespace aetransfer
