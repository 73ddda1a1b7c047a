#include <cmath>
#include <numbers>

#include "aetransfer/error.hpp"
#include "aetransfer/gp.hpp"

namespace aetransfer {

namespace {

// sum_{a,b} z(a,b) (p(a,j) - q(b,j))^2 for a weight matrix z over rows of p and q.
double weighted_sq_distance(const Eigen::MatrixXd& z, const Eigen::Ref<const Eigen::MatrixXd>& p,
                            const Eigen::Ref<const Eigen::MatrixXd>& q, Eigen::Index j) {
  const Eigen::VectorXd pj = p.col(j);
  const Eigen::VectorXd qj = q.col(j);
  const Eigen::VectorXd row_sums = z.rowwise().sum();
  const Eigen::VectorXd col_sums = z.colwise().sum().transpose();
  return pj.cwiseAbs2().dot(row_sums) - 2.0 * pj.dot(z * qj) + qj.cwiseAbs2().dot(col_sums);
}

// Fixed so that the training objective stays a smooth function of the hyperparameters.
constexpr double kTrainingJitter = 1e-8;

}  // namespace

// C = Q + G with Q = K_fu K_uu^-1 K_uf and G = diag(1 - diag Q) + noise I.
// With V = L_uu^-1 K_uf and A = I + V G^-1 V^T = L_A L_A^T:
//   y^T C^-1 y = y^T G^-1 y - |L_A^-1 V G^-1 y|^2
//   log|C|     = sum log g + 2 sum log diag(L_A)
// The gradient is 1/2 tr(W dC) with W = C^-1 - a a^T, a = C^-1 y. Writing
// B = K_uu^-1 K_uf and w = diag(W), the derivative of the diagonal correction
// folds into
//   tr(W dC) = 2 <M, dK_uf> - <P, dK_uu> + dnoise * sum(w),
//   M = B W - B diag(w),  P = B W B^T - B diag(w) B^T.
NllValue nll_objective_fitc(const KernelHyperparams& hp, const Eigen::Ref<const Eigen::MatrixXd>& x,
                            const Eigen::Ref<const Eigen::VectorXd>& y,
                            const Eigen::Ref<const Eigen::MatrixXd>& pseudo_inputs, double alpha) {
  hp.validate();
  if (x.rows() == 0 || x.rows() != y.size()) throw DataError("nll_objective_fitc: bad sample shape");
  if (pseudo_inputs.rows() == 0) throw ConfigError("nll_objective_fitc: no pseudo-inputs");
  if (alpha < 0.0) throw ConfigError("nll_objective_fitc: alpha must be non-negative");
  const Eigen::Index n = x.rows();
  const Eigen::Index dims = hp.gamma.size();

  Eigen::MatrixXd kuu = kernel_matrix(pseudo_inputs, pseudo_inputs, hp.gamma);
  const Eigen::MatrixXd kuu_plain = kuu;
  kuu.diagonal().array() += kTrainingJitter;
  Eigen::LLT<Eigen::MatrixXd> luu(kuu);
  if (luu.info() != Eigen::Success) throw NumericalError("nll_objective_fitc: K_uu not positive definite");
  const Eigen::MatrixXd kuf = kernel_matrix(pseudo_inputs, x, hp.gamma);
  const Eigen::MatrixXd v = luu.matrixL().solve(kuf);
  const Eigen::VectorXd g =
      ((1.0 - v.colwise().squaredNorm().transpose().array()).max(0.0) + hp.noise_variance).matrix();
  const Eigen::VectorXd g_inv = g.cwiseInverse();

  Eigen::MatrixXd a = v * g_inv.asDiagonal() * v.transpose();
  a.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> la(a);
  if (la.info() != Eigen::Success) throw NumericalError("nll_objective_fitc: A not positive definite");

  const Eigen::VectorXd r = y.cwiseProduct(g_inv);
  const Eigen::VectorXd c = la.matrixL().solve(v * r);
  const Eigen::MatrixXd l_a = la.matrixL();
  const double quad = y.dot(r) - c.squaredNorm();
  const double logdet = g.array().log().sum() + 2.0 * l_a.diagonal().array().log().sum();

  NllValue out;
  out.value = 0.5 * quad + 0.5 * logdet + 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi) +
              alpha * hp.gamma.squaredNorm();

  // a_vec = C^-1 y = G^-1 y - G^-1 E^T c with E = L_A^-1 V.
  const Eigen::MatrixXd e = la.matrixL().solve(v);
  const Eigen::VectorXd a_vec = r - g_inv.cwiseProduct(e.transpose() * c);
  const Eigen::MatrixXd b = luu.matrixU().solve(v);  // K_uu^-1 K_uf
  const Eigen::MatrixXd e_scaled = e * g_inv.asDiagonal();
  const Eigen::MatrixXd b_scaled = b * g_inv.asDiagonal();
  // B C^-1 = B G^-1 - (B G^-1 E^T)(E G^-1)
  Eigen::MatrixXd bw = b_scaled - (b_scaled * e.transpose()) * e_scaled;
  bw.noalias() -= (b * a_vec) * a_vec.transpose();
  const Eigen::VectorXd c_inv_diag =
      g_inv - e.colwise().squaredNorm().transpose().cwiseProduct(g_inv.cwiseAbs2());
  const Eigen::VectorXd w = c_inv_diag - a_vec.cwiseAbs2();

  const Eigen::MatrixXd m_mat = bw - b * w.asDiagonal();
  const Eigen::MatrixXd p_mat = bw * b.transpose() - b * w.asDiagonal() * b.transpose();
  const Eigen::MatrixXd mk = m_mat.cwiseProduct(kuf);
  const Eigen::MatrixXd pk = p_mat.cwiseProduct(kuu_plain);

  out.gradient.resize(dims + 1);
  for (Eigen::Index j = 0; j < dims; ++j) {
    const double inv2 = 1.0 / (hp.gamma(j) * hp.gamma(j));
    const double cross = weighted_sq_distance(mk, pseudo_inputs, x, j);
    const double self = weighted_sq_distance(pk, pseudo_inputs, pseudo_inputs, j);
    out.gradient(j) = 0.5 * (2.0 * cross - self) * inv2 + 2.0 * alpha * hp.gamma(j) * hp.gamma(j);
  }
  out.gradient(dims) = 0.5 * hp.noise_variance * w.sum();
  return out;
}

}  // namespace aetransfer
