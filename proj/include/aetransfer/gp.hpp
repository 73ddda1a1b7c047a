#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aetransfer/dataset.hpp"

namespace aetransfer {

// --- descriptor ----------------------------------------------------------------

/// Window descriptor: geometry (4), objectness (1), then one embedding block
/// per feature space in ascending name order.
Eigen::VectorXd build_descriptor(const WindowRecord& window, double image_width, double image_height,
                                 const std::map<std::string, Eigen::VectorXd>& embeddings,
                                 const std::vector<FeatureSpace>& feature_spaces);

// --- kernel --------------------------------------------------------------------

/// Per-dimension length-scales of the squared-exponential kernel plus the
/// observation noise added to the diagonal. Signal variance is fixed at 1.
struct KernelHyperparams {
  Eigen::VectorXd gamma;
  double noise_variance = 0.01;

  /// Throws ConfigError unless every entry is positive and finite.
  void validate() const;
  bool operator==(const KernelHyperparams& other) const {
    return gamma.size() == other.gamma.size() && gamma == other.gamma &&
           noise_variance == other.noise_variance;
  }
};

/// exp(-1/2 sum_j ((a_j - b_j) / gamma_j)^2)
double kernel(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
              const KernelHyperparams& hp);

/// Cross-covariance between the rows of `a` and the rows of `b`.
Eigen::MatrixXd kernel_matrix(const Eigen::Ref<const Eigen::MatrixXd>& a,
                              const Eigen::Ref<const Eigen::MatrixXd>& b,
                              const Eigen::VectorXd& gamma);

// --- likelihood ----------------------------------------------------------------

/// Objective value with its gradient in log space:
/// [d/dlog gamma_1 .. d/dlog gamma_D, d/dlog noise_variance].
struct NllValue {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

/// Exact negative log marginal likelihood of `y` under K + noise*I, plus
/// alpha * ||gamma||^2. Throws NumericalError if K + noise*I is not positive definite.
NllValue nll_objective(const KernelHyperparams& hp, const Eigen::Ref<const Eigen::MatrixXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& y, double alpha);

/// Same objective under the FITC approximation with the rows of
/// `pseudo_inputs` as inducing inputs.
NllValue nll_objective_fitc(const KernelHyperparams& hp, const Eigen::Ref<const Eigen::MatrixXd>& x,
                            const Eigen::Ref<const Eigen::VectorXd>& y,
                            const Eigen::Ref<const Eigen::MatrixXd>& pseudo_inputs, double alpha);

struct GpFitOptions {
  double alpha = 100.0;
  std::uint64_t seed = 0;
  /// Samples up to this size use the exact likelihood; larger ones use FITC.
  std::size_t exact_limit = 1000;
  /// Pseudo-inputs drawn (seeded, uniform) for the FITC likelihood.
  std::size_t pseudo_inputs = 300;
  int max_iterations = 200;
  double gamma_min = 1e-3;
  double gamma_max = 1e3;
  double noise_min = 1e-6;
  double noise_max = 10.0;
};

struct GpFitResult {
  KernelHyperparams hyperparams;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
  bool used_fitc = false;
};

/// L-BFGS on the log hyperparameters inside the option bounds, starting from
/// gamma_j = std-dev of column j and noise 0.01.
GpFitResult fit_hyperparameters(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                const Eigen::Ref<const Eigen::VectorXd>& y, const GpFitOptions& options);

// --- posterior -----------------------------------------------------------------

struct OverlapPrediction {
  double mu = 0.0;
  double sigma = 0.0;
};

/// GP conditioned on labeled inducing points. Holds the Cholesky factor of
/// K + noise*I; any change means building a new model.
class GpModel {
 public:
  GpModel(KernelHyperparams hyperparams, Eigen::MatrixXd inputs, Eigen::VectorXd labels);

  const KernelHyperparams& hyperparams() const { return hyperparams_; }
  const Eigen::MatrixXd& inputs() const { return inputs_; }
  const Eigen::VectorXd& labels() const { return labels_; }
  Eigen::Index size() const { return inputs_.rows(); }

  OverlapPrediction predict(const Eigen::Ref<const Eigen::VectorXd>& phi) const;

 private:
  KernelHyperparams hyperparams_;
  Eigen::MatrixXd inputs_;
  Eigen::VectorXd labels_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd weights_;  // (K + noise I)^-1 y
};

/// FITC predictor over a labeled inducing set with the listed rows as
/// pseudo-inputs. Cost is O(n m^2); no n x n factorization is formed.
class FitcPredictor {
 public:
  FitcPredictor(const KernelHyperparams& hyperparams, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                const Eigen::Ref<const Eigen::VectorXd>& labels,
                const std::vector<std::size_t>& pseudo_rows);
  FitcPredictor(const GpModel& model, const std::vector<std::size_t>& pseudo_rows);

  OverlapPrediction predict(const Eigen::Ref<const Eigen::VectorXd>& phi) const;
  double jitter() const { return jitter_; }

 private:
  KernelHyperparams hyperparams_;
  Eigen::MatrixXd pseudo_;
  Eigen::MatrixXd luu_;     // lower Cholesky factor of K_uu + jitter I
  Eigen::MatrixXd la_;      // lower Cholesky factor of I + V G^-1 V^T
  Eigen::VectorXd weights_;  // L_A^-1 V G^-1 y
  double jitter_ = 0.0;
};

OverlapPrediction posterior_exact(const Eigen::Ref<const Eigen::VectorXd>& phi, const GpModel& model);

/// FITC prediction with `m` pseudo-inputs drawn uniformly (seeded) from the
/// model's inducing set.
OverlapPrediction posterior_sparse(const Eigen::Ref<const Eigen::VectorXd>& phi, const GpModel& model,
                                   std::size_t m, std::uint64_t seed);

// --- score ---------------------------------------------------------------------

/// Phi^-1(1 - lambda).
double beta(double lambda);

/// Largest xi with P(Y >= xi) >= lambda under N(mu, sigma^2): mu + beta(lambda) sigma.
double score(const OverlapPrediction& prediction, double lambda);

}  // namespace aetransfer
