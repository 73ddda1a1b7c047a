#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "aetransfer/embedding.hpp"
#include "aetransfer/esvm.hpp"
#include "aetransfer/gp.hpp"

namespace aetransfer {

/// CSV with header exemplar_id,feature_space,bias,w_0,...; doubles are
/// written in shortest round-trip form.
void save_exemplar_models(const std::filesystem::path& path, const std::vector<ExemplarModel>& models);
std::vector<ExemplarModel> load_exemplar_models(const std::filesystem::path& path);

/// Binary: magic, feature_space, d, N_o, row-major V.
void save_embedding(const std::filesystem::path& path, const EmbeddingModel& model);
EmbeddingModel load_embedding(const std::filesystem::path& path);

/// Hyperparameters plus the labeled inducing set. Factorizations are rebuilt
/// by whoever constructs a GpModel or FitcPredictor from it.
struct GpModelData {
  KernelHyperparams hyperparams;
  Eigen::MatrixXd inputs;
  Eigen::VectorXd labels;
  bool operator==(const GpModelData& other) const {
    return hyperparams == other.hyperparams && inputs.rows() == other.inputs.rows() &&
           inputs.cols() == other.inputs.cols() && inputs == other.inputs && labels == other.labels;
  }
};

/// Binary: magic, D, gamma, noise_variance, n, row-major inputs, labels.
void save_gp_model(const std::filesystem::path& path, const GpModelData& model);
GpModelData load_gp_model(const std::filesystem::path& path);

}  // namespace aetransfer
