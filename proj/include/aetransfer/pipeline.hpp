#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aetransfer/annotation.hpp"
#include "aetransfer/dataset.hpp"
#include "aetransfer/embedding.hpp"
#include "aetransfer/esvm.hpp"
#include "aetransfer/gp.hpp"
#include "aetransfer/run_config.hpp"

namespace aetransfer {

using Logger = std::function<void(const std::string&)>;

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct TransferResult {
  /// One annotation per scored target image, ordered by image_id.
  std::vector<ScoredAnnotation> annotations;
  std::map<std::string, std::vector<ExemplarModel>> exemplar_models;
  std::map<std::string, EmbeddingModel> embeddings;
  GpFitResult gp_fit;
  /// Descriptor rows and labels the hyperparameters were fitted on.
  Eigen::MatrixXd gp_inputs;
  Eigen::VectorXd gp_labels;
  SourceConfig source_config = SourceConfig::family;
  std::size_t source_images = 0;
  std::vector<std::string> warnings;
  std::vector<StageTiming> timings;
};

/// Index of the window with the highest eta at `lambda`; lowest index wins ties.
std::size_t select_window(const std::vector<OverlapPrediction>& predictions, double lambda);

/// Descriptor matrix (windows x D) of one image given its per-space embeddings.
Eigen::MatrixXd image_descriptors(const ImageRecord& image,
                                  const std::map<std::string, Eigen::MatrixXd>& embedded,
                                  const std::vector<FeatureSpace>& feature_spaces);

/// Full transfer: E-SVMs, embedding, GP hyperparameters, retrieval and
/// per-target localization. Failures are rethrown tagged with the stage name.
TransferResult run_transfer(const Dataset& dataset, const RunConfig& config,
                            const Logger& log = nullptr);

}  // namespace aetransfer
