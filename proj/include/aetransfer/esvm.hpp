#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aetransfer/dataset.hpp"

namespace aetransfer {

/// Linear exemplar classifier: score(x) = x . weights + bias.
struct ExemplarModel {
  std::string exemplar_id;
  std::string feature_space;
  Eigen::VectorXd weights;
  double bias = 0.0;

  double score(const Eigen::Ref<const Eigen::VectorXd>& x) const { return x.dot(weights) + bias; }
  bool operator==(const ExemplarModel& other) const {
    return exemplar_id == other.exemplar_id && feature_space == other.feature_space &&
           weights.size() == other.weights.size() && weights == other.weights && bias == other.bias;
  }
};

struct EsvmParams {
  double c1 = 1.0;
  double c2 = 0.001;
  bool fit_bias = true;
  /// Coordinate-descent sweeps allowed for each fixed-bias solve.
  std::size_t max_passes = 10000;
  /// Stopping threshold on the projected-gradient spread of the inner dual problem.
  double tolerance = 1e-6;
};

/// Window reference into a Dataset: (image index, window index).
struct WindowRef {
  std::size_t image = 0;
  std::size_t window = 0;

  auto operator<=>(const WindowRef&) const = default;
};

/// Source object used to train one exemplar classifier.
struct Exemplar {
  std::string exemplar_id;  // "<image_id>#<gt index>"
  std::size_t image = 0;
  Box gt_box;
  /// Window that best covers the gt box; its features stand in for the object.
  std::size_t window = 0;
};

/// One exemplar per ground-truth box of each listed source image. The gt box
/// is represented by the window with the highest IoU against it (lowest index
/// on ties); boxes whose best window has IoU < `min_iou` are skipped.
std::vector<Exemplar> collect_exemplars(const Dataset& dataset,
                                        const std::vector<std::size_t>& source_images,
                                        double min_iou = 0.5);

/// Up to `max_count` windows from the labeled source pool with overlap < 0.5,
/// excluding windows of the exemplar's own image that reach IoU 0.5 with its
/// box. Uniform seeded sample, returned in (image, window) order. Throws
/// DataError when no window qualifies.
std::vector<WindowRef> mine_negatives(const Dataset& labeled_sources,
                                      const std::vector<std::size_t>& source_images,
                                      const Exemplar& exemplar, std::size_t max_count,
                                      std::uint64_t seed);

/// ||w||^2 + c1 * hinge(score(x_o)) + c2 * sum_i hinge(-score(x_i)).
double esvm_objective(const Eigen::VectorXd& weights, double bias,
                      const Eigen::Ref<const Eigen::VectorXd>& exemplar,
                      const Eigen::Ref<const Eigen::MatrixXd>& negatives, const EsvmParams& params);

/// Minimizes esvm_objective. `negatives` holds one window per row. Throws
/// NumericalError (with the last objective value) if the pass budget runs out.
ExemplarModel train_esvm(const Eigen::Ref<const Eigen::VectorXd>& exemplar,
                         const Eigen::Ref<const Eigen::MatrixXd>& negatives, const EsvmParams& params);

struct ResponseMatrix {
  Eigen::MatrixXd values;  // windows x exemplars
  std::vector<WindowRef> row_index;
  std::vector<std::string> col_index;
};

/// A(i, o) = x_i . w_o + b_o for the listed windows.
ResponseMatrix response_matrix(const Dataset& dataset, const std::vector<WindowRef>& windows,
                               const std::vector<ExemplarModel>& models,
                               const std::string& feature_space);

/// Responses of every window of one image, rows in window order.
Eigen::MatrixXd image_responses(const ImageRecord& image, const std::vector<ExemplarModel>& models,
                                const std::string& feature_space);

}  // namespace aetransfer
