#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "aetransfer/annotation.hpp"
#include "aetransfer/dataset.hpp"

namespace aetransfer {

struct CurvePoint {
  int percent = 0;
  double mean_iou = 0.0;
  bool operator==(const CurvePoint&) const = default;
};

/// One evaluated output: its ranking score and its IoU against ground truth.
struct ScoredOutcome {
  std::string image_id;
  double score = 0.0;
  double iou = 0.0;
};

/// For p = 5, 10, ..., 100: mean IoU of the ceil(p n / 100) highest-scored
/// outcomes (ties by image_id). Each subset is summed in image_id order, so
/// the p = 100 entry equals the plain mean over all outcomes.
std::vector<CurvePoint> ranking_curve(const std::vector<ScoredOutcome>& outcomes);

struct EvaluationReport {
  double mean_iou = 0.0;
  double detection_rate = 0.0;
  std::vector<CurvePoint> ranking_curve;
  std::size_t n_images = 0;
  /// Annotations whose image has no ground truth.
  std::size_t excluded = 0;
  /// Evaluated outputs in image_id order.
  std::vector<ScoredOutcome> outcomes;
};

/// Ground-truth boxes keyed by image_id.
using GroundTruth = std::map<std::string, std::vector<Box>>;

GroundTruth ground_truth_of(const Dataset& dataset);

/// Max IoU over gt boxes per image; an output counts as a detection when its
/// IoU is strictly above 0.5. Throws DataError when nothing can be evaluated.
EvaluationReport evaluate(const std::vector<ScoredAnnotation>& annotations, const GroundTruth& gt);

/// Fraction of `ious` strictly above 0.5.
double detection_rate(const std::vector<double>& ious);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// Baseline that returns the highest-objectness window of each image (lowest
/// index on ties), scored by its objectness.
std::vector<ScoredAnnotation> top_objectness_baseline(const Dataset& dataset,
                                                      const std::vector<std::size_t>& images);

std::string curve_to_csv(const std::vector<CurvePoint>& curve);

}  // namespace aetransfer
