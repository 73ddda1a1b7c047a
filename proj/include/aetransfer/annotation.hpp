#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "aetransfer/geometry.hpp"

namespace aetransfer {

/// The window chosen for one target image with its predicted overlap.
struct ScoredAnnotation {
  std::string image_id;
  Box box;
  double mu = 0.0;
  double sigma = 0.0;
  double eta = 0.0;
  double lambda = 0.8;

  /// eta clamped to [0, 1]; ranking always uses the raw eta.
  double reported_overlap() const;
  bool operator==(const ScoredAnnotation&) const = default;
};

/// Recomputes eta at `lambda` and keeps annotations with eta > tau. Input order is kept.
std::vector<ScoredAnnotation> self_assess(const std::vector<ScoredAnnotation>& annotations, double tau,
                                          double lambda);

/// JSON Lines, one object per annotation with keys image_id, x_min, y_min,
/// x_max, y_max, mu, sigma, eta, lambda in that order.
std::string annotations_to_jsonl(const std::vector<ScoredAnnotation>& annotations);
std::vector<ScoredAnnotation> annotations_from_jsonl(const std::string& text);
std::vector<ScoredAnnotation> read_annotations(const std::filesystem::path& path);

}  // namespace aetransfer
