#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "aetransfer/dataset.hpp"

namespace aetransfer {

struct SynthOptions {
  std::uint64_t seed = 1;
  std::size_t n_source = 500;
  std::size_t n_target = 200;
  std::size_t d_latent = 3;
  /// Standard deviation of the Gaussian noise added to every feature entry.
  double noise = 0.3;
  std::size_t windows_per_image = 50;
  /// Source classes; class "c0" is the target class, the rest are its siblings.
  std::size_t classes = 3;
  /// Fraction of source images that belong to the target class.
  double target_share = 0.1;
  /// Log-scale difference in object size and aspect between neighbouring classes.
  double class_spread = 0.3;
  std::vector<FeatureSpace> feature_spaces = {{"bow", 32}, {"hog", 48}};

  void validate() const;
};

/// Synthetic benchmark with one object per image.
///
/// Every image has an object appearance a on the simplex spanned by latent
/// components 1..d_latent-1, drawn around a class centroid; component 0 is
/// background. A window covering a fraction c of its own area with the object
/// has latent state h = c a + (1 - c) e_0, and its features are P_f h plus
/// noise for a fixed random matrix P_f per feature space. Responses of linear
/// classifiers therefore have rank at most d_latent when noise is zero.
/// Box size and aspect follow the appearance (a viewpoint effect) and are
/// shifted per class, so the map from latent state and geometry to overlap is
/// class specific. Objectness is a noisy logistic function of the true overlap.
Dataset generate_synthetic(const SynthOptions& options);

}  // namespace aetransfer
