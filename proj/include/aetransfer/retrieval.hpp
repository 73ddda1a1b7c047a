#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace aetransfer {

/// Shared evaluation grid and bandwidths for per-coordinate density estimates.
struct SignatureGrid {
  Eigen::VectorXd lower;       // first grid point per coordinate
  Eigen::VectorXd step;        // grid spacing per coordinate
  Eigen::VectorXd bandwidths;  // kernel bandwidth per coordinate
  Eigen::Index points = 256;

  Eigen::Index dims() const { return lower.size(); }
  double grid_point(Eigen::Index coordinate, Eigen::Index g) const {
    return lower(coordinate) + step(coordinate) * static_cast<double>(g);
  }
  /// FNV-1a over the raw bytes of every field; part of the cache key.
  std::uint64_t hash() const;
  bool operator==(const SignatureGrid& other) const;
};

/// Silverman bandwidth per column of the pooled descriptors, and a grid of
/// `points` values spanning [min - 3h, max + 3h].
SignatureGrid make_signature_grid(const Eigen::Ref<const Eigen::MatrixXd>& pooled,
                                  Eigen::Index points = 256);

/// One row per coordinate, one column per grid point. Each row satisfies
/// sum(row) * step = 1.
struct ImageSignature {
  Eigen::MatrixXd densities;
  std::uint64_t grid_hash = 0;

  bool operator==(const ImageSignature& other) const {
    return grid_hash == other.grid_hash && densities.rows() == other.densities.rows() &&
           densities.cols() == other.densities.cols() && densities == other.densities;
  }
};

inline constexpr double kDensityFloor = 1e-12;

/// Gaussian KDE of each descriptor coordinate (rows of `descriptors` are
/// windows), floored at kDensityFloor and renormalized on the grid.
ImageSignature image_signature(const Eigen::Ref<const Eigen::MatrixXd>& descriptors,
                               const SignatureGrid& grid);

/// Mean over coordinates of 1/2 (KL(a||b) + KL(b||a)) on the discrete grid.
double image_divergence(const ImageSignature& a, const ImageSignature& b, const SignatureGrid& grid);

struct Shortlist {
  std::vector<std::string> image_ids;  // ascending divergence, ties by image_id
  std::vector<double> divergences;
  bool truncated = false;  // fewer than k sources were available
};

struct SourceSignature {
  std::string image_id;
  const ImageSignature* signature = nullptr;
};

/// The `k` sources closest to `target`.
Shortlist top_k_sources(const ImageSignature& target, const std::vector<SourceSignature>& sources,
                        std::size_t k, const SignatureGrid& grid);

/// Binary cache: <dir>/<image_id>-<grid hash hex>.sig holding rows, cols and
/// row-major little-endian doubles.
std::filesystem::path signature_cache_path(const std::filesystem::path& directory,
                                           const std::string& image_id, const SignatureGrid& grid);
void save_signature(const std::filesystem::path& path, const ImageSignature& signature);
std::optional<ImageSignature> load_signature(const std::filesystem::path& path,
                                             const SignatureGrid& grid);

}  // namespace aetransfer
