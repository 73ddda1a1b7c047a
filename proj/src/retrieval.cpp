#include "aetransfer/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <numeric>

#include "aetransfer/error.hpp"
#include "aetransfer/random.hpp"
#include "aetransfer/table_io.hpp"

namespace aetransfer {

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::uint64_t hash_doubles(const Eigen::VectorXd& values, std::uint64_t hash) {
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    char bytes[sizeof(double)];
    std::memcpy(bytes, &values(i), sizeof(double));
    hash = fnv1a(std::string_view(bytes, sizeof(double)), hash);
  }
  return hash;
}

}  // namespace

std::uint64_t SignatureGrid::hash() const {
  std::uint64_t h = fnv1a("aetransfer-signature-grid");
  h = hash_doubles(lower, h);
  h = hash_doubles(step, h);
  h = hash_doubles(bandwidths, h);
  return fnv1a(std::to_string(points), h);
}

bool SignatureGrid::operator==(const SignatureGrid& other) const {
  return points == other.points && lower.size() == other.lower.size() && lower == other.lower &&
         step == other.step && bandwidths == other.bandwidths;
}

SignatureGrid make_signature_grid(const Eigen::Ref<const Eigen::MatrixXd>& pooled, Eigen::Index points) {
  if (pooled.rows() < 1) throw DataError("signature grid: no pooled descriptors");
  if (points < 2) throw ConfigError("signature grid: need at least two grid points");
  const Eigen::Index dims = pooled.cols();
  const double n = static_cast<double>(pooled.rows());
  SignatureGrid grid;
  grid.points = points;
  grid.lower.resize(dims);
  grid.step.resize(dims);
  grid.bandwidths.resize(dims);
  for (Eigen::Index j = 0; j < dims; ++j) {
    std::vector<double> column(pooled.col(j).data(), pooled.col(j).data() + pooled.rows());
    std::sort(column.begin(), column.end());
    const double mean = std::accumulate(column.begin(), column.end(), 0.0) / n;
    double var = 0.0;
    for (double v : column) var += (v - mean) * (v - mean);
    const double sd = pooled.rows() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    const double iqr = quantile_sorted(column, 0.75) - quantile_sorted(column, 0.25);
    double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    double h = 0.9 * spread * std::pow(n, -0.2);
    if (!(h > 0.0)) h = 1e-3;
    grid.bandwidths(j) = h;
    grid.lower(j) = column.front() - 3.0 * h;
    const double upper = column.back() + 3.0 * h;
    grid.step(j) = (upper - grid.lower(j)) / static_cast<double>(points - 1);
  }
  return grid;
}

ImageSignature image_signature(const Eigen::Ref<const Eigen::MatrixXd>& descriptors,
                               const SignatureGrid& grid) {
  if (descriptors.rows() == 0) throw DataError("image_signature: image has no windows");
  if (descriptors.cols() != grid.dims())
    throw DataError("image_signature: descriptor length does not match the grid");
  ImageSignature signature;
  signature.grid_hash = grid.hash();
  signature.densities.resize(grid.dims(), grid.points);
  const double n = static_cast<double>(descriptors.rows());
  for (Eigen::Index j = 0; j < grid.dims(); ++j) {
    const double h = grid.bandwidths(j);
    const double norm = 1.0 / (n * h * std::sqrt(2.0 * std::numbers::pi));
    for (Eigen::Index g = 0; g < grid.points; ++g) {
      const double at = grid.grid_point(j, g);
      double sum = 0.0;
      for (Eigen::Index i = 0; i < descriptors.rows(); ++i) {
        const double z = (at - descriptors(i, j)) / h;
        sum += std::exp(-0.5 * z * z);
      }
      signature.densities(j, g) = sum * norm + kDensityFloor;
    }
    const double mass = signature.densities.row(j).sum() * grid.step(j);
    signature.densities.row(j) /= mass;
  }
  return signature;
}

double image_divergence(const ImageSignature& a, const ImageSignature& b, const SignatureGrid& grid) {
  const std::uint64_t h = grid.hash();
  if (a.grid_hash != h || b.grid_hash != h || a.densities.rows() != grid.dims() ||
      b.densities.rows() != grid.dims() || a.densities.cols() != grid.points ||
      b.densities.cols() != grid.points)
    throw DataError("image_divergence: signatures were built on different grids");
  double total = 0.0;
  for (Eigen::Index j = 0; j < grid.dims(); ++j) {
    double kl = 0.0;
    for (Eigen::Index g = 0; g < grid.points; ++g) {
      const double p = a.densities(j, g);
      const double q = b.densities(j, g);
      kl += (p - q) * (std::log(p) - std::log(q));
    }
    total += 0.5 * kl * grid.step(j);
  }
  return total / static_cast<double>(grid.dims());
}

Shortlist top_k_sources(const ImageSignature& target, const std::vector<SourceSignature>& sources,
                        std::size_t k, const SignatureGrid& grid) {
  if (k < 1) throw ConfigError("top_k_sources: k must be at least 1");
  std::vector<std::pair<double, std::string>> ranked;
  ranked.reserve(sources.size());
  for (const auto& source : sources)
    ranked.emplace_back(image_divergence(target, *source.signature, grid), source.image_id);
  std::sort(ranked.begin(), ranked.end());
  Shortlist out;
  out.truncated = ranked.size() < k;
  const std::size_t keep = std::min(k, ranked.size());
  for (std::size_t i = 0; i < keep; ++i) {
    out.divergences.push_back(ranked[i].first);
    out.image_ids.push_back(ranked[i].second);
  }
  return out;
}

std::filesystem::path signature_cache_path(const std::filesystem::path& directory,
                                           const std::string& image_id, const SignatureGrid& grid) {
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(grid.hash()));
  return directory / (image_id + "-" + hex + ".sig");
}

void save_signature(const std::filesystem::path& path, const ImageSignature& signature) {
  BinaryWriter out;
  out.bytes(std::string_view("AESIG001", 8));
  out.u64(signature.grid_hash);
  out.u64(static_cast<std::uint64_t>(signature.densities.rows()));
  out.u64(static_cast<std::uint64_t>(signature.densities.cols()));
  for (Eigen::Index r = 0; r < signature.densities.rows(); ++r)
    for (Eigen::Index c = 0; c < signature.densities.cols(); ++c) out.f64(signature.densities(r, c));
  write_file_atomic(path, out.data());
}

std::optional<ImageSignature> load_signature(const std::filesystem::path& path,
                                             const SignatureGrid& grid) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  BinaryReader in(read_file(path));
  if (in.bytes(8) != "AESIG001") throw DataError("not a signature file: " + path.string());
  ImageSignature signature;
  signature.grid_hash = in.u64();
  const auto rows = static_cast<Eigen::Index>(in.u64());
  const auto cols = static_cast<Eigen::Index>(in.u64());
  if (signature.grid_hash != grid.hash() || rows != grid.dims() || cols != grid.points)
    return std::nullopt;
  signature.densities.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) signature.densities(r, c) = in.f64();
  return signature;
}

}  // namespace aetransfer
