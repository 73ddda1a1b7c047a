#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aetransfer/geometry.hpp"

namespace aetransfer {

enum class Role { source, target };

/// Which annotated images feed a target class.
///   self     : source images of the target class
///   siblings : source images of the other classes
///   family   : all source images
enum class SourceConfig { self, siblings, family };

std::string to_string(Role role);
std::string to_string(SourceConfig config);
Role parse_role(const std::string& text);
SourceConfig parse_source_config(const std::string& text);

/// One candidate window. Feature vectors live in the owning image's
/// feature tables, row-aligned with the window index.
struct WindowRecord {
  Box box;
  double objectness = 0.0;
  std::optional<double> overlap;

  bool operator==(const WindowRecord&) const = default;
};

struct FeatureSpace {
  std::string name;
  std::size_t dim = 0;

  bool operator==(const FeatureSpace&) const = default;
};

struct ImageRecord {
  std::string image_id;
  std::string class_name;
  Role role = Role::target;
  double width = 0.0;
  double height = 0.0;
  std::vector<WindowRecord> windows;
  /// Feature-space name -> (windows x dim) matrix.
  std::map<std::string, Eigen::MatrixXd> features;
  std::vector<Box> gt_boxes;

  const Eigen::MatrixXd& feature_table(const std::string& space) const;
  bool operator==(const ImageRecord& other) const;
};

struct Dataset {
  std::vector<ImageRecord> images;  // sorted by image_id
  std::vector<FeatureSpace> feature_spaces;
  SourceConfig source_config = SourceConfig::family;
  /// Class the targets belong to; empty means "classes of the target images".
  std::string target_class;

  const ImageRecord* find(const std::string& image_id) const;
  std::vector<std::size_t> indices_with_role(Role role) const;
  /// Source images selected by `config`, ascending image index.
  std::vector<std::size_t> source_indices(SourceConfig config) const;

  /// Checks every invariant; throws DataError naming the offending image.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

/// Sets each window's overlap to the max IoU over the image's ground truth.
ImageRecord label_overlaps(const ImageRecord& image);

/// Reads and validates a manifest and the tables it references.
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes manifest.txt, ground_truth.csv and windows/<image_id>.csv under
/// `directory`. Returns the manifest path.
std::filesystem::path save_dataset(const Dataset& dataset,
                                   const std::filesystem::path& directory);

}  // namespace aetransfer
