#include "aetransfer/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "aetransfer/error.hpp"
#include "aetransfer/table_io.hpp"

namespace aetransfer {

namespace fs = std::filesystem;

std::string to_string(Role role) { return role == Role::source ? "source" : "target"; }

std::string to_string(SourceConfig config) {
  switch (config) {
    case SourceConfig::self: return "self";
    case SourceConfig::siblings: return "siblings";
    case SourceConfig::family: return "family";
  }
  return "family";
}

Role parse_role(const std::string& text) {
  if (text == "source") return Role::source;
  if (text == "target") return Role::target;
  throw DataError("unknown role '" + text + "'");
}

SourceConfig parse_source_config(const std::string& text) {
  if (text == "self") return SourceConfig::self;
  if (text == "siblings") return SourceConfig::siblings;
  if (text == "family") return SourceConfig::family;
  throw ConfigError("unknown source configuration '" + text + "' (self|siblings|family)");
}

const Eigen::MatrixXd& ImageRecord::feature_table(const std::string& space) const {
  const auto it = features.find(space);
  if (it == features.end())
    throw DataError("image " + image_id + ": missing feature space '" + space + "'");
  return it->second;
}

bool ImageRecord::operator==(const ImageRecord& other) const {
  if (image_id != other.image_id || class_name != other.class_name || role != other.role ||
      width != other.width || height != other.height || windows != other.windows ||
      gt_boxes != other.gt_boxes || features.size() != other.features.size())
    return false;
  for (const auto& [name, table] : features) {
    const auto it = other.features.find(name);
    if (it == other.features.end()) return false;
    if (table.rows() != it->second.rows() || table.cols() != it->second.cols()) return false;
    if (table != it->second) return false;
  }
  return true;
}

const ImageRecord* Dataset::find(const std::string& image_id) const {
  const auto it = std::lower_bound(
      images.begin(), images.end(), image_id,
      [](const ImageRecord& image, const std::string& id) { return image.image_id < id; });
  if (it == images.end() || it->image_id != image_id) return nullptr;
  return &*it;
}

std::vector<std::size_t> Dataset::indices_with_role(Role role) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < images.size(); ++i)
    if (images[i].role == role) out.push_back(i);
  return out;
}

std::vector<std::size_t> Dataset::source_indices(SourceConfig config) const {
  std::set<std::string> own_classes;
  if (!target_class.empty()) {
    own_classes.insert(target_class);
  } else {
    for (const auto& image : images)
      if (image.role == Role::target) own_classes.insert(image.class_name);
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& image = images[i];
    if (image.role != Role::source) continue;
    const bool own = own_classes.contains(image.class_name);
    if (config == SourceConfig::family || (config == SourceConfig::self && own) ||
        (config == SourceConfig::siblings && !own))
      out.push_back(i);
  }
  return out;
}

namespace {

[[noreturn]] void fail(const std::string& image_id, const std::string& what) {
  throw DataError("image " + image_id + ": " + what);
}

void validate_box_in_image(const ImageRecord& image, const Box& box, const std::string& what) {
  if (!box.valid()) fail(image.image_id, what + ": degenerate or non-finite box");
  if (box.x_min < 0.0 || box.y_min < 0.0 || box.x_max > image.width || box.y_max > image.height)
    fail(image.image_id, what + ": box outside image bounds");
}

}  // namespace

void Dataset::validate() const {
  std::set<std::string> space_names;
  for (const auto& space : feature_spaces) {
    if (space.name.empty() || space.dim == 0)
      throw DataError("feature space needs a name and a positive dimension");
    if (!space_names.insert(space.name).second)
      throw DataError("duplicate feature space '" + space.name + "'");
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& image = images[i];
    if (image.image_id.empty()) throw DataError("empty image_id");
    if (i > 0 && !(images[i - 1].image_id < image.image_id))
      throw DataError("image ids must be unique and sorted: " + image.image_id);
    if (!(std::isfinite(image.width) && image.width > 0.0 && std::isfinite(image.height) &&
          image.height > 0.0))
      fail(image.image_id, "image dimensions must be positive and finite");
    for (std::size_t w = 0; w < image.windows.size(); ++w) {
      const auto& window = image.windows[w];
      const std::string where = "window row " + std::to_string(w);
      validate_box_in_image(image, window.box, where);
      if (!std::isfinite(window.objectness) || window.objectness < 0.0 || window.objectness > 1.0)
        fail(image.image_id, where + ": objectness outside [0,1]");
      if (window.overlap &&
          (!std::isfinite(*window.overlap) || *window.overlap < 0.0 || *window.overlap > 1.0))
        fail(image.image_id, where + ": overlap outside [0,1]");
    }
    if (image.features.size() != feature_spaces.size())
      fail(image.image_id, "feature spaces do not match the dataset declaration");
    for (const auto& space : feature_spaces) {
      const auto& table = image.feature_table(space.name);
      if (static_cast<std::size_t>(table.rows()) != image.windows.size() ||
          static_cast<std::size_t>(table.cols()) != space.dim)
        fail(image.image_id, "feature space '" + space.name + "' has shape " +
                                 std::to_string(table.rows()) + "x" +
                                 std::to_string(table.cols()) + ", expected " +
                                 std::to_string(image.windows.size()) + "x" +
                                 std::to_string(space.dim));
      for (Eigen::Index r = 0; r < table.rows(); ++r)
        if (!table.row(r).allFinite())
          fail(image.image_id, "window row " + std::to_string(r) + ": non-finite value in '" +
                                   space.name + "'");
    }
    for (std::size_t g = 0; g < image.gt_boxes.size(); ++g)
      validate_box_in_image(image, image.gt_boxes[g], "ground-truth box " + std::to_string(g));
    if (image.role == Role::source && image.gt_boxes.empty())
      fail(image.image_id, "source image without ground-truth boxes");
  }
}

ImageRecord label_overlaps(const ImageRecord& image) {
  if (image.gt_boxes.empty())
    throw DataError("image " + image.image_id + ": cannot label overlaps without ground truth");
  ImageRecord labeled = image;
  for (auto& window : labeled.windows) {
    double best = 0.0;
    for (const auto& gt : image.gt_boxes) best = std::max(best, iou(window.box, gt));
    window.overlap = best;
  }
  return labeled;
}

// --- manifest / table IO -------------------------------------------------------

namespace {

struct ImageEntry {
  std::string image_id;
  Role role;
  std::string class_name;
  double width;
  double height;
  fs::path table;
};

std::vector<std::string> header_for(const std::vector<FeatureSpace>& spaces) {
  std::vector<std::string> header{"x_min", "y_min", "x_max", "y_max", "objectness", "overlap"};
  for (const auto& space : spaces)
    for (std::size_t j = 0; j < space.dim; ++j) header.push_back(space.name + "_" + std::to_string(j));
  return header;
}

void read_window_table(const fs::path& path, const std::vector<FeatureSpace>& spaces,
                       ImageRecord& image) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(image.image_id, "empty window table " + path.string());
  const auto expected = header_for(spaces);
  const auto header = split(trim(line), ',');
  bool header_ok = header.size() == expected.size();
  for (std::size_t i = 0; header_ok && i < header.size(); ++i)
    header_ok = trim(header[i]) == expected[i];
  if (!header_ok) fail(image.image_id, "unexpected header in " + path.string());

  std::vector<std::vector<double>> columns(spaces.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const std::string context = "image " + image.image_id + ", row " + std::to_string(row);
    const auto fields = split(trim(line), ',');
    if (fields.size() != expected.size())
      throw DataError(context + ": expected " + std::to_string(expected.size()) + " fields, got " +
                      std::to_string(fields.size()));
    WindowRecord window;
    window.box = {parse_finite(fields[0], context), parse_finite(fields[1], context),
                  parse_finite(fields[2], context), parse_finite(fields[3], context)};
    window.objectness = parse_finite(fields[4], context);
    if (window.objectness < 0.0 || window.objectness > 1.0)
      throw DataError(context + ": objectness outside [0,1]");
    if (!trim(fields[5]).empty()) window.overlap = parse_finite(fields[5], context);
    std::size_t col = 6;
    for (std::size_t s = 0; s < spaces.size(); ++s)
      for (std::size_t j = 0; j < spaces[s].dim; ++j)
        columns[s].push_back(parse_finite(fields[col++], context));
    image.windows.push_back(window);
    ++row;
  }
  for (std::size_t s = 0; s < spaces.size(); ++s) {
    Eigen::MatrixXd table(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(spaces[s].dim));
    for (std::size_t r = 0; r < row; ++r)
      for (std::size_t j = 0; j < spaces[s].dim; ++j)
        table(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
            columns[s][r * spaces[s].dim + j];
    image.features.emplace(spaces[s].name, std::move(table));
  }
}

std::string window_table_text(const ImageRecord& image, const std::vector<FeatureSpace>& spaces) {
  std::string out;
  const auto header = header_for(spaces);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ',';
    out += header[i];
  }
  out += '\n';
  for (std::size_t w = 0; w < image.windows.size(); ++w) {
    const auto& window = image.windows[w];
    out += format_double(window.box.x_min) + ',' + format_double(window.box.y_min) + ',' +
           format_double(window.box.x_max) + ',' + format_double(window.box.y_max) + ',' +
           format_double(window.objectness) + ',';
    if (window.overlap) out += format_double(*window.overlap);
    for (const auto& space : spaces) {
      const auto& table = image.feature_table(space.name);
      for (Eigen::Index j = 0; j < table.cols(); ++j)
        out += ',' + format_double(table(static_cast<Eigen::Index>(w), j));
    }
    out += '\n';
  }
  return out;
}

}  // namespace

Dataset load_dataset(const fs::path& manifest_path) {
  if (!fs::exists(manifest_path)) throw DataError("manifest not found: " + manifest_path.string());
  const fs::path base = manifest_path.parent_path();
  const std::string text = read_file(manifest_path);

  Dataset dataset;
  std::vector<ImageEntry> entries;
  fs::path gt_path;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    const auto eq = content.find('=');
    const std::string context = manifest_path.string() + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos) throw DataError(context + ": expected 'key = value'");
    const std::string key(trim(content.substr(0, eq)));
    const std::string value(trim(content.substr(eq + 1)));
    std::istringstream fields(value);
    if (key == "format") {
      if (value != "aetransfer-dataset-1") throw DataError(context + ": unsupported format " + value);
    } else if (key == "source_config") {
      try {
        dataset.source_config = parse_source_config(value);
      } catch (const ConfigError& e) {
        throw DataError(context + ": " + e.what());
      }
    } else if (key == "target_class") {
      dataset.target_class = value;
    } else if (key == "ground_truth") {
      gt_path = base / value;
    } else if (key == "feature_space") {
      FeatureSpace space;
      long long dim = 0;
      if (!(fields >> space.name >> dim) || dim <= 0)
        throw DataError(context + ": expected 'feature_space = <name> <dim>'");
      space.dim = static_cast<std::size_t>(dim);
      dataset.feature_spaces.push_back(space);
    } else if (key == "image") {
      std::string id, role, class_name, width, height, table;
      if (!(fields >> id >> role >> class_name >> width >> height >> table))
        throw DataError(context + ": expected 'image = <id> <role> <class> <width> <height> <table>'");
      ImageEntry entry{id, parse_role(role), class_name, parse_finite(width, context),
                       parse_finite(height, context), base / table};
      entries.push_back(std::move(entry));
    } else {
      throw DataError(context + ": unknown key '" + key + "'");
    }
  }

  std::sort(entries.begin(), entries.end(),
            [](const ImageEntry& a, const ImageEntry& b) { return a.image_id < b.image_id; });
  for (std::size_t i = 1; i < entries.size(); ++i)
    if (entries[i].image_id == entries[i - 1].image_id)
      throw DataError("duplicate image_id " + entries[i].image_id);

  for (const auto& entry : entries) {
    ImageRecord image;
    image.image_id = entry.image_id;
    image.class_name = entry.class_name;
    image.role = entry.role;
    image.width = entry.width;
    image.height = entry.height;
    read_window_table(entry.table, dataset.feature_spaces, image);
    dataset.images.push_back(std::move(image));
  }

  if (!gt_path.empty()) {
    const std::string gt_text = read_file(gt_path);
    std::istringstream gt_in(gt_text);
    std::getline(gt_in, line);
    if (trim(line) != "image_id,x_min,y_min,x_max,y_max")
      throw DataError("unexpected header in " + gt_path.string());
    std::size_t row = 0;
    while (std::getline(gt_in, line)) {
      if (trim(line).empty()) continue;
      const std::string context = gt_path.string() + ", row " + std::to_string(row++);
      const auto fields = split(trim(line), ',');
      if (fields.size() != 5) throw DataError(context + ": expected 5 fields");
      const std::string id(trim(fields[0]));
      auto it = std::find_if(dataset.images.begin(), dataset.images.end(),
                             [&](const ImageRecord& image) { return image.image_id == id; });
      if (it == dataset.images.end()) throw DataError(context + ": unknown image_id " + id);
      it->gt_boxes.push_back({parse_finite(fields[1], context), parse_finite(fields[2], context),
                              parse_finite(fields[3], context), parse_finite(fields[4], context)});
    }
  }

  dataset.validate();
  return dataset;
}

fs::path save_dataset(const Dataset& dataset, const fs::path& directory) {
  dataset.validate();
  fs::create_directories(directory / "windows");
  std::string manifest = "# aetransfer dataset manifest\nformat = aetransfer-dataset-1\n";
  manifest += "source_config = " + to_string(dataset.source_config) + "\n";
  if (!dataset.target_class.empty()) manifest += "target_class = " + dataset.target_class + "\n";
  manifest += "ground_truth = ground_truth.csv\n";
  for (const auto& space : dataset.feature_spaces)
    manifest += "feature_space = " + space.name + " " + std::to_string(space.dim) + "\n";
  std::string gt = "image_id,x_min,y_min,x_max,y_max\n";
  for (const auto& image : dataset.images) {
    const std::string table = "windows/" + image.image_id + ".csv";
    manifest += "image = " + image.image_id + " " + to_string(image.role) + " " + image.class_name +
                " " + format_double(image.width) + " " + format_double(image.height) + " " + table +
                "\n";
    write_file_atomic(directory / table, window_table_text(image, dataset.feature_spaces));
    for (const auto& box : image.gt_boxes)
      gt += image.image_id + "," + format_double(box.x_min) + "," + format_double(box.y_min) + "," +
            format_double(box.x_max) + "," + format_double(box.y_max) + "\n";
  }
  write_file_atomic(directory / "ground_truth.csv", gt);
  const fs::path manifest_path = directory / "manifest.txt";
  write_file_atomic(manifest_path, manifest);
  return manifest_path;
}

}  // namespace aetransfer
