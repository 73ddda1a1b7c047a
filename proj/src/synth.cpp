#include "aetransfer/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "aetransfer/error.hpp"
#include "aetransfer/random.hpp"

namespace aetransfer {

void SynthOptions::validate() const {
  if (n_source < 1) throw ConfigError("synth: n_source must be positive");
  if (d_latent < 2) throw ConfigError("synth: d_latent must be at least 2");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("synth: noise must be >= 0");
  if (windows_per_image < 2) throw ConfigError("synth: need at least two windows per image");
  if (classes < 1) throw ConfigError("synth: need at least one class");
  if (!(target_share > 0.0 && target_share <= 1.0)) throw ConfigError("synth: target_share must lie in (0, 1]");
  if (classes == 1 && target_share != 1.0) throw ConfigError("synth: a single class needs target_share 1");
  if (!(class_spread >= 0.0) || !std::isfinite(class_spread))
    throw ConfigError("synth: class_spread must be >= 0");
  if (feature_spaces.empty()) throw ConfigError("synth: need at least one feature space");
  for (const auto& space : feature_spaces)
    if (space.dim < 1 || space.name.empty()) throw ConfigError("synth: bad feature space");
}

namespace {

struct ClassShape {
  double area_fraction;
  double aspect;  // width / height
  Eigen::VectorXd centroid;  // appearance weights over components 1..d_latent-1
};

std::string padded(char prefix, std::size_t i) {
  std::string digits = std::to_string(i);
  if (digits.size() < 5) digits.insert(0, 5 - digits.size(), '0');
  return prefix + digits;
}

// Integer box clamped inside the image with sides of at least 2 pixels.
Box integer_box(double cx, double cy, double w, double h, double width, double height) {
  w = std::clamp(std::round(w), 2.0, width);
  h = std::clamp(std::round(h), 2.0, height);
  const double x0 = std::clamp(std::round(cx - 0.5 * w), 0.0, width - w);
  const double y0 = std::clamp(std::round(cy - 0.5 * h), 0.0, height - h);
  return {x0, y0, x0 + w, y0 + h};
}

double intersection(const Box& a, const Box& b) {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  return w > 0.0 && h > 0.0 ? w * h : 0.0;
}

ImageRecord make_image(Rng& rng, const std::string& id, const std::string& class_name,
                       const ClassShape& shape, Role role, const SynthOptions& options,
                       const std::vector<Eigen::MatrixXd>& projections) {
  ImageRecord image;
  image.image_id = id;
  image.class_name = class_name;
  image.role = role;
  image.width = std::round(rng.uniform(160.0, 320.0));
  image.height = std::round(rng.uniform(160.0, 320.0));
  const double W = image.width;
  const double H = image.height;

  const std::size_t d = options.d_latent;
  Eigen::VectorXd appearance = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  // Position of the appearance along the object components, in [-1, 1]. The
  // box shape follows it, as a viewpoint change would.
  for (std::size_t j = 1; j < d; ++j) {
    const double weight = shape.centroid(static_cast<Eigen::Index>(j - 1)) * std::exp(rng.normal());
    appearance(static_cast<Eigen::Index>(j)) = weight;
  }
  appearance /= appearance.sum();
  double pose = 0.0;
  for (std::size_t j = 1; j < d; ++j)
    pose += appearance(static_cast<Eigen::Index>(j)) *
            (d == 2 ? 0.0 : 2.0 * static_cast<double>(j - 1) / static_cast<double>(d - 2) - 1.0);

  const double area = shape.area_fraction * W * H * std::exp(0.5 * pose + 0.1 * rng.normal());
  const double aspect = shape.aspect * std::exp(0.8 * pose + 0.1 * rng.normal());
  const double gw = std::min(std::sqrt(area * aspect), 0.9 * W);
  const double gh = std::min(std::sqrt(area / aspect), 0.9 * H);
  const Box gt = integer_box(rng.uniform(0.5 * gw, W - 0.5 * gw), rng.uniform(0.5 * gh, H - 0.5 * gh),
                             gw, gh, W, H);
  image.gt_boxes.push_back(gt);

  const std::size_t n = options.windows_per_image;
  // Source images always show the object well; target images may not.
  const std::size_t near = role == Role::source ? n * 3 / 10 : rng.below(n * 3 / 10 + 1);
  std::vector<Box> boxes;
  if (role == Role::source) boxes.push_back(gt);
  const double gcx = 0.5 * (gt.x_min + gt.x_max);
  const double gcy = 0.5 * (gt.y_min + gt.y_max);
  while (boxes.size() < near) {
    const double spread = rng.uniform(0.03, 0.5);
    boxes.push_back(integer_box(gcx + spread * gt.width() * rng.normal(),
                                gcy + spread * gt.height() * rng.normal(),
                                gt.width() * std::exp(spread * rng.normal()),
                                gt.height() * std::exp(spread * rng.normal()), W, H));
  }
  while (boxes.size() < n) {
    const double w = rng.uniform(0.1, 0.9) * W;
    const double h = rng.uniform(0.1, 0.9) * H;
    boxes.push_back(integer_box(rng.uniform(0.5 * w, W - 0.5 * w), rng.uniform(0.5 * h, H - 0.5 * h), w, h,
                                W, H));
  }
  for (std::size_t i = boxes.size() - 1; i > 0; --i) std::swap(boxes[i], boxes[rng.below(i + 1)]);

  for (std::size_t s = 0; s < options.feature_spaces.size(); ++s)
    image.features[options.feature_spaces[s].name].resize(
        static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(options.feature_spaces[s].dim));
  for (std::size_t w = 0; w < n; ++w) {
    const Box& box = boxes[w];
    const double inter = intersection(box, gt);
    const double overlap = inter / (box.area() + gt.area() - inter);
    const double covered = inter / box.area();
    Eigen::VectorXd latent = covered * appearance;
    latent(0) += 1.0 - covered;
    const double logit = 2.5 * (overlap - 0.5) + 1.5 * rng.normal();
    image.windows.push_back({box, 1.0 / (1.0 + std::exp(-logit)), std::nullopt});
    for (std::size_t s = 0; s < options.feature_spaces.size(); ++s) {
      auto& table = image.features[options.feature_spaces[s].name];
      Eigen::VectorXd x = projections[s] * latent;
      for (Eigen::Index j = 0; j < x.size(); ++j) x(j) += options.noise * rng.normal();
      table.row(static_cast<Eigen::Index>(w)) = x.transpose();
    }
  }
  return image;
}

}  // namespace

Dataset generate_synthetic(const SynthOptions& options) {
  options.validate();
  Dataset dataset;
  dataset.feature_spaces = options.feature_spaces;
  std::sort(dataset.feature_spaces.begin(), dataset.feature_spaces.end(),
            [](const FeatureSpace& a, const FeatureSpace& b) { return a.name < b.name; });
  dataset.source_config = SourceConfig::family;
  dataset.target_class = "c0";

  std::vector<Eigen::MatrixXd> projections;
  for (const auto& space : dataset.feature_spaces) {
    Rng rng(derive_seed(options.seed, "projection/" + space.name));
    Eigen::MatrixXd p(static_cast<Eigen::Index>(space.dim), static_cast<Eigen::Index>(options.d_latent));
    for (Eigen::Index r = 0; r < p.rows(); ++r)
      for (Eigen::Index c = 0; c < p.cols(); ++c) p(r, c) = rng.normal();
    projections.push_back(std::move(p));
  }

  std::vector<ClassShape> shapes;
  Rng class_rng(derive_seed(options.seed, "classes"));
  for (std::size_t c = 0; c < options.classes; ++c) {
    ClassShape shape;
    // The target class sits in the middle; siblings alternate smaller and larger.
    const double offset = c == 0 ? 0.0 : ((c % 2 == 1) ? -1.0 : 1.0) * static_cast<double>((c + 1) / 2);
    shape.area_fraction = 0.22 * std::exp(options.class_spread * offset);
    shape.aspect = std::exp(0.6 * options.class_spread * offset);
    shape.centroid.resize(static_cast<Eigen::Index>(options.d_latent - 1));
    for (Eigen::Index j = 0; j < shape.centroid.size(); ++j) shape.centroid(j) = class_rng.uniform(0.2, 1.0);
    shapes.push_back(std::move(shape));
  }

  Rng rng(derive_seed(options.seed, "images"));
  std::size_t siblings_seen = 0;
  for (std::size_t i = 0; i < options.n_source; ++i) {
    // Spread target-class images evenly through the index range.
    const bool own = std::floor(static_cast<double>(i + 1) * options.target_share) >
                     std::floor(static_cast<double>(i) * options.target_share);
    const std::size_t c = own ? 0 : 1 + (siblings_seen++ % (options.classes - 1));
    dataset.images.push_back(make_image(rng, padded('s', i), "c" + std::to_string(c), shapes[c],
                                        Role::source, options, projections));
  }
  for (std::size_t i = 0; i < options.n_target; ++i)
    dataset.images.push_back(
        make_image(rng, padded('t', i), "c0", shapes[0], Role::target, options, projections));
  std::sort(dataset.images.begin(), dataset.images.end(),
            [](const ImageRecord& a, const ImageRecord& b) { return a.image_id < b.image_id; });
  dataset.validate();
  return dataset;
}

}  // namespace aetransfer
