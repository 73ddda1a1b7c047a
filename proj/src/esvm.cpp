#include "aetransfer/esvm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aetransfer/error.hpp"
#include "aetransfer/random.hpp"

namespace aetransfer {

std::vector<Exemplar> collect_exemplars(const Dataset& dataset,
                                        const std::vector<std::size_t>& source_images,
                                        double min_iou) {
  std::vector<Exemplar> exemplars;
  for (std::size_t image_index : source_images) {
    const auto& image = dataset.images.at(image_index);
    for (std::size_t g = 0; g < image.gt_boxes.size(); ++g) {
      const Box& gt = image.gt_boxes[g];
      double best = -1.0;
      std::size_t best_window = 0;
      for (std::size_t w = 0; w < image.windows.size(); ++w) {
        const double value = iou(image.windows[w].box, gt);
        if (value > best) {
          best = value;
          best_window = w;
        }
      }
      if (best < min_iou) continue;
      exemplars.push_back({image.image_id + "#" + std::to_string(g), image_index, gt, best_window});
    }
  }
  return exemplars;
}

std::vector<WindowRef> mine_negatives(const Dataset& labeled_sources,
                                      const std::vector<std::size_t>& source_images,
                                      const Exemplar& exemplar, std::size_t max_count,
                                      std::uint64_t seed) {
  std::vector<WindowRef> pool;
  for (std::size_t image_index : source_images) {
    const auto& image = labeled_sources.images.at(image_index);
    for (std::size_t w = 0; w < image.windows.size(); ++w) {
      const auto& window = image.windows[w];
      if (!window.overlap)
        throw DataError("mine_negatives: image " + image.image_id + " window " + std::to_string(w) +
                        " has no overlap label");
      if (*window.overlap >= 0.5) continue;
      if (image_index == exemplar.image && iou(window.box, exemplar.gt_box) >= 0.5) continue;
      pool.push_back({image_index, w});
    }
  }
  if (pool.empty())
    throw DataError("mine_negatives: no window with overlap < 0.5 for exemplar " +
                    exemplar.exemplar_id);
  Rng rng(seed);
  std::vector<WindowRef> picked;
  for (std::size_t i : rng.sample_indices(pool.size(), max_count)) picked.push_back(pool[i]);
  return picked;
}

double esvm_objective(const Eigen::VectorXd& weights, double bias,
                      const Eigen::Ref<const Eigen::VectorXd>& exemplar,
                      const Eigen::Ref<const Eigen::MatrixXd>& negatives, const EsvmParams& params) {
  double value = weights.squaredNorm();
  value += params.c1 * std::max(0.0, 1.0 - (exemplar.dot(weights) + bias));
  double negative_loss = 0.0;
  for (Eigen::Index i = 0; i < negatives.rows(); ++i)
    negative_loss += std::max(0.0, 1.0 + negatives.row(i).dot(weights) + bias);
  return value + params.c2 * negative_loss;
}

namespace {

// Dual coordinate descent for a fixed bias b on
//   min 1/2 ||w||^2 + sum_k U_k max(0, m_k - y_k w.x_k),  m_k = 1 - y_k b,
// which is half the exemplar objective with U_k = c_k / 2. The dual is
//   max sum_k a_k m_k - 1/2 ||sum_k a_k y_k x_k||^2,  0 <= a_k <= U_k.
class FixedBiasDual {
 public:
  FixedBiasDual(const Eigen::Ref<const Eigen::VectorXd>& exemplar,
                const Eigen::Ref<const Eigen::MatrixXd>& negatives, const EsvmParams& params)
      : samples_(exemplar.size(), negatives.rows() + 1),
        labels_(negatives.rows() + 1),
        upper_(negatives.rows() + 1),
        alpha_(Eigen::VectorXd::Zero(negatives.rows() + 1)),
        w_(Eigen::VectorXd::Zero(exemplar.size())),
        tolerance_(params.tolerance) {
    samples_.col(0) = exemplar;
    samples_.rightCols(negatives.rows()) = negatives.transpose();
    labels_.setConstant(-1.0);
    labels_(0) = 1.0;
    upper_.setConstant(0.5 * params.c2);
    upper_(0) = 0.5 * params.c1;
    sq_norms_ = samples_.colwise().squaredNorm().transpose();
  }

  // Solves at bias b starting from the current dual point; returns the number
  // of sweeps used (capped at `budget`) and whether it converged.
  std::pair<std::size_t, bool> solve(double b, std::size_t budget) {
    const Eigen::Index n = samples_.cols();
    for (std::size_t pass = 1; pass <= budget; ++pass) {
      double pg_max = -std::numeric_limits<double>::infinity();
      double pg_min = std::numeric_limits<double>::infinity();
      for (Eigen::Index k = 0; k < n; ++k) {
        const double y = labels_(k);
        const double margin = 1.0 - y * b;
        const double grad = y * samples_.col(k).dot(w_) - margin;
        double pg = grad;
        if (alpha_(k) <= 0.0)
          pg = std::min(grad, 0.0);
        else if (alpha_(k) >= upper_(k))
          pg = std::max(grad, 0.0);
        pg_max = std::max(pg_max, pg);
        pg_min = std::min(pg_min, pg);
        if (pg == 0.0) continue;
        const double updated =
            sq_norms_(k) > 0.0 ? std::clamp(alpha_(k) - grad / sq_norms_(k), 0.0, upper_(k))
                               : (margin > 0.0 ? upper_(k) : 0.0);
        const double delta = updated - alpha_(k);
        if (delta != 0.0) {
          w_.noalias() += (delta * y) * samples_.col(k);
          alpha_(k) = updated;
        }
      }
      if (pg_max - pg_min <= tolerance_) return {pass, true};
    }
    return {budget, false};
  }

  // Derivative of the exemplar objective (twice the fixed-bias optimum) in b.
  double bias_slope() const { return -2.0 * alpha_.dot(labels_); }

  const Eigen::VectorXd& weights() const { return w_; }

 private:
  Eigen::MatrixXd samples_;  // dim x (1 + negatives); column 0 is the exemplar
  Eigen::VectorXd labels_;
  Eigen::VectorXd upper_;
  Eigen::VectorXd alpha_;
  Eigen::VectorXd sq_norms_;
  Eigen::VectorXd w_;
  double tolerance_;
};

}  // namespace

ExemplarModel train_esvm(const Eigen::Ref<const Eigen::VectorXd>& exemplar,
                         const Eigen::Ref<const Eigen::MatrixXd>& negatives,
                         const EsvmParams& params) {
  if (!(params.c1 > 0.0) || !(params.c2 > 0.0))
    throw ConfigError("train_esvm: C1 and C2 must be positive");
  if (negatives.rows() > 0 && negatives.cols() != exemplar.size())
    throw DataError("train_esvm: negatives and exemplar differ in dimension");
  if (params.fit_bias && negatives.rows() == 0)
    throw DataError("train_esvm: fitting a bias needs at least one negative");
  if (!exemplar.allFinite() || !negatives.allFinite())
    throw DataError("train_esvm: non-finite feature value");

  FixedBiasDual dual(exemplar, negatives, params);
  auto run = [&](double b) {
    if (!dual.solve(b, params.max_passes).second) {
      const double objective = esvm_objective(dual.weights(), b, exemplar, negatives, params);
      throw NumericalError("train_esvm: no convergence within " +
                           std::to_string(params.max_passes) +
                           " passes; final objective " + std::to_string(objective));
    }
    return dual.bias_slope();
  };

  ExemplarModel model;
  model.bias = 0.0;
  if (!params.fit_bias) {
    run(0.0);
    model.weights = dual.weights();
    return model;
  }

  // The optimum over w at fixed b is convex in b and its slope comes from the
  // dual point, so the optimal bias is found by bracketing then bisection.
  double lo = 0.0;
  double hi = 0.0;
  const double slope0 = run(0.0);
  if (slope0 != 0.0) {
    const double direction = slope0 < 0.0 ? 1.0 : -1.0;
    double step = 1.0;
    double inner = 0.0;
    double outer = direction * step;
    int expansions = 0;
    while (run(outer) * direction < 0.0) {
      inner = outer;
      step *= 2.0;
      outer = inner + direction * step;
      if (++expansions > 60) throw NumericalError("train_esvm: cannot bracket the bias");
    }
    lo = std::min(inner, outer);
    hi = std::max(inner, outer);
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (hi - lo <= 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)})) break;
      const double slope = run(mid);
      if (slope == 0.0) {
        lo = hi = mid;
        break;
      }
      (slope < 0.0 ? lo : hi) = mid;
    }
  }
  model.bias = 0.5 * (lo + hi);
  run(model.bias);
  model.weights = dual.weights();
  return model;
}

Eigen::MatrixXd image_responses(const ImageRecord& image, const std::vector<ExemplarModel>& models,
                                const std::string& feature_space) {
  const auto it = image.features.find(feature_space);
  if (it == image.features.end())
    throw DataError("response_matrix: image " + image.image_id + " has no '" + feature_space +
                    "' features");
  const Eigen::MatrixXd& x = it->second;
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(models.size()));
  for (std::size_t o = 0; o < models.size(); ++o) {
    const auto& model = models[o];
    if (model.feature_space != feature_space)
      throw DataError("response_matrix: model " + model.exemplar_id + " belongs to '" +
                      model.feature_space + "'");
    if (model.weights.size() != x.cols())
      throw DataError("response_matrix: model " + model.exemplar_id + " has dimension " +
                      std::to_string(model.weights.size()));
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      out(r, static_cast<Eigen::Index>(o)) = x.row(r).dot(model.weights) + model.bias;
  }
  return out;
}

ResponseMatrix response_matrix(const Dataset& dataset, const std::vector<WindowRef>& windows,
                               const std::vector<ExemplarModel>& models,
                               const std::string& feature_space) {
  ResponseMatrix result;
  result.values.resize(static_cast<Eigen::Index>(windows.size()),
                       static_cast<Eigen::Index>(models.size()));
  result.row_index = windows;
  for (const auto& model : models) {
    if (model.feature_space != feature_space)
      throw DataError("response_matrix: model " + model.exemplar_id + " belongs to '" +
                      model.feature_space + "'");
    result.col_index.push_back(model.exemplar_id);
  }
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& ref = windows[i];
    const auto& image = dataset.images.at(ref.image);
    const auto it = image.features.find(feature_space);
    if (it == image.features.end() || ref.window >= static_cast<std::size_t>(it->second.rows()))
      throw DataError("response_matrix: no '" + feature_space + "' vector for image " +
                      image.image_id + " window " + std::to_string(ref.window));
    const auto x = it->second.row(static_cast<Eigen::Index>(ref.window));
    for (std::size_t o = 0; o < models.size(); ++o) {
      if (models[o].weights.size() != x.size())
        throw DataError("response_matrix: model " + models[o].exemplar_id +
                        " does not match the feature dimension");
      result.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(o)) =
          x.dot(models[o].weights) + models[o].bias;
    }
  }
  return result;
}

}  // namespace aetransfer
