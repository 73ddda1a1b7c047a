#include "aetransfer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aetransfer/error.hpp"
#include "aetransfer/table_io.hpp"

namespace aetransfer {

namespace {

double mean_in_id_order(std::vector<const ScoredOutcome*> subset) {
  std::sort(subset.begin(), subset.end(),
            [](const ScoredOutcome* a, const ScoredOutcome* b) { return a->image_id < b->image_id; });
  double sum = 0.0;
  for (const auto* o : subset) sum += o->iou;
  return sum / static_cast<double>(subset.size());
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::vector<CurvePoint> ranking_curve(const std::vector<ScoredOutcome>& outcomes) {
  if (outcomes.empty()) throw DataError("ranking_curve: no outcomes");
  std::vector<const ScoredOutcome*> ranked;
  for (const auto& o : outcomes) ranked.push_back(&o);
  std::sort(ranked.begin(), ranked.end(), [](const ScoredOutcome* a, const ScoredOutcome* b) {
    if (a->score != b->score) return a->score > b->score;
    return a->image_id < b->image_id;
  });
  const std::size_t n = ranked.size();
  std::vector<CurvePoint> curve;
  for (int p = 5; p <= 100; p += 5) {
    const std::size_t count = (static_cast<std::size_t>(p) * n + 99) / 100;
    std::vector<const ScoredOutcome*> top(ranked.begin(), ranked.begin() + static_cast<long>(count));
    curve.push_back({p, mean_in_id_order(std::move(top))});
  }
  return curve;
}

GroundTruth ground_truth_of(const Dataset& dataset) {
  GroundTruth gt;
  for (const auto& image : dataset.images)
    if (!image.gt_boxes.empty()) gt[image.image_id] = image.gt_boxes;
  return gt;
}

double detection_rate(const std::vector<double>& ious) {
  if (ious.empty()) return 0.0;
  const auto hits = std::count_if(ious.begin(), ious.end(), [](double v) { return v > 0.5; });
  return static_cast<double>(hits) / static_cast<double>(ious.size());
}

EvaluationReport evaluate(const std::vector<ScoredAnnotation>& annotations, const GroundTruth& gt) {
  EvaluationReport report;
  for (const auto& a : annotations) {
    const auto it = gt.find(a.image_id);
    if (it == gt.end() || it->second.empty()) {
      ++report.excluded;
      continue;
    }
    double best = 0.0;
    for (const auto& box : it->second) best = std::max(best, iou(a.box, box));
    report.outcomes.push_back({a.image_id, a.eta, best});
  }
  if (report.outcomes.empty()) throw DataError("evaluate: no annotation has ground truth");
  std::sort(report.outcomes.begin(), report.outcomes.end(),
            [](const ScoredOutcome& a, const ScoredOutcome& b) { return a.image_id < b.image_id; });
  report.n_images = report.outcomes.size();
  std::vector<const ScoredOutcome*> all;
  std::vector<double> ious;
  for (const auto& o : report.outcomes) {
    all.push_back(&o);
    ious.push_back(o.iou);
  }
  report.mean_iou = mean_in_id_order(all);
  report.detection_rate = detection_rate(ious);
  report.ranking_curve = ranking_curve(report.outcomes);
  return report;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DataError("spearman: inputs differ in length");
  if (x.size() < 2) throw DataError("spearman: need at least two observations");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::vector<ScoredAnnotation> top_objectness_baseline(const Dataset& dataset,
                                                      const std::vector<std::size_t>& images) {
  std::vector<ScoredAnnotation> out;
  for (std::size_t index : images) {
    const auto& image = dataset.images.at(index);
    if (image.windows.empty()) continue;
    std::size_t best = 0;
    for (std::size_t w = 1; w < image.windows.size(); ++w)
      if (image.windows[w].objectness > image.windows[best].objectness) best = w;
    const double o = image.windows[best].objectness;
    out.push_back({image.image_id, image.windows[best].box, o, 0.0, o, 0.5});
  }
  return out;
}

std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "percent,mean_iou\n";
  for (const auto& point : curve)
    out += std::to_string(point.percent) + "," + format_double(point.mean_iou) + "\n";
  return out;
}

}  // namespace aetransfer
