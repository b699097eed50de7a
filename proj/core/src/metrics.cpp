#include "lssat/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>

#include "lssat/error.hpp"

namespace lssat {

AccuracyReport accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> labels) {
  if (predictions.size() != labels.size()) throw ShapeError("accuracy: predictions and labels differ in length");
  if (labels.empty()) throw RangeError("accuracy: empty input");
  AccuracyReport r;
  std::map<std::size_t, std::size_t> correct;
  std::size_t total_correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++r.counts[labels[i]];
    if (predictions[i] == labels[i]) {
      ++correct[labels[i]];
      ++total_correct;
    }
  }
  double sum = 0.0;
  for (const auto& [c, n] : r.counts) {
    const double acc = static_cast<double>(correct[c]) / static_cast<double>(n);
    r.per_class[c] = acc;
    sum += acc;
  }
  r.average = sum / static_cast<double>(r.counts.size());
  r.overall = static_cast<double>(total_correct) / static_cast<double>(labels.size());
  return r;
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const std::size_t> labels) {
  if (scores.size() != labels.size()) throw ShapeError("roc: scores and labels differ in length");
  std::size_t pos = 0, neg = 0;
  for (auto l : labels) {
    if (l > 1) throw RangeError("roc: labels must be 0 or 1");
    (l == 1 ? pos : neg)++;
  }
  if (pos == 0 || neg == 0) throw RangeError("roc: both classes must be present");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<RocPoint> pts{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == 1 ? tp : fp)++;
    pts.push_back({static_cast<double>(fp) / static_cast<double>(neg), static_cast<double>(tp) / static_cast<double>(pos)});
  }
  return pts;
}

double auc(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  }
  return area;
}

namespace {

// Highest TPR the polyline reaches at `x` (top of a vertical segment).
double tpr_at(const std::vector<RocPoint>& c, double x) {
  double best = -1.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i].fpr == x) best = std::max(best, c[i].tpr);
    if (i > 0 && c[i - 1].fpr < x && x < c[i].fpr) {
      const double t = (x - c[i - 1].fpr) / (c[i].fpr - c[i - 1].fpr);
      best = std::max(best, c[i - 1].tpr + t * (c[i].tpr - c[i - 1].tpr));
    }
  }
  return best;
}

}  // namespace

std::vector<RocPoint> macro_average_roc(const std::vector<std::vector<RocPoint>>& curves) {
  if (curves.empty()) throw RangeError("macro roc: no curves");
  if (curves.size() == 1) return curves.front();
  std::set<double> grid;
  for (const auto& c : curves)
    for (const auto& p : c) grid.insert(p.fpr);
  std::vector<RocPoint> out{{0.0, 0.0}};
  for (double x : grid) {
    double sum = 0.0;
    for (const auto& c : curves) sum += tpr_at(c, x);
    out.push_back({x, sum / static_cast<double>(curves.size())});
  }
  if (out.back().fpr != 1.0 || out.back().tpr != 1.0) out.push_back({1.0, 1.0});
  return out;
}

}  // namespace lssat
