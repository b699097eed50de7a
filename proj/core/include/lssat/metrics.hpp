#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

namespace lssat {

struct AccuracyReport {
  std::map<std::size_t, double> per_class;    // classes present in labels only
  std::map<std::size_t, std::size_t> counts;
  double overall = 0.0;  // correct / total
  double average = 0.0;  // unweighted mean of per_class
};

AccuracyReport accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  bool operator==(const RocPoint&) const = default;
};

// Sweeps thresholds over the distinct scores in descending order, one point
// per distinct score, from (0,0) to (1,1). Labels are 0/1; both must occur.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const std::size_t> labels);

// Trapezoidal area under the polyline.
double auc(std::span<const RocPoint> points);

// One-vs-rest macro average: each curve is linearly interpolated on the
// union of all FPR values and the TPRs are averaged.
std::vector<RocPoint> macro_average_roc(const std::vector<std::vector<RocPoint>>& curves);

}  // namespace lssat
