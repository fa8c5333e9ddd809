#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dcem {

struct RocPoint {
  double fpr;
  double tpr;
};

// Staircase ROC from (0,0) to (1,1); tied scores form one diagonal step.
struct RocCurve {
  std::vector<RocPoint> points;

  // Trapezoid area under the curve.
  double area() const;
};

// Mann-Whitney AUC: P(s+ > s-) + P(s+ == s-) / 2. Throws
// std::invalid_argument when only one class is present.
double auc(std::span<const double> scores, std::span<const int> labels);

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);

// Area between two ROC curves, each linearly interpolated on the union of
// their FPR breakpoints.
double area_between(const RocCurve& a, const RocCurve& b);

// Absolute area between the group-0 and group-1 ROC curves. Throws
// std::invalid_argument if either group lacks a positive or a negative.
double roc_gap(std::span<const double> scores, std::span<const int> labels,
               std::span<const int> groups);

struct GroupCounts {
  std::size_t pos[2] = {0, 0};
  std::size_t neg[2] = {0, 0};
};

struct EvalReport {
  double auc = 0.0;
  double roc_gap = 0.0;
  bool roc_gap_valid = false;
  GroupCounts counts;
};

EvalReport evaluate(std::span<const double> scores, std::span<const int> labels,
                    std::span<const int> groups);

struct Aggregate {
  double median;
  double min;
  double max;
  double range;
};

Aggregate aggregate(std::span<const double> values);

// (mean predicted, empirical rate, count) per equal-width probability bin.
struct CalibrationBin {
  double mean_predicted;
  double empirical_rate;
  std::size_t count;
};

std::vector<CalibrationBin> calibration_bins(std::span<const double> predicted,
                                             std::span<const int> outcomes, std::size_t bins);

}  // namespace dcem
