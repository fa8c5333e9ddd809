#include "dcem/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dcem {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("scores and labels differ in length");
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels) {
  std::size_t pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw std::invalid_argument("labels must be 0/1");
    pos += static_cast<std::size_t>(l);
  }
  return {pos, labels.size() - pos};
}

std::vector<std::size_t> order_descending(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t i, std::size_t j) { return scores[i] > scores[j]; });
  return idx;
}

}  // namespace

double RocCurve::area() const {
  double a = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    a += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
  }
  return a;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores.size(), labels.size());
  const auto [pos, neg] = class_counts(labels);
  if (pos == 0 || neg == 0) throw std::invalid_argument("AUC needs both classes");
  // Rank-sum with midranks for ties.
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]] == 1) rank_sum += midrank;
    }
    i = j;
  }
  const double p = static_cast<double>(pos);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(neg));
}

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores.size(), labels.size());
  const auto [pos, neg] = class_counts(labels);
  if (pos == 0 || neg == 0) throw std::invalid_argument("ROC curve needs both classes");
  const auto idx = order_descending(scores);
  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      if (labels[idx[j]] == 1) {
        ++tp;
      } else {
        ++fp;
      }
      ++j;
    }
    const RocPoint next{static_cast<double>(fp) / static_cast<double>(neg),
                        static_cast<double>(tp) / static_cast<double>(pos)};
    // Merge runs of purely vertical or purely horizontal steps.
    const std::size_t m = curve.points.size();
    if (m >= 2) {
      const RocPoint& a = curve.points[m - 2];
      const RocPoint& b = curve.points[m - 1];
      if ((a.fpr == b.fpr && b.fpr == next.fpr) || (a.tpr == b.tpr && b.tpr == next.tpr)) {
        curve.points.pop_back();
      }
    }
    curve.points.push_back(next);
    i = j;
  }
  return curve;
}

namespace {

// Advances `j` to the last vertex with fpr <= f, i.e. the start of the
// segment covering the open interval just right of f (above any vertical
// jump at f).
void advance_segment(const RocCurve& c, double f, std::size_t& j) {
  while (j + 1 < c.points.size() && c.points[j + 1].fpr <= f) ++j;
}

double interpolate(const RocPoint& p, const RocPoint& q, double f) {
  if (q.fpr == p.fpr) return q.tpr;
  return p.tpr + (q.tpr - p.tpr) * (f - p.fpr) / (q.fpr - p.fpr);
}

// Exact integral of |l(x)| for l linear on [u, v] with endpoint values d0, d1.
double abs_linear_integral(double d0, double d1, double width) {
  if ((d0 >= 0.0 && d1 >= 0.0) || (d0 <= 0.0 && d1 <= 0.0)) {
    return 0.5 * width * std::abs(d0 + d1);
  }
  // Sign change inside: two triangles.
  const double total = std::abs(d0) + std::abs(d1);
  return 0.5 * width * (d0 * d0 + d1 * d1) / total;
}

}  // namespace

double area_between(const RocCurve& a, const RocCurve& b) {
  std::vector<double> grid;
  grid.reserve(a.points.size() + b.points.size());
  for (const auto& p : a.points) grid.push_back(p.fpr);
  for (const auto& p : b.points) grid.push_back(p.fpr);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  double area = 0.0;
  std::size_t ia = 0, ib = 0;
  for (std::size_t g = 0; g + 1 < grid.size(); ++g) {
    const double u = grid[g];
    const double v = grid[g + 1];
    advance_segment(a, u, ia);
    advance_segment(b, u, ib);
    const double da_u = interpolate(a.points[ia], a.points[ia + 1], u);
    const double da_v = interpolate(a.points[ia], a.points[ia + 1], v);
    const double db_u = interpolate(b.points[ib], b.points[ib + 1], u);
    const double db_v = interpolate(b.points[ib], b.points[ib + 1], v);
    area += abs_linear_integral(da_u - db_u, da_v - db_v, v - u);
  }
  return area;
}

double roc_gap(std::span<const double> scores, std::span<const int> labels,
               std::span<const int> groups) {
  check_lengths(scores.size(), labels.size());
  check_lengths(scores.size(), groups.size());
  std::vector<double> s[2];
  std::vector<int> l[2];
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (groups[i] != 0 && groups[i] != 1) throw std::invalid_argument("groups must be 0/1");
    s[groups[i]].push_back(scores[i]);
    l[groups[i]].push_back(labels[i]);
  }
  for (int g = 0; g < 2; ++g) {
    const auto [pos, neg] = class_counts(l[g]);
    if (pos == 0 || neg == 0) {
      throw std::invalid_argument("group " + std::to_string(g) + " has a single label class");
    }
  }
  return area_between(roc_curve(s[0], l[0]), roc_curve(s[1], l[1]));
}

EvalReport evaluate(std::span<const double> scores, std::span<const int> labels,
                    std::span<const int> groups) {
  check_lengths(scores.size(), groups.size());
  EvalReport r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      ++r.counts.pos[groups[i]];
    } else {
      ++r.counts.neg[groups[i]];
    }
  }
  r.auc = auc(scores, labels);
  const bool ok = r.counts.pos[0] && r.counts.neg[0] && r.counts.pos[1] && r.counts.neg[1];
  if (ok) {
    r.roc_gap = roc_gap(scores, labels, groups);
    r.roc_gap_valid = true;
  }
  return r;
}

Aggregate aggregate(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("aggregate of an empty list");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  return {median, v.front(), v.back(), v.back() - v.front()};
}

std::vector<CalibrationBin> calibration_bins(std::span<const double> predicted,
                                             std::span<const int> outcomes, std::size_t bins) {
  check_lengths(predicted.size(), outcomes.size());
  if (bins == 0) throw std::invalid_argument("need at least one bin");
  std::vector<double> sum_p(bins, 0.0), sum_y(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    auto b = static_cast<std::size_t>(predicted[i] * static_cast<double>(bins));
    b = std::min(b, bins - 1);
    sum_p[b] += predicted[i];
    sum_y[b] += outcomes[i];
    ++count[b];
  }
  std::vector<CalibrationBin> out;
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const double c = static_cast<double>(count[b]);
    out.push_back({sum_p[b] / c, sum_y[b] / c, count[b]});
  }
  return out;
}

}  // namespace dcem
