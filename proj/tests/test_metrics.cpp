#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dcem/metrics.hpp"
#include "dcem/synthgen.hpp"

using namespace dcem;

namespace {

// Pairwise concordance count; the definition AUC must agree with.
double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      den += 1;
      num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return num / den;
}

}  // namespace

TEST_CASE("auc examples") {
  CHECK(auc(std::vector<double>{0.9, 0.8, 0.1}, std::vector<int>{1, 1, 0}) == 1.0);
  CHECK(auc(std::vector<double>{0.3, 0.3, 0.3, 0.3}, std::vector<int>{1, 0, 1, 0}) == 0.5);
  CHECK(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}) == 0.75);
  CHECK_THROWS(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}));
}

TEST_CASE("roc curve examples") {
  const RocCurve perfect = roc_curve(std::vector<double>{0.9, 0.8, 0.1}, std::vector<int>{1, 1, 0});
  REQUIRE(perfect.points.size() == 3);
  CHECK(perfect.points[0].fpr == 0.0);
  CHECK(perfect.points[0].tpr == 0.0);
  CHECK(perfect.points[1].fpr == 0.0);
  CHECK(perfect.points[1].tpr == 1.0);
  CHECK(perfect.points[2].fpr == 1.0);
  CHECK(perfect.points[2].tpr == 1.0);

  const RocCurve tied = roc_curve(std::vector<double>{2, 2, 2}, std::vector<int>{1, 0, 0});
  REQUIRE(tied.points.size() == 2);
  CHECK(tied.area() == 0.5);
}

TEST_CASE("trapezoid area equals pairwise auc on random sets") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> size(2, 50), level(0, 9);
  std::bernoulli_distribution coin(0.4);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = size(rng);
    std::vector<double> s(static_cast<std::size_t>(n));
    std::vector<int> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      s[static_cast<std::size_t>(i)] = level(rng) / 10.0;  // coarse levels force ties
      y[static_cast<std::size_t>(i)] = coin(rng);
    }
    y[0] = 1;
    y[1] = 0;
    const RocCurve c = roc_curve(s, y);
    CHECK(c.points.front().fpr == 0.0);
    CHECK(c.points.back().tpr == 1.0);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      CHECK(c.points[i].fpr >= c.points[i - 1].fpr);
      CHECK(c.points[i].tpr >= c.points[i - 1].tpr);
    }
    const double oracle = pairwise_auc(s, y);
    CHECK(std::abs(c.area() - oracle) <= 1e-12);
    CHECK(std::abs(auc(s, y) - oracle) <= 1e-12);
  }
}

TEST_CASE("auc invariances") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  std::vector<double> s(200), t(200);
  std::vector<int> y(200), flipped(200);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = z(rng);
    y[i] = s[i] + z(rng) > 0;
    flipped[i] = 1 - y[i];
    t[i] = std::exp(3 * s[i]) + 1;
  }
  CHECK(auc(s, y) == doctest::Approx(auc(t, y)).epsilon(1e-15));
  CHECK(auc(s, y) + auc(s, flipped) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("roc gap examples") {
  // Identical per-group multisets.
  const std::vector<double> s{0.1, 0.7, 0.4, 0.1, 0.7, 0.4};
  const std::vector<int> y{0, 1, 1, 0, 1, 1};
  const std::vector<int> g{0, 0, 0, 1, 1, 1};
  CHECK(roc_gap(s, y, g) == 0.0);

  // Group 0 perfect, group 1 all tied.
  const std::vector<double> s2{0.9, 0.1, 0.5, 0.5};
  const std::vector<int> y2{1, 0, 1, 0};
  const std::vector<int> g2{0, 0, 1, 1};
  CHECK(roc_gap(s2, y2, g2) == doctest::Approx(0.5).epsilon(1e-15));
  const std::vector<int> swapped{1, 1, 0, 0};
  CHECK(roc_gap(s2, y2, swapped) == roc_gap(s2, y2, g2));

  const std::vector<int> y3{1, 1, 1, 0};
  CHECK_THROWS(roc_gap(s2, y3, g2));
  const EvalReport r = evaluate(s2, y3, g2);
  CHECK_FALSE(r.roc_gap_valid);
  CHECK(r.counts.pos[0] == 2);
  CHECK(r.counts.neg[1] == 1);
}

TEST_CASE("roc gap is bounded on random data") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u;
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> s(60);
    std::vector<int> y(60), g(60);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = std::round(u(rng) * 8) / 8;
      y[i] = u(rng) < 0.5;
      g[i] = i % 2;
    }
    y[0] = y[1] = 1;
    y[2] = y[3] = 0;
    const double gap = roc_gap(s, y, g);
    CHECK(gap >= 0.0);
    CHECK(gap <= 1.0);
  }
}

TEST_CASE("a shared score that determines y gives zero gap") {
  // Both groups are ranked by s_Y and labelled by thresholding it.
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  std::vector<double> s;
  std::vector<int> g;
  for (int i = 0; i < 4000; ++i) {
    const int a = i % 2;
    const double mu = a ? 0.01 : -0.01;
    const double x[2] = {mu + 0.03 * z(rng), mu + 0.03 * z(rng)};
    s.push_back(outcome_score(x, 0.0));
    g.push_back(a);
  }
  std::vector<double> sorted = s;
  std::nth_element(sorted.begin(), sorted.begin() + 2000, sorted.end());
  const double cut = sorted[2000];
  std::vector<int> y;
  for (double v : s) y.push_back(v > cut);
  CHECK(roc_gap(s, y, g) == 0.0);
}

TEST_CASE("aggregate examples") {
  const Aggregate one = aggregate(std::vector<double>{0.1});
  CHECK(one.median == 0.1);
  CHECK(one.range == 0.0);
  const Aggregate two = aggregate(std::vector<double>{0.4, 0.2});
  CHECK(two.median == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(two.range == doctest::Approx(0.2).epsilon(1e-15));
  std::vector<double> v{0.5, 0.1, 0.9, 0.3, 0.7};
  const Aggregate a = aggregate(v);
  std::reverse(v.begin(), v.end());
  const Aggregate b = aggregate(v);
  CHECK(a.median == b.median);
  CHECK(a.min == b.min);
  CHECK(a.max == b.max);
  CHECK(a.range == b.range);
  CHECK(a.median == 0.5);
  CHECK_THROWS(aggregate(std::vector<double>{}));
}

TEST_CASE("calibration bins") {
  const std::vector<double> p{0.05, 0.15, 0.12, 0.95};
  const std::vector<int> t{0, 1, 0, 1};
  const auto bins = calibration_bins(p, t, 10);
  REQUIRE(bins.size() == 3);  // empty bins are omitted
  CHECK(bins[0].count == 1);
  CHECK(bins[1].count == 2);
  CHECK(bins[1].empirical_rate == 0.5);
  CHECK(bins[1].mean_predicted == doctest::Approx(0.135));
  CHECK(bins[2].count == 1);
  CHECK(bins[2].empirical_rate == 1.0);
}
