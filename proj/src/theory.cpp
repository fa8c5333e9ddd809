#include "dcem/theory.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "dcem/nnet.hpp"

namespace dcem {

double quadratic_b(double q, double t_hat) { return 2.0 * q * t_hat + 1.0; }

double discriminant(double q, double t_hat) {
  const double b = quadratic_b(q, t_hat);
  return b * b - 4.0 * q * (q * t_hat + t_hat);
}

double plus_root(double q, double t_hat) {
  return (quadratic_b(q, t_hat) + std::sqrt(std::max(discriminant(q, t_hat), 0.0))) /
         (2.0 * (t_hat + q * t_hat));
}

double minus_root(double q, double t_hat) {
  return (quadratic_b(q, t_hat) - std::sqrt(std::max(discriminant(q, t_hat), 0.0))) /
         (2.0 * (t_hat + q * t_hat));
}

double y_opt_closed_form(double q, double t_hat) {
  const double y = 2.0 * q / (quadratic_b(q, t_hat) + std::sqrt(std::max(discriminant(q, t_hat), 0.0)));
  // Rounding in sqrt(D) can push the root a few ulps above q.
  return std::min(y, q);
}

double causal_reg_strength(double q, double t_hat) { return q - y_opt_closed_form(q, t_hat); }

OptPoint opt_point(double q, double t_hat) {
  const double y = y_opt_closed_form(q, t_hat);
  return {q, t_hat, y, q - y};
}

double slope_sign_expression(double q, double t_hat) {
  return 1.0 - 2.0 * t_hat * q * q - std::sqrt(std::max(discriminant(q, t_hat), 0.0));
}

double untested_objective(double q, double t_hat, double y_hat) {
  return bce(q, y_hat) - q * std::log1p(-clamp_prob(y_hat * t_hat));
}

double tested_objective(int y, double t_hat, double y_hat) {
  return bce(y, y_hat) + y * bce(y, y_hat * t_hat);
}

double grid_argmin(const std::function<double(double)>& f, double resolution) {
  const auto steps = static_cast<long>(std::floor(1.0 / resolution + 1e-9));
  double best_x = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (long i = 0; i <= steps; ++i) {
    const double x = std::min(static_cast<double>(i) * resolution, 1.0);
    const double v = f(x);
    if (v < best) {
      best = v;
      best_x = x;
    }
  }
  return best_x;
}

double grid_oracle(double q, double t_hat, double resolution) {
  return grid_argmin([&](double y) { return untested_objective(q, t_hat, y); }, resolution);
}

double grid_oracle_tested(int y, double t_hat, double resolution) {
  return grid_argmin([&](double yh) { return tested_objective(y, t_hat, yh); }, resolution);
}

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

}  // namespace

std::vector<Check> lemma_suite(const LemmaGrid& grid) {
  std::vector<Check> checks;
  const auto q_at = [&](std::size_t i) {
    return grid.q_points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(grid.q_points - 1);
  };
  const auto t_at = [&](std::size_t j) {
    return static_cast<double>(j + 1) / static_cast<double>(grid.t_points);
  };

  double min_d = std::numeric_limits<double>::infinity();
  double min_plus = std::numeric_limits<double>::infinity();
  double min_minus = std::numeric_limits<double>::infinity();
  double max_minus = -std::numeric_limits<double>::infinity();
  std::size_t sign_mismatch = 0, sign_checked = 0;
  double max_slope = 0.0;
  std::size_t contour_t_viol = 0, contour_q_viol = 0;
  constexpr double kStep = 1e-6;
  for (std::size_t i = 0; i < grid.q_points; ++i) {
    const double q = q_at(i);
    for (std::size_t j = 0; j < grid.t_points; ++j) {
      const double t = t_at(j);
      min_d = std::min(min_d, discriminant(q, t));
      min_plus = std::min(min_plus, plus_root(q, t));
      const double m = minus_root(q, t);
      min_minus = std::min(min_minus, m);
      max_minus = std::max(max_minus, m);

      const double lo = std::max(t - kStep, 1e-12);
      const double hi = std::min(t + kStep, 1.0);
      const double slope = (y_opt_closed_form(q, hi) - y_opt_closed_form(q, lo)) / (hi - lo);
      max_slope = std::max(max_slope, std::abs(slope));
      const double expr = slope_sign_expression(q, t);
      // Skip points where the predicted sign is numerically zero.
      if (std::abs(expr) > 1e-8) {
        ++sign_checked;
        if ((expr > 0) != (slope > 0) || slope == 0.0) ++sign_mismatch;
      }
      if (j > 0 && y_opt_closed_form(q, t) > y_opt_closed_form(q, t_at(j - 1)) + 1e-12) {
        ++contour_t_viol;
      }
      if (i > 0 && y_opt_closed_form(q, t) < y_opt_closed_form(q_at(i - 1), t) - 1e-12) {
        ++contour_q_viol;
      }
    }
  }
  checks.push_back({"discriminant non-negative", min_d >= -1e-12, "min D = " + fmt(min_d)});
  const double d_touch = discriminant(1.0, 0.5);
  checks.push_back({"discriminant touches zero at q=1, t=1/2", std::abs(d_touch) <= 1e-12,
                    "D = " + fmt(d_touch)});
  checks.push_back({"plus root outside (0,1)", min_plus >= 1.0 - 1e-12,
                    "min plus root = " + fmt(min_plus)});
  checks.push_back({"minus root inside [0,1]", min_minus >= -1e-12 && max_minus <= 1.0 + 1e-12,
                    "range [" + fmt(min_minus) + ", " + fmt(max_minus) + "]"});
  checks.push_back({"derivative sign matches 1 - 2tq^2 - sqrt(D)", sign_mismatch == 0,
                    std::to_string(sign_mismatch) + " mismatches of " +
                        std::to_string(sign_checked)});
  checks.push_back({"optimum slope bounded", max_slope <= 2.0 + 1e-6,
                    "max |dy/dt| = " + fmt(max_slope)});

  // y t / t^2 is the slope magnitude of an inverse-propensity term.
  bool ipw_grows = true;
  std::ostringstream ipw;
  double prev = 0.0;
  for (double t : {0.1, 0.01, 0.001}) {
    const double h = t * 1e-4;
    const double ipw_slope = std::abs(1.0 / (t + h) - 1.0 / (t - h)) / (2 * h);
    double opt_slope = 0.0;
    for (std::size_t i = 0; i < grid.q_points; ++i) {
      const double q = q_at(i);
      opt_slope = std::max(opt_slope, std::abs(y_opt_closed_form(q, t + h) -
                                               y_opt_closed_form(q, t - h)) / (2 * h));
    }
    if (ipw_slope < 10.0 * prev || opt_slope > 2.0) ipw_grows = false;
    prev = ipw_slope;
    ipw << "t=" << t << ": ipw " << fmt(ipw_slope) << " vs opt " << fmt(opt_slope) << "; ";
  }
  checks.push_back({"inverse-propensity slope diverges, optimum slope does not", ipw_grows,
                    ipw.str()});
  checks.push_back({"optimum non-increasing in t", contour_t_viol == 0,
                    std::to_string(contour_t_viol) + " violations"});
  checks.push_back({"optimum non-decreasing in q", contour_q_viol == 0,
                    std::to_string(contour_q_viol) + " violations"});
  return checks;
}

std::vector<Check> verification_suite(double oracle_resolution) {
  std::vector<Check> checks;
  double max_err = 0.0;
  std::size_t mono_viol = 0;
  double max_limit_err = 0.0;
  for (int qi = 0; qi < 20; ++qi) {
    const double q = 0.05 * qi;
    double prev_r = -1.0;
    for (int ti = 1; ti <= 20; ++ti) {
      const double t = 0.05 * ti;
      max_err = std::max(max_err, std::abs(y_opt_closed_form(q, t) - grid_oracle(q, t, oracle_resolution)));
      const double r = causal_reg_strength(q, t);
      if (q > 0.0 && ti > 1 && !(r > prev_r + 1e-10)) ++mono_viol;
      prev_r = r;
    }
    max_limit_err = std::max(max_limit_err, std::abs(y_opt_closed_form(q, 1e-6) - q));
  }
  checks.push_back({"closed form matches grid oracle", max_err <= 2.0 * oracle_resolution,
                    "max |diff| = " + fmt(max_err)});
  checks.push_back({"regularisation strength increasing in t (q < 1)", mono_viol == 0,
                    std::to_string(mono_viol) + " violations"});
  checks.push_back({"optimum tends to q as t -> 0", max_limit_err <= 1e-3,
                    "max |y_opt(q, 1e-6) - q| = " + fmt(max_limit_err)});

  double max_tested = 0.0;
  for (int y : {0, 1}) {
    for (double t : {0.25, 0.5, 1.0}) {
      max_tested = std::max(max_tested, std::abs(grid_oracle_tested(y, t, oracle_resolution) - y));
    }
  }
  checks.push_back({"tested optimum equals label", max_tested <= oracle_resolution,
                    "max |argmin - y| = " + fmt(max_tested)});
  const double worked = y_opt_closed_form(0.5, 1.0);
  checks.push_back({"y_opt(0.5, 1) = 1/3", std::abs(worked - 1.0 / 3.0) <= 1e-12,
                    "value " + fmt(worked)});
  for (auto& c : lemma_suite()) checks.push_back(std::move(c));
  return checks;
}

void write_opt_grid_csv(std::ostream& out, std::size_t q_points, std::size_t t_points) {
  out << "q,t_hat,y_opt,r\n";
  out << std::setprecision(10);
  for (std::size_t i = 0; i < q_points; ++i) {
    const double q = q_points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(q_points - 1);
    for (std::size_t j = 1; j <= t_points; ++j) {
      const double t = static_cast<double>(j) / static_cast<double>(t_points);
      const OptPoint p = opt_point(q, t);
      out << p.q << ',' << p.t_hat << ',' << p.y_opt << ',' << p.r << '\n';
    }
  }
}

}  // namespace dcem
