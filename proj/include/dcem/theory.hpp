#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace dcem {

// Per-example analysis of the untested M-step objective
//   J(y) = L(q, y) - q ln(1 - y t)
// whose stationarity condition is the quadratic
//   t(1+q) y^2 - (2qt + 1) y + q = 0.

double quadratic_b(double q, double t_hat);
// B^2 - 4 q t (q + 1), equivalently 4 q^2 t^2 - 4 q^2 t + 1.
double discriminant(double q, double t_hat);
// (B + sqrt(D)) / (2 t (1 + q)) and (B - sqrt(D)) / (2 t (1 + q)); sqrt is
// taken of max(D, 0).
double plus_root(double q, double t_hat);
double minus_root(double q, double t_hat);

// Minimiser of J over [0, 1]. Evaluated as 2q / (B + sqrt(D)), the
// rationalised minus root, which is exact at t = 0 (returns q), and
// capped at q.
double y_opt_closed_form(double q, double t_hat);

// q - y_opt: how far the regulariser pulls the optimum below the pseudo-label.
double causal_reg_strength(double q, double t_hat);

struct OptPoint {
  double q;
  double t_hat;
  double y_opt;
  double r;
};

OptPoint opt_point(double q, double t_hat);

// 1 - 2 t q^2 - sqrt(D); has the sign of d y_opt / d t.
double slope_sign_expression(double q, double t_hat);

double untested_objective(double q, double t_hat, double y_hat);
// L(y, yhat) + y L(y, yhat t): the M-step term for a tested example.
double tested_objective(int y, double t_hat, double y_hat);

// First minimiser of f over {0, res, 2 res, ...} restricted to [0, 1].
double grid_argmin(const std::function<double(double)>& f, double resolution);

// Brute-force minimiser of untested_objective on the grid.
double grid_oracle(double q, double t_hat, double resolution = 1e-5);
double grid_oracle_tested(int y, double t_hat, double resolution = 1e-5);

struct Check {
  std::string name;
  bool passed;
  std::string detail;
};

struct LemmaGrid {
  std::size_t q_points = 200;  // q in linspace(0, 1)
  std::size_t t_points = 200;  // t in {1/n, 2/n, ..., 1}
};

// Numerical checks of the discriminant bound, root branches, derivative
// sign, slope bound versus the inverse-propensity term, and contour
// monotonicity.
std::vector<Check> lemma_suite(const LemmaGrid& grid = {});

// Closed form vs oracle, monotonicity of R, the t -> 0 limit, the tested
// optimum and the worked value, in addition to lemma_suite.
std::vector<Check> verification_suite(double oracle_resolution = 1e-5);

// (q, t_hat, y_opt, r) rows for contour plots.
void write_opt_grid_csv(std::ostream& out, std::size_t q_points, std::size_t t_points);

}  // namespace dcem
