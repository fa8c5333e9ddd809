#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dcem/theory.hpp"

using namespace dcem;

TEST_CASE("closed form examples") {
  for (double t : {0.01, 0.3, 1.0}) CHECK(y_opt_closed_form(0.0, t) == 0.0);
  CHECK(std::abs(y_opt_closed_form(0.5, 1.0) - 1.0 / 3.0) <= 1e-12);
  CHECK(std::abs(y_opt_closed_form(0.7, 1e-6) - 0.7) <= 1e-3);
  CHECK(y_opt_closed_form(0.7, 0.0) == 0.7);
  CHECK(minus_root(0.5, 1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(discriminant(1.0, 0.5) == 0.0);
  CHECK(discriminant(0.3, 0.8) ==
        doctest::Approx(4 * 0.09 * 0.64 - 4 * 0.09 * 0.8 + 1).epsilon(1e-14));
}

TEST_CASE("closed form is a stationary point of the objective") {
  for (double q : {0.1, 0.5, 0.9, 1.0}) {
    for (double t : {0.1, 0.5, 0.9}) {
      const double y = y_opt_closed_form(q, t);
      CHECK(t * (1 + q) * y * y - (2 * q * t + 1) * y + q == doctest::Approx(0.0).epsilon(1e-12));
      CHECK(y <= q);
    }
  }
}

TEST_CASE("grid oracle") {
  CHECK(grid_oracle(0.0, 0.5) == 0.0);
  for (double q = 0.0; q < 0.95; q += 0.1) {
    for (double t = 0.05; t <= 1.0 + 1e-9; t += 0.05) {
      CHECK(std::abs(y_opt_closed_form(q, t) - grid_oracle(q, t, 1e-5)) <= 2e-5);
    }
  }
  for (int y : {0, 1}) {
    for (double t : {0.25, 0.5, 1.0}) CHECK(grid_oracle_tested(y, t) == static_cast<double>(y));
  }
}

TEST_CASE("regularisation strength") {
  for (double t : {0.1, 0.5, 1.0}) CHECK(causal_reg_strength(0.0, t) == 0.0);
  CHECK(causal_reg_strength(0.6, 1e-9) <= 1e-8);
  double prev = -1.0;
  for (int i = 1; i <= 10; ++i) {
    const double r = causal_reg_strength(0.5, 0.1 * i);
    CHECK(r > prev);
    prev = r;
  }
  // q = 1: flat below t = 1/2, then increasing.
  prev = -1.0;
  for (int i = 1; i <= 100; ++i) {
    const double r = causal_reg_strength(1.0, 0.01 * i);
    CHECK(r >= prev - 1e-15);
    CHECK(r >= 0.0);
    prev = r;
  }
  const OptPoint p = opt_point(0.5, 1.0);
  CHECK(p.r == doctest::Approx(0.5 - 1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("lemma suite passes") {
  for (const auto& c : lemma_suite()) {
    INFO(c.name << ": " << c.detail);
    CHECK(c.passed);
  }
}

TEST_CASE("opt grid csv") {
  std::ostringstream out;
  write_opt_grid_csv(out, 3, 2);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "q,t_hat,y_opt,r");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 6);
}
