#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

#include "dcem/dataset.hpp"

namespace dcem {

// Coefficients of the synthetic generating process.
inline constexpr double kCovariateSd = 0.03;
inline constexpr double kTestingSlope = 30.0;
inline constexpr double kOutcomeSlope = 10.0;
inline constexpr double kTargetPrevalence = 0.25;

struct SimConfig {
  double q_t = 2.0;   // P(T=1|A=0) / P(T=1|A=1)
  double q_y = 0.5;   // P(Y=1|A=0) / P(Y=1|A=1)
  double k = 1.0;     // P(T=1) / P(Y=1)
  double psi = 0.0;   // phase of the outcome boundary
  std::size_t n = 20000;
  double overlap_scale = 1.0;  // multiplies the testing slope
  std::uint64_t seed = 42;

  // Throws std::invalid_argument, e.g. "infeasible testing rates".
  void validate() const;
};

struct RateTargets {
  double y0, y1;  // P(Y=1|A=a)
  double t0, t1;  // P(T=1|A=a)
};

RateTargets rate_targets(const SimConfig& cfg);

struct SimParams {
  double mu_0 = 0.0, mu_1 = 0.0;    // group means of x
  double tau_0 = 0.0, tau_1 = 0.0;  // testing thresholds
  double c_y = 0.0;                 // outcome offset

  double mu(int a) const { return a == 0 ? mu_0 : mu_1; }
  double tau(int a) const { return a == 0 ? tau_0 : tau_1; }
};

struct CalibrationOptions {
  double tolerance = 1e-4;            // on the probability scale
  std::size_t mc_samples = 1'000'000;  // common random numbers, reused by every evaluation
  std::uint64_t mc_seed = 42;
  int max_iters = 200;
  double scan_step = 0.005;  // outward root scan for the group means
  double scan_limit = 2.0;
};

// Calibrates (c_y, mu_a, tau_a) so the simulated rates hit rate_targets(cfg).
//
// c_y is fixed first so that a reference population centred at the origin
// has prevalence 1/4. Each mu_a is then the root of P(Y=1|mu) - target
// closest to the origin: an outward scan brackets it and bisection refines
// it. P(Y|mu) is not monotone in mu (the boundary is a sinusoid), so the
// scan picks a definite branch. Finally tau_a solves the monotone testing
// equation by bisection. Throws std::runtime_error when a bracket cannot be
// found or bisection fails to converge.
SimParams solve_sim_params(const SimConfig& cfg, const CalibrationOptions& opts = {});

struct BoundaryScores {
  double s_y;
  double s_t;
};

// Rotation by pi/6 followed by a +0.5 shift.
std::array<double, 2> rotate_shift(std::span<const double, 2> x);
// z1 - sin(8 pi z0 + psi) / 4.
double sinusoid_boundary(std::span<const double, 2> z, double psi);
double outcome_score(std::span<const double, 2> x, double psi);

BoundaryScores boundary_scores(std::span<const double> x, int a, const SimParams& params,
                               double psi);

struct SplitSet {
  Dataset train;
  Dataset validation;
  Dataset test;
};

// Draws one split of cfg.n examples from its own substream (seed, split).
Dataset generate_split(const SimConfig& cfg, const SimParams& params, Split split);
SplitSet generate(const SimConfig& cfg, const SimParams& params);

struct EmpiricalRates {
  double p_a0;
  double y0, y1;
  double t0, t1;
};

EmpiricalRates empirical_rates(const Dataset& data);

}  // namespace dcem
