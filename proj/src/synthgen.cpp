#include "dcem/synthgen.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "dcem/nnet.hpp"
#include "dcem/rng.hpp"

namespace dcem {

void SimConfig::validate() const {
  if (!(q_t > 0.0) || !(q_y > 0.0) || !(k > 0.0)) {
    throw std::invalid_argument("q_t, q_y and k must be strictly positive");
  }
  if (q_y > 1.0) throw std::invalid_argument("q_y must lie in (0, 1]");
  if (n == 0) throw std::invalid_argument("n must be positive");
  if (!(overlap_scale > 0.0)) throw std::invalid_argument("overlap_scale must be positive");
  if (!std::isfinite(psi)) throw std::invalid_argument("psi must be finite");
  const RateTargets r = rate_targets(*this);
  if (!(r.t0 > 0.0 && r.t0 < 1.0 && r.t1 > 0.0 && r.t1 < 1.0)) {
    std::ostringstream msg;
    msg << "infeasible testing rates: P(T|A=0)=" << r.t0 << ", P(T|A=1)=" << r.t1;
    throw std::invalid_argument(msg.str());
  }
}

RateTargets rate_targets(const SimConfig& cfg) {
  return {cfg.q_y / (2.0 * (cfg.q_y + 1.0)), 1.0 / (2.0 * (cfg.q_y + 1.0)),
          cfg.q_t * cfg.k / (2.0 * (cfg.q_t + 1.0)), cfg.k / (2.0 * (cfg.q_t + 1.0))};
}

std::array<double, 2> rotate_shift(std::span<const double, 2> x) {
  const double c = std::cos(std::numbers::pi / 6.0);
  const double s = std::sin(std::numbers::pi / 6.0);
  return {c * x[0] - s * x[1] + 0.5, s * x[0] + c * x[1] + 0.5};
}

double sinusoid_boundary(std::span<const double, 2> z, double psi) {
  return z[1] - 0.25 * std::sin(8.0 * std::numbers::pi * z[0] + psi);
}

double outcome_score(std::span<const double, 2> x, double psi) {
  const auto z = rotate_shift(x);
  return sinusoid_boundary(z, psi);
}

BoundaryScores boundary_scores(std::span<const double> x, int a, const SimParams& params,
                               double psi) {
  if (x.size() != 2) throw std::invalid_argument("boundary scores need a 2-d covariate");
  const std::span<const double, 2> x2(x.data(), 2);
  return {outcome_score(x2, psi), x[0] + x[1] - params.tau(a)};
}

namespace {

// Fixed standard-normal draws shared by every rate evaluation, so the
// calibration objectives are deterministic smooth functions of the
// parameters.
class RateEvaluator {
 public:
  RateEvaluator(std::size_t samples, std::uint64_t seed, double psi, double testing_slope)
      : e0_(samples), e1_(samples), psi_(psi), slope_(testing_slope) {
    Rng rng(seed);
    std::normal_distribution<double> normal;
    for (std::size_t i = 0; i < samples; ++i) {
      e0_[i] = normal(rng);
      e1_[i] = normal(rng);
    }
  }

  double prevalence(double mu, double c_y) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < e0_.size(); ++i) {
      const double x[2] = {mu + kCovariateSd * e0_[i], mu + kCovariateSd * e1_[i]};
      sum += logistic(kOutcomeSlope * outcome_score(x, psi_) - c_y);
    }
    return sum / static_cast<double>(e0_.size());
  }

  double testing_rate(double mu, double tau) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < e0_.size(); ++i) {
      const double s_t = 2.0 * mu + kCovariateSd * (e0_[i] + e1_[i]) - tau;
      sum += logistic(slope_ * s_t);
    }
    return sum / static_cast<double>(e0_.size());
  }

 private:
  std::vector<double> e0_, e1_;
  double psi_;
  double slope_;
};

int sign(double v) { return (v > 0.0) - (v < 0.0); }

std::string bracket_text(double lo, double hi) {
  std::ostringstream s;
  s.precision(10);
  s << "[" << lo << ", " << hi << "]";
  return s.str();
}

// Bisection on a sign-changing bracket; stops once |f(mid)| <= tol.
double bisect(const std::function<double(double)>& f, double lo, double hi, double tol,
              int max_iters, const char* what) {
  double f_lo = f(lo);
  const double f_hi = f(hi);
  if (std::abs(f_lo) <= tol) return lo;
  if (std::abs(f_hi) <= tol) return hi;
  if (sign(f_lo) == sign(f_hi)) {
    throw std::runtime_error(std::string(what) + ": no sign change on " + bracket_text(lo, hi));
  }
  for (int it = 0; it < max_iters; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = f(mid);
    if (std::abs(f_mid) <= tol) return mid;
    if (sign(f_mid) == sign(f_lo)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  throw std::runtime_error(std::string(what) + ": bisection did not converge, bracket " +
                           bracket_text(lo, hi));
}

// Widens [center - w, center + w] until f changes sign (f monotone).
std::pair<double, double> expand_bracket(const std::function<double(double)>& f, double center,
                                         const char* what) {
  for (double w = 1.0; w <= 1024.0; w *= 2.0) {
    if (sign(f(center - w)) != sign(f(center + w))) return {center - w, center + w};
  }
  throw std::runtime_error(std::string(what) + ": could not bracket root");
}

}  // namespace

SimParams solve_sim_params(const SimConfig& cfg, const CalibrationOptions& opts) {
  cfg.validate();
  const RateTargets targets = rate_targets(cfg);
  const RateEvaluator eval(opts.mc_samples, opts.mc_seed, cfg.psi,
                           kTestingSlope * cfg.overlap_scale);
  SimParams p;

  const auto ref = [&](double c) { return eval.prevalence(0.0, c) - kTargetPrevalence; };
  {
    const auto [lo, hi] = expand_bracket(ref, 0.0, "c_y");
    p.c_y = bisect(ref, lo, hi, opts.tolerance, opts.max_iters, "c_y");
  }

  const auto solve_mu = [&](double target, const char* what) {
    const auto g = [&](double mu) { return eval.prevalence(mu, p.c_y) - target; };
    const double g0 = g(0.0);
    if (std::abs(g0) <= opts.tolerance) return 0.0;
    double prev_pos = 0.0, g_prev_pos = g0;
    double prev_neg = 0.0, g_prev_neg = g0;
    for (double r = opts.scan_step; r <= opts.scan_limit + 1e-12; r += opts.scan_step) {
      const double g_pos = g(r);
      if (sign(g_pos) != sign(g_prev_pos)) {
        return bisect(g, prev_pos, r, opts.tolerance, opts.max_iters, what);
      }
      prev_pos = r;
      g_prev_pos = g_pos;
      const double g_neg = g(-r);
      if (sign(g_neg) != sign(g_prev_neg)) {
        return bisect(g, -r, prev_neg, opts.tolerance, opts.max_iters, what);
      }
      prev_neg = -r;
      g_prev_neg = g_neg;
    }
    throw std::runtime_error(std::string(what) + ": no root within " +
                             bracket_text(-opts.scan_limit, opts.scan_limit));
  };
  p.mu_0 = solve_mu(targets.y0, "mu_0");
  p.mu_1 = solve_mu(targets.y1, "mu_1");

  const auto solve_tau = [&](double mu, double target, const char* what) {
    const auto h = [&](double tau) { return eval.testing_rate(mu, tau) - target; };
    const auto [lo, hi] = expand_bracket(h, 2.0 * mu, what);
    return bisect(h, lo, hi, opts.tolerance, opts.max_iters, what);
  };
  p.tau_0 = solve_tau(p.mu_0, targets.t0, "tau_0");
  p.tau_1 = solve_tau(p.mu_1, targets.t1, "tau_1");
  return p;
}

Dataset generate_split(const SimConfig& cfg, const SimParams& params, Split split) {
  cfg.validate();
  Rng rng(derive_seed({cfg.seed, static_cast<std::uint64_t>(split)}));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, kCovariateSd);
  const double t_slope = kTestingSlope * cfg.overlap_scale;

  Dataset data;
  data.split = split;
  data.examples.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    LabeledExample e;
    e.a = unif(rng) < 0.5 ? 0 : 1;
    const double mu = params.mu(e.a);
    const double x0 = mu + normal(rng);
    const double x1 = mu + normal(rng);
    e.x = {x0, x1};
    const BoundaryScores s = boundary_scores(e.x, e.a, params, cfg.psi);
    e.t = unif(rng) < logistic(t_slope * s.s_t) ? 1 : 0;
    e.y = unif(rng) < logistic(kOutcomeSlope * s.s_y - params.c_y) ? 1 : 0;
    e.y_obs = e.y * e.t;
    data.examples.push_back(std::move(e));
  }
  return data;
}

SplitSet generate(const SimConfig& cfg, const SimParams& params) {
  return {generate_split(cfg, params, Split::kTrain),
          generate_split(cfg, params, Split::kValidation),
          generate_split(cfg, params, Split::kTest)};
}

EmpiricalRates empirical_rates(const Dataset& data) {
  std::size_t n[2] = {0, 0}, y[2] = {0, 0}, t[2] = {0, 0};
  for (const auto& e : data.examples) {
    ++n[e.a];
    y[e.a] += static_cast<std::size_t>(e.y);
    t[e.a] += static_cast<std::size_t>(e.t);
  }
  const auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  return {ratio(n[0], n[0] + n[1]), ratio(y[0], n[0]), ratio(y[1], n[1]), ratio(t[0], n[0]),
          ratio(t[1], n[1])};
}

}  // namespace dcem
