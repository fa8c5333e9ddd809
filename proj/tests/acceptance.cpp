// Acceptance criteria 1-15. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.
//
//   acceptance [--workdir DIR] [--only 1,2,...]

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "dcem/baselines.hpp"
#include "dcem/em.hpp"
#include "dcem/metrics.hpp"
#include "dcem/nnet.hpp"
#include "dcem/sweep.hpp"
#include "dcem/synthgen.hpp"
#include "dcem/theory.hpp"

using namespace dcem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(double v, int digits = 6) {
  std::ostringstream o;
  o.precision(digits);
  o << v;
  return o.str();
}

std::vector<double> grid_q() {
  std::vector<double> q;
  for (int i = 0; i < 20; ++i) q.push_back(0.05 * i);
  return q;
}

std::vector<double> grid_t() {
  std::vector<double> t;
  for (int i = 1; i <= 20; ++i) t.push_back(0.05 * i);
  return t;
}

// --- theory ---------------------------------------------------------------

Outcome c1_oracle_agreement() {
  double worst = 0.0;
  for (double q : grid_q())
    for (double t : grid_t())
      worst = std::max(worst, std::abs(y_opt_closed_form(q, t) - grid_oracle(q, t, 1e-5)));
  return {worst <= 2e-5, "max |closed form - oracle| = " + fmt(worst)};
}

Outcome c2_monotone_strength() {
  // R(0, t) is identically zero, so strictness is checked for q in (0, 1).
  int violations = 0, checked = 0;
  double smallest_step = 1.0;
  for (double q : grid_q()) {
    if (q == 0.0) continue;
    const auto t = grid_t();
    for (std::size_t j = 1; j < t.size(); ++j) {
      const double step = causal_reg_strength(q, t[j]) - causal_reg_strength(q, t[j - 1]);
      smallest_step = std::min(smallest_step, step);
      ++checked;
      if (!(step > 1e-10)) ++violations;
    }
  }
  for (double t : grid_t()) {
    if (causal_reg_strength(0.0, t) != 0.0) ++violations;
  }
  return {violations == 0, std::to_string(violations) + " violations in " +
                               std::to_string(checked) + " steps (q > 0), smallest increase " +
                               fmt(smallest_step) + "; R(0, t) = 0"};
}

Outcome c3_limit() {
  double worst = 0.0;
  for (double q : grid_q()) worst = std::max(worst, std::abs(y_opt_closed_form(q, 1e-6) - q));
  return {worst <= 1e-3, "max |y_opt(q, 1e-6) - q| = " + fmt(worst)};
}

Outcome c4_discriminant() {
  double min_d = 1e300;
  for (int i = 0; i < 200; ++i) {
    const double q = i / 199.0;
    for (int j = 1; j <= 200; ++j) {
      const double t = j / 200.0;
      // Independent evaluation of 4 q^2 t^2 - 4 q^2 t + 1.
      const double d = discriminant(q, t);
      const double alt = 4 * q * q * t * t - 4 * q * q * t + 1;
      min_d = std::min({min_d, d, alt});
    }
  }
  const double touch = discriminant(1.0, 0.5);
  return {min_d >= -1e-12 && std::abs(touch) <= 1e-12,
          "min D = " + fmt(min_d) + ", D(1, 1/2) = " + fmt(touch)};
}

Outcome c5_tested_optimum() {
  double worst = 0.0;
  for (int y : {0, 1}) {
    for (double t : {0.25, 0.5, 1.0}) {
      // Brute force written out here rather than via the library helper.
      double best = 1e300, arg = -1.0;
      for (long k = 0; k <= 100000; ++k) {
        const double yh = k * 1e-5;
        const double obj = bce(y, yh) + y * bce(y, yh * t);
        if (obj < best) {
          best = obj;
          arg = yh;
        }
      }
      worst = std::max(worst, std::abs(arg - y));
      worst = std::max(worst, std::abs(grid_oracle_tested(y, t, 1e-5) - y));
    }
  }
  return {worst <= 1e-5, "max |argmin - y| = " + fmt(worst)};
}

Outcome c6_worked_value() {
  const double v = y_opt_closed_form(0.5, 1.0);
  return {std::abs(v - 1.0 / 3.0) <= 1e-12, "y_opt(0.5, 1) - 1/3 = " + fmt(v - 1.0 / 3.0)};
}

// --- engine ---------------------------------------------------------------

double max_rel_error(const Network& net, const Eigen::MatrixXd& x, const Objective& obj) {
  Eigen::VectorXd analytic;
  loss_and_gradient(net, x, obj, &analytic);
  Network probe = net;
  const Eigen::VectorXd p0 = net.parameters();
  constexpr double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p0.size(); ++i) {
    Eigen::VectorXd p = p0;
    p(i) += h;
    probe.set_parameters(p);
    const double up = loss_and_gradient(probe, x, obj, nullptr);
    p(i) = p0(i) - h;
    probe.set_parameters(p);
    const double down = loss_and_gradient(probe, x, obj, nullptr);
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(numeric), std::abs(analytic(i)), 1e-6});
    worst = std::max(worst, std::abs(numeric - analytic(i)) / scale);
  }
  return worst;
}

Outcome c7_gradients() {
  std::mt19937_64 rng(20240601);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  double worst[3] = {0, 0, 0};
  for (int draw = 0; draw < 20; ++draw) {
    const std::size_t n = 16;
    Network net(2, {64, 64}, rng());
    Eigen::MatrixXd x(2, static_cast<Eigen::Index>(n));
    std::vector<double> q(n), w(n), t(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x(0, static_cast<Eigen::Index>(i)) = z(rng);
      x(1, static_cast<Eigen::Index>(i)) = z(rng);
      q[i] = u(rng);
      w[i] = 0.05 + 5 * u(rng);
      t[i] = u(rng);
      y[i] = u(rng) < 0.3;
    }
    worst[0] = std::max(worst[0], max_rel_error(net, x, BceObjective(q)));
    worst[1] = std::max(worst[1], max_rel_error(net, x, BceObjective(q, w)));
    worst[2] = std::max(worst[2], max_rel_error(net, x, MStepObjective(q, y, t)));
  }
  const double all = std::max({worst[0], worst[1], worst[2]});
  return {all <= 1e-4, "max relative error: bce " + fmt(worst[0], 3) + ", weighted " +
                           fmt(worst[1], 3) + ", m-step " + fmt(worst[2], 3)};
}

Outcome c8_auc_oracle() {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> size(2, 50), level(0, 12);
  std::bernoulli_distribution coin(0.5);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto n = static_cast<std::size_t>(size(rng));
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = level(rng) / 12.0;
      y[i] = coin(rng);
    }
    y[0] = 1;
    y[1] = 0;
    double num = 0, den = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (y[i] == 1 && y[j] == 0) {
          den += 1;
          num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
    const RocCurve c = roc_curve(s, y);
    double trap = 0.0;
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      trap += (c.points[i].fpr - c.points[i - 1].fpr) * (c.points[i].tpr + c.points[i - 1].tpr) / 2;
    }
    worst = std::max({worst, std::abs(trap - num / den), std::abs(auc(s, y) - num / den)});
  }
  return {worst <= 1e-12, "max |trapezoid - concordance| = " + fmt(worst)};
}

Outcome c9_calibration() {
  struct Case {
    double q_t, q_y, k;
  };
  double worst = 0.0;
  std::ostringstream detail;
  std::mt19937_64 rng(777);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  const double c = std::cos(std::numbers::pi / 6), s = std::sin(std::numbers::pi / 6);
  for (const Case& cs : {Case{2, 0.5, 1}, Case{1, 1, 2}, Case{0.5, 0.5, 0.5}}) {
    SimConfig cfg;
    cfg.q_t = cs.q_t;
    cfg.q_y = cs.q_y;
    cfg.k = cs.k;
    const SimParams p = solve_sim_params(cfg);
    const RateTargets target = rate_targets(cfg);
    double y_rate[2], t_rate[2];
    for (int a : {0, 1}) {
      const double mu = a ? p.mu_1 : p.mu_0;
      const double tau = a ? p.tau_1 : p.tau_0;
      long ys = 0, ts = 0;
      const long n = 1000000;
      for (long i = 0; i < n; ++i) {
        const double x0 = mu + 0.03 * z(rng), x1 = mu + 0.03 * z(rng);
        const double z0 = c * x0 - s * x1 + 0.5, z1 = s * x0 + c * x1 + 0.5;
        const double sy = z1 - 0.25 * std::sin(8 * std::numbers::pi * z0 + cfg.psi);
        ys += u(rng) < 1.0 / (1.0 + std::exp(-(10 * sy - p.c_y)));
        ts += u(rng) < 1.0 / (1.0 + std::exp(-30 * (x0 + x1 - tau)));
      }
      y_rate[a] = static_cast<double>(ys) / n;
      t_rate[a] = static_cast<double>(ts) / n;
    }
    const double errs[] = {y_rate[0] - target.y0, y_rate[1] - target.y1, t_rate[0] - target.t0,
                           t_rate[1] - target.t1};
    double local = 0.0;
    for (double e : errs) local = std::max(local, std::abs(e));
    worst = std::max(worst, local);
    detail << "(" << cs.q_t << "," << cs.q_y << "," << cs.k << "): " << fmt(local, 3) << "; ";
  }
  return {worst <= 0.005, "max |MC rate - target| per case " + detail.str()};
}

// --- desk-scale experiment ------------------------------------------------

struct Experiment {
  SweepSummary main;     // dcem, y_obs, tested_only
  SweepSummary ablation; // imputation_only, no_causal_reg
  SweepSummary repeat;   // main again
  std::string main_csv, repeat_csv;
  bool ran = false;
};

SweepConfig experiment_config(const std::vector<Method>& methods, const std::string& out) {
  SweepConfig cfg;
  cfg.q_t = {2.0};
  cfg.q_y = {0.5};
  cfg.k = {1.0};
  cfg.psi = {0.0, std::numbers::pi / 3, 2 * std::numbers::pi / 3, std::numbers::pi};
  cfg.methods = methods;
  cfg.seeds = {0};
  cfg.master_seed = 42;
  cfg.record_wall_time = false;
  cfg.output = out;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

SweepSummary run_logged(const SweepConfig& cfg) {
  SweepSummary s = run_sweep(cfg, [](const std::string& m) { std::cerr << "  " << m << '\n'; });
  write_rows_atomic(cfg.output, s.rows);
  return s;
}

Experiment& experiment(const std::string& workdir) {
  static Experiment e;
  if (e.ran) return e;
  e.ran = true;
  std::filesystem::create_directories(workdir);
  const std::vector<Method> main = {Method::kDcem, Method::kYObs, Method::kTestedOnly};
  e.main_csv = workdir + "/headline.csv";
  e.repeat_csv = workdir + "/headline_repeat.csv";
  std::cerr << "desk-scale sweep: headline methods\n";
  e.main = run_logged(experiment_config(main, e.main_csv));
  std::cerr << "desk-scale sweep: ablations\n";
  e.ablation = run_logged(
      experiment_config({Method::kImputationOnly, Method::kNoCausalReg}, workdir + "/ablation.csv"));
  std::cerr << "desk-scale sweep: repeat\n";
  e.repeat = run_logged(experiment_config(main, e.repeat_csv));

  std::vector<ResultRow> all = e.main.rows;
  all.insert(all.end(), e.ablation.rows.begin(), e.ablation.rows.end());
  std::ofstream rep(workdir + "/report.csv");
  write_report(rep, make_report(all));
  return e;
}

struct Medians {
  double auc = NAN, gap = NAN;
  std::size_t rows = 0;
};

Medians medians(const SweepSummary& s, Method m) {
  std::vector<double> a, g;
  Medians out;
  for (const auto& r : s.rows) {
    if (r.method != m) continue;
    ++out.rows;
    if (r.auc) a.push_back(*r.auc);
    if (r.roc_gap) g.push_back(*r.roc_gap);
  }
  if (!a.empty()) out.auc = aggregate(a).median;
  if (!g.empty()) out.gap = aggregate(g).median;
  return out;
}

bool complete(const Medians& m) { return m.rows == 4 && std::isfinite(m.auc) && std::isfinite(m.gap); }

Outcome c10(const std::string& dir) {
  const Experiment& e = experiment(dir);
  const Medians d = medians(e.main, Method::kDcem), y = medians(e.main, Method::kYObs);
  return {complete(d) && complete(y) && d.auc >= y.auc + 0.05,
          "dcem median AUC " + fmt(d.auc, 4) + " vs y_obs " + fmt(y.auc, 4) + " (+0.05 needed)"};
}

Outcome c11(const std::string& dir) {
  const Experiment& e = experiment(dir);
  const Medians d = medians(e.main, Method::kDcem), t = medians(e.main, Method::kTestedOnly);
  return {complete(d) && complete(t) && d.auc >= t.auc - 0.06,
          "dcem median AUC " + fmt(d.auc, 4) + " vs tested_only " + fmt(t.auc, 4) +
              " (-0.06 allowed)"};
}

Outcome c12(const std::string& dir) {
  const Experiment& e = experiment(dir);
  const Medians d = medians(e.main, Method::kDcem), y = medians(e.main, Method::kYObs),
                t = medians(e.main, Method::kTestedOnly);
  const bool ok = complete(d) && complete(y) && complete(t) && d.gap <= 0.75 * y.gap &&
                  d.gap <= t.gap + 0.01;
  return {ok, "median ROC gap dcem " + fmt(d.gap, 4) + ", y_obs " + fmt(y.gap, 4) +
                  " (x0.75 = " + fmt(0.75 * y.gap, 4) + "), tested_only " + fmt(t.gap, 4) +
                  " (+0.01)"};
}

Outcome c13(const std::string& dir) {
  const Experiment& e = experiment(dir);
  std::size_t expected = 0, runs = 0, iters = 0;
  for (const SweepSummary* s : {&e.main, &e.ablation, &e.repeat}) {
    for (const auto& r : s->rows) {
      const bool em = r.method == Method::kDcem || r.method == Method::kNoCausalReg ||
                      r.method == Method::kImputationOnly || r.method == Method::kHardT;
      if (em) ++expected;
      if (em && r.n_em_iters > 0) {
        ++runs;
        iters += static_cast<std::size_t>(r.n_em_iters);
      }
    }
  }
  const std::size_t violations =
      e.main.estep_violations + e.ablation.estep_violations + e.repeat.estep_violations;
  return {violations == 0 && expected > 0 && runs == expected,
          std::to_string(violations) + " violations over " + std::to_string(runs) + "/" +
              std::to_string(expected) + " EM runs, " + std::to_string(iters) + " iterations"};
}

Outcome c14(const std::string& dir) {
  const Experiment& e = experiment(dir);
  const Medians imp = medians(e.ablation, Method::kImputationOnly),
                ncr = medians(e.ablation, Method::kNoCausalReg), d = medians(e.main, Method::kDcem);
  const bool ok = complete(imp) && complete(ncr) && complete(d) && imp.auc + 0.01 <= ncr.auc &&
                  ncr.auc + 0.01 <= d.auc && d.gap <= ncr.gap;
  return {ok, "median AUC imputation_only " + fmt(imp.auc, 4) + " < no_causal_reg " +
                  fmt(ncr.auc, 4) + " < dcem " + fmt(d.auc, 4) + " (gaps >= 0.01); ROC gap dcem " +
                  fmt(d.gap, 4) + " <= no_causal_reg " + fmt(ncr.gap, 4)};
}

Outcome c15(const std::string& dir) {
  const Experiment& e = experiment(dir);
  const std::string a = slurp(e.main_csv), b = slurp(e.repeat_csv);
  return {!a.empty() && a == b && e.main.rows.size() == 12,
          std::to_string(e.main.rows.size()) + " rows; CSVs " +
              (a == b ? "byte-identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  std::string workdir = "acceptance_run";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--workdir") && i + 1 < argc) {
      workdir = argv[++i];
    } else if (!std::strcmp(argv[i], "--only") && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    } else {
      std::cerr << "usage: acceptance [--workdir DIR] [--only 1,2,...]\n";
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"closed form vs grid oracle", c1_oracle_agreement},
      {"regularisation strength strictly increasing in t_hat", c2_monotone_strength},
      {"t_hat -> 0 limit", c3_limit},
      {"discriminant bound and touch point", c4_discriminant},
      {"tested-example optimum equals y", c5_tested_optimum},
      {"worked value 1/3", c6_worked_value},
      {"analytic vs finite-difference gradients", c7_gradients},
      {"trapezoid ROC area vs concordance AUC", c8_auc_oracle},
      {"calibration closure", c9_calibration},
      {"DCEM beats y_obs on median AUC", [&] { return c10(workdir); }},
      {"DCEM close to tested_only on median AUC", [&] { return c11(workdir); }},
      {"DCEM ROC gap vs y_obs and tested_only", [&] { return c12(workdir); }},
      {"E-step exactness on every iteration", [&] { return c13(workdir); }},
      {"ablation ordering", [&] { return c14(workdir); }},
      {"sweep determinism", [&] { return c15(workdir); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << criteria[i].first
              << "  [" << o.detail << "]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
