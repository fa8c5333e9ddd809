#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dcem/baselines.hpp"
#include "dcem/metrics.hpp"
#include "dcem/sweep.hpp"
#include "dcem/synthgen.hpp"
#include "dcem/theory.hpp"

namespace {

using namespace dcem;

struct Common {
  std::string config;
  std::string out;
  int workers = 0;
  std::optional<std::uint64_t> seed;
};

struct SettingFlags {
  std::optional<double> q_t, q_y, k, n;
  std::string psi;
};

void add_common(CLI::App* app, Common& c, bool workers) {
  app->add_option("--config", c.config, "YAML sweep config");
  app->add_option("--out", c.out, "output path");
  app->add_option("--seed", c.seed, "master seed (overrides the config)");
  if (workers) app->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
}

void add_setting(CLI::App* app, SettingFlags& s) {
  app->add_option("--q-t", s.q_t, "testing disparity");
  app->add_option("--q-y", s.q_y, "prevalence disparity");
  app->add_option("--k", s.k, "testing multiple");
  app->add_option("--psi", s.psi, "outcome boundary phase, e.g. 2*pi/3");
  app->add_option("--n", s.n, "examples per split");
}

SweepConfig load(const Common& c) {
  SweepConfig cfg;
  if (!c.config.empty()) cfg = load_sweep_config(c.config);
  if (c.seed) cfg.master_seed = *c.seed;
  if (c.workers > 0) cfg.workers = c.workers;
  return cfg;
}

Setting first_setting(SweepConfig& cfg, const SettingFlags& f) {
  Setting s{cfg.q_t.front(), cfg.q_y.front(), cfg.k.front(), cfg.psi.front()};
  if (f.q_t) s.q_t = *f.q_t;
  if (f.q_y) s.q_y = *f.q_y;
  if (f.k) s.k = *f.k;
  if (!f.psi.empty()) s.psi = parse_angle(f.psi);
  if (f.n) {
    if (!(*f.n >= 1)) throw std::invalid_argument("--n must be positive");
    cfg.n = static_cast<std::size_t>(*f.n);
  }
  return s;
}

void print_params(std::ostream& out, const SimParams& p) {
  out << std::setprecision(17) << "mu_0," << p.mu_0 << "\nmu_1," << p.mu_1 << "\ntau_0,"
      << p.tau_0 << "\ntau_1," << p.tau_1 << "\nc_y," << p.c_y << '\n';
}

int run_simulate(const Common& c, const SettingFlags& f) {
  SweepConfig cfg = load(c);
  const Setting s = first_setting(cfg, f);
  const SimConfig sc = sim_config(cfg, s, cfg.seeds.front());
  sc.validate();
  const SimParams params = solve_sim_params(sc, cfg.calibration);
  const SplitSet data = generate(sc, params);
  const std::filesystem::path dir = c.out.empty() ? "." : c.out;
  std::filesystem::create_directories(dir);
  write_csv(data.train, (dir / "train.csv").string());
  write_csv(data.validation, (dir / "validation.csv").string());
  write_csv(data.test, (dir / "test.csv").string());
  std::ofstream pf(dir / "params.csv");
  pf << "name,value\n";
  print_params(pf, params);
  for (const Dataset* d : {&data.train, &data.validation, &data.test}) {
    const EmpiricalRates r = empirical_rates(*d);
    std::cout << split_name(d->split) << ": P(A=0)=" << r.p_a0 << " P(Y|A=0)=" << r.y0
              << " P(Y|A=1)=" << r.y1 << " P(T|A=0)=" << r.t0 << " P(T|A=1)=" << r.t1 << '\n';
  }
  std::cout << "wrote " << dir.string() << '\n';
  return 0;
}

int run_fit_cmd(const Common& c, const SettingFlags& f, const std::string& method_tag_str,
                const std::string& checkpoint, const std::string& calibration) {
  SweepConfig cfg = load(c);
  const Setting s = first_setting(cfg, f);
  const Method method = parse_method(method_tag_str);
  const SimConfig sc = sim_config(cfg, s, cfg.seeds.front());
  sc.validate();
  const SimParams params = solve_sim_params(sc, cfg.calibration);
  const FitDetail d = run_fit(cfg, s, method, cfg.seeds.front(), params);
  if (c.out.empty()) {
    write_rows(std::cout, {d.row});
  } else {
    write_rows_atomic(c.out, {d.row});
    std::cout << "wrote " << c.out << '\n';
  }
  if (!checkpoint.empty()) {
    std::ofstream out(checkpoint);
    if (!out) throw std::runtime_error("cannot write '" + checkpoint + "'");
    d.fit.model.net.save(out);
  }
  if (!calibration.empty()) {
    if (!d.fit.propensity) {
      throw std::invalid_argument("method '" + method_tag_str + "' has no propensity model");
    }
    const std::vector<double> t_hat = d.fit.propensity->predict(d.data.test);
    std::vector<int> t;
    for (const auto& ex : d.data.test.examples) t.push_back(ex.t);
    std::ofstream out(calibration);
    if (!out) throw std::runtime_error("cannot write '" + calibration + "'");
    out << "mean_predicted,empirical_rate,count\n" << std::setprecision(6);
    for (const auto& b : calibration_bins(t_hat, t, 10)) {
      out << b.mean_predicted << ',' << b.empirical_rate << ',' << b.count << '\n';
    }
  }
  return 0;
}

int run_sweep_cmd(const Common& c) {
  if (c.config.empty()) throw std::invalid_argument("sweep requires --config");
  SweepConfig cfg = load(c);
  if (!c.out.empty()) cfg.output = c.out;
  const SweepSummary summary =
      run_sweep(cfg, [](const std::string& msg) { std::cerr << msg << '\n'; });
  write_rows_atomic(cfg.output, summary.rows);
  std::cerr << summary.rows.size() << " rows, " << summary.skipped << " skipped of "
            << summary.requested << " requested; E-step violations: " << summary.estep_violations
            << '\n';
  std::cout << "wrote " << cfg.output << '\n';
  return summary.estep_violations == 0 ? 0 : 1;
}

int run_report_cmd(const std::string& results, const std::string& out) {
  const Report report = make_report(read_rows(results));
  if (out.empty()) {
    write_report(std::cout, report);
  } else {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write '" + out + "'");
    write_report(f, report);
  }
  return 0;
}

int run_verify_cmd(const std::string& out, double resolution) {
  bool ok = true;
  for (const auto& check : verification_suite(resolution)) {
    ok = ok && check.passed;
    std::cout << (check.passed ? "PASS  " : "FAIL  ") << check.name << "  (" << check.detail
              << ")\n";
  }
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write '" + out + "'");
    write_opt_grid_csv(f, 101, 100);
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disparate censorship EM experiments"};
  app.require_subcommand(1);

  Common sim_c, fit_c, sweep_c;
  SettingFlags sim_s, fit_s;
  auto* sim = app.add_subcommand("simulate", "calibrate one setting and write its splits");
  add_common(sim, sim_c, false);
  add_setting(sim, sim_s);

  auto* fit = app.add_subcommand("fit", "fit one method on one setting");
  add_common(fit, fit_c, false);
  add_setting(fit, fit_s);
  std::string method = "dcem", checkpoint, calibration;
  fit->add_option("--method", method, "method tag");
  fit->add_option("--checkpoint", checkpoint, "write the fitted network here");
  fit->add_option("--calibration", calibration, "write propensity calibration bins here");

  auto* sweep = app.add_subcommand("sweep", "run a config grid");
  add_common(sweep, sweep_c, true);

  auto* report = app.add_subcommand("report", "aggregate a results CSV");
  std::string results, report_out;
  report->add_option("results", results, "results CSV")->required();
  report->add_option("--out", report_out, "output path (default stdout)");

  auto* verify = app.add_subcommand("verify", "check the closed-form M-step theory");
  std::string verify_out;
  double resolution = 1e-5;
  verify->add_option("--out", verify_out, "write the (q, t_hat, y_opt, r) grid here");
  verify->add_option("--resolution", resolution, "grid oracle resolution")
      ->check(CLI::Range(1e-7, 1e-4));

  CLI11_PARSE(app, argc, argv);
  try {
    if (sim->parsed()) return run_simulate(sim_c, sim_s);
    if (fit->parsed()) return run_fit_cmd(fit_c, fit_s, method, checkpoint, calibration);
    if (sweep->parsed()) return run_sweep_cmd(sweep_c);
    if (report->parsed()) return run_report_cmd(results, report_out);
    if (verify->parsed()) return run_verify_cmd(verify_out, resolution);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
