#include "dcem/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include <yaml-cpp/yaml.h>

#include "dcem/rng.hpp"

namespace dcem {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_number(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

double parse_angle(std::string_view text) {
  const std::string s = trim(text);
  double value = 0.0;
  if (parse_number(s, value)) return value;
  const auto fail = [&] { return std::invalid_argument("bad angle '" + s + "'"); };
  const auto pi_at = s.find("pi");
  if (pi_at == std::string::npos) throw fail();

  std::string coef = trim(std::string_view(s).substr(0, pi_at));
  if (!coef.empty() && coef.back() == '*') coef = trim(coef.substr(0, coef.size() - 1));
  double c = 1.0;
  if (coef == "-") {
    c = -1.0;
  } else if (!coef.empty() && coef != "+" && !parse_number(coef, c)) {
    throw fail();
  }
  std::string rest = trim(std::string_view(s).substr(pi_at + 2));
  double d = 1.0;
  if (!rest.empty()) {
    if (rest.front() != '/' || !parse_number(trim(rest.substr(1)), d) || d == 0.0) throw fail();
  }
  return c * std::numbers::pi / d;
}

// ---------------------------------------------------------------------------
// Config

void SweepConfig::validate() const {
  const auto nonempty = [](const auto& v, const char* name) {
    if (v.empty()) throw std::invalid_argument(std::string("config: '") + name + "' is empty");
  };
  nonempty(q_t, "q_t");
  nonempty(q_y, "q_y");
  nonempty(k, "k");
  nonempty(psi, "psi");
  nonempty(methods, "methods");
  nonempty(seeds, "seeds");
  if (n == 0) throw std::invalid_argument("config: n must be positive");
  if (!(overlap_scale > 0.0)) throw std::invalid_argument("config: overlap_scale must be positive");
  if (workers < 1) throw std::invalid_argument("config: workers must be at least 1");
  if (output.empty()) throw std::invalid_argument("config: output path is empty");
  method.em.validate();
}

namespace {

[[noreturn]] void config_error(const YAML::Node& node, const std::string& key,
                               const std::string& what) {
  std::ostringstream msg;
  msg << "config line " << node.Mark().line + 1 << ": '" << key << "': " << what;
  throw std::invalid_argument(msg.str());
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) config_error(node, key, "expected a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    config_error(node, key, "cannot parse '" + node.Scalar() + "'");
  }
}

template <typename T>
std::vector<T> scalar_list(const YAML::Node& node, const std::string& key) {
  std::vector<T> out;
  if (node.IsScalar()) {
    out.push_back(scalar<T>(node, key));
  } else if (node.IsSequence()) {
    for (const auto& item : node) out.push_back(scalar<T>(item, key));
  } else {
    config_error(node, key, "expected a value or a list");
  }
  return out;
}

std::vector<double> angle_list(const YAML::Node& node, const std::string& key) {
  std::vector<double> out;
  for (const auto& s : scalar_list<std::string>(node, key)) {
    try {
      out.push_back(parse_angle(s));
    } catch (const std::invalid_argument& e) {
      config_error(node, key, e.what());
    }
  }
  return out;
}

std::size_t positive_size(const YAML::Node& node, const std::string& key) {
  const auto v = scalar<long long>(node, key);
  if (v <= 0) config_error(node, key, "must be positive");
  return static_cast<std::size_t>(v);
}

// Calls fn(key, value) for each entry of a mapping, rejecting unknown keys.
template <typename Fn>
void each_entry(const YAML::Node& map, const std::string& section,
                std::initializer_list<std::string_view> known, Fn fn) {
  if (!map.IsMap()) config_error(map, section, "expected a mapping");
  for (const auto& kv : map) {
    const std::string key = kv.first.as<std::string>();
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      config_error(kv.first, section.empty() ? key : section + "." + key, "unknown key");
    }
    fn(key, kv.second);
  }
}

void parse_training(const YAML::Node& node, const std::string& section, TrainConfig& tc) {
  each_entry(node, section,
             {"epochs", "learning_rate", "weight_decay", "hidden", "patience",
              "standardize_inputs"},
             [&](const std::string& key, const YAML::Node& v) {
               const std::string name = section + "." + key;
               if (key == "epochs") {
                 tc.epochs = static_cast<int>(positive_size(v, name));
               } else if (key == "learning_rate") {
                 tc.learning_rate = scalar<double>(v, name);
                 if (!(tc.learning_rate > 0.0)) config_error(v, name, "must be positive");
               } else if (key == "weight_decay") {
                 tc.weight_decay = scalar<double>(v, name);
                 if (tc.weight_decay < 0.0) config_error(v, name, "must be non-negative");
               } else if (key == "hidden") {
                 tc.hidden.clear();
                 for (const auto& h : v) tc.hidden.push_back(positive_size(h, name));
                 if (tc.hidden.empty()) config_error(v, name, "needs at least one layer");
               } else if (key == "patience") {
                 tc.patience = static_cast<int>(positive_size(v, name));
               } else {
                 tc.standardize_inputs = scalar<bool>(v, name);
               }
             });
}

}  // namespace

SweepConfig parse_sweep_config(std::istream& in) {
  YAML::Node root;
  try {
    root = YAML::Load(in);
  } catch (const YAML::ParserException& e) {
    throw std::invalid_argument("config line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  SweepConfig cfg;
  if (root.IsNull()) return cfg;
  each_entry(
      root, "", {"grid", "methods", "seeds", "master_seed", "data", "training", "propensity", "em",
                 "ipw_clip", "calibration", "output", "workers"},
      [&](const std::string& key, const YAML::Node& v) {
        if (key == "grid") {
          each_entry(v, key, {"q_t", "q_y", "k", "psi"},
                     [&](const std::string& g, const YAML::Node& gv) {
                       const std::string name = "grid." + g;
                       if (g == "psi") {
                         cfg.psi = angle_list(gv, name);
                       } else {
                         auto vals = scalar_list<double>(gv, name);
                         for (double x : vals) {
                           if (!(x > 0.0)) config_error(gv, name, "values must be positive");
                         }
                         (g == "q_t" ? cfg.q_t : g == "q_y" ? cfg.q_y : cfg.k) = std::move(vals);
                       }
                     });
        } else if (key == "methods") {
          cfg.methods.clear();
          for (const auto& tag : scalar_list<std::string>(v, key)) {
            try {
              cfg.methods.push_back(parse_method(tag));
            } catch (const std::invalid_argument& e) {
              config_error(v, key, e.what());
            }
          }
        } else if (key == "seeds") {
          cfg.seeds = scalar_list<std::uint64_t>(v, key);
        } else if (key == "master_seed") {
          cfg.master_seed = scalar<std::uint64_t>(v, key);
        } else if (key == "data") {
          each_entry(v, key, {"n", "overlap_scale"}, [&](const std::string& d, const YAML::Node& dv) {
            if (d == "n") {
              cfg.n = positive_size(dv, "data.n");
            } else {
              cfg.overlap_scale = scalar<double>(dv, "data.overlap_scale");
              if (!(cfg.overlap_scale > 0.0)) config_error(dv, "data.overlap_scale", "must be positive");
            }
          });
        } else if (key == "training") {
          parse_training(v, key, cfg.method.em.train);
        } else if (key == "propensity") {
          parse_training(v, key, cfg.method.em.propensity);
        } else if (key == "em") {
          EMConfig& em = cfg.method.em;
          each_entry(v, key, {"max_iters", "patience", "warm_start", "temperature", "init"},
                     [&](const std::string& e, const YAML::Node& ev) {
                       const std::string name = "em." + e;
                       if (e == "max_iters") {
                         em.max_iters = static_cast<int>(positive_size(ev, name));
                       } else if (e == "patience") {
                         em.patience = static_cast<int>(positive_size(ev, name));
                       } else if (e == "warm_start") {
                         em.warm_start = scalar<bool>(ev, name);
                       } else if (e == "temperature") {
                         em.temperature = scalar<double>(ev, name);
                         if (!(em.temperature > 0.0)) config_error(ev, name, "must be positive");
                       } else {
                         const auto init = scalar<std::string>(ev, name);
                         if (init == "tested_only") {
                           em.init = EMInit::kTestedOnly;
                         } else if (init == "random") {
                           em.init = EMInit::kRandom;
                         } else {
                           config_error(ev, name, "expected tested_only or random");
                         }
                       }
                     });
        } else if (key == "ipw_clip") {
          cfg.method.ipw_clip = scalar<double>(v, key);
          if (!(cfg.method.ipw_clip > 0.0 && cfg.method.ipw_clip < 0.5)) {
            config_error(v, key, "must lie in (0, 0.5)");
          }
        } else if (key == "calibration") {
          each_entry(v, key, {"tolerance", "mc_samples", "mc_seed"},
                     [&](const std::string& c, const YAML::Node& cv) {
                       const std::string name = "calibration." + c;
                       if (c == "tolerance") {
                         cfg.calibration.tolerance = scalar<double>(cv, name);
                       } else if (c == "mc_samples") {
                         cfg.calibration.mc_samples = positive_size(cv, name);
                       } else {
                         cfg.calibration.mc_seed = scalar<std::uint64_t>(cv, name);
                       }
                     });
        } else if (key == "output") {
          each_entry(v, key, {"path", "record_wall_time"},
                     [&](const std::string& o, const YAML::Node& ov) {
                       if (o == "path") {
                         cfg.output = scalar<std::string>(ov, "output.path");
                       } else {
                         cfg.record_wall_time = scalar<bool>(ov, "output.record_wall_time");
                       }
                     });
        } else {
          cfg.workers = static_cast<int>(positive_size(v, key));
        }
      });
  cfg.validate();
  return cfg;
}

SweepConfig load_sweep_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  return parse_sweep_config(in);
}

// ---------------------------------------------------------------------------
// Jobs

namespace {

constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kModelStream = 2;
constexpr std::uint64_t kPropensityStream = 3;

// The phase is left out so every psi value of a setting shares its draws.
std::uint64_t cell_seed(const SweepConfig& cfg, const Setting& s, std::uint64_t seed_index,
                        std::uint64_t stream) {
  return derive_seed({cfg.master_seed, hash_double(s.q_t), hash_double(s.q_y), hash_double(s.k),
                      seed_index, stream});
}

}  // namespace

SimConfig sim_config(const SweepConfig& cfg, const Setting& s, std::uint64_t seed_index) {
  SimConfig sc;
  sc.q_t = s.q_t;
  sc.q_y = s.q_y;
  sc.k = s.k;
  sc.psi = s.psi;
  sc.n = cfg.n;
  sc.overlap_scale = cfg.overlap_scale;
  sc.seed = cell_seed(cfg, s, seed_index, kDataStream);
  return sc;
}

MethodConfig method_config(const SweepConfig& cfg, const Setting& s, std::uint64_t seed_index) {
  MethodConfig mc = cfg.method;
  mc.em.train.seed = cell_seed(cfg, s, seed_index, kModelStream);
  mc.em.propensity.seed = cell_seed(cfg, s, seed_index, kPropensityStream);
  return mc;
}

bool row_less(const ResultRow& a, const ResultRow& b) {
  const auto key = [](const ResultRow& r) {
    return std::make_tuple(r.setting.q_t, r.setting.q_y, r.setting.k, r.setting.psi,
                           method_tag(r.method), r.seed);
  };
  return key(a) < key(b);
}

FitDetail run_fit(const SweepConfig& cfg, const Setting& s, Method method,
                  std::uint64_t seed_index, const SimParams& params) {
  const SimConfig sc = sim_config(cfg, s, seed_index);
  sc.validate();
  FitDetail detail;
  detail.data = generate(sc, params);

  const auto start = std::chrono::steady_clock::now();
  detail.fit = fit_method(method, detail.data.train, detail.data.validation,
                          method_config(cfg, s, seed_index));
  const auto elapsed = std::chrono::steady_clock::now() - start;

  ResultRow& row = detail.row;
  row.setting = s;
  row.method = method;
  row.seed = seed_index;
  row.n_em_iters = detail.fit.stats.em_iterations;
  if (cfg.record_wall_time) {
    row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
  }
  const Dataset& test = detail.data.test;
  const std::vector<double> scores = detail.fit.model.predict(test);
  std::vector<int> labels, groups;
  for (const auto& ex : test.examples) {
    labels.push_back(ex.y);
    groups.push_back(ex.a);
  }
  try {
    const EvalReport report = evaluate(scores, labels, groups);
    row.auc = report.auc;
    if (report.roc_gap_valid) row.roc_gap = report.roc_gap;
  } catch (const std::invalid_argument&) {
    // Single-class test labels: both metrics stay undefined.
  }
  return detail;
}

namespace {

template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn fn) {
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) fn(i);
  };
  const auto extra = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < extra; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
}

std::string describe(const Setting& s) {
  std::ostringstream o;
  o << "q_t=" << s.q_t << " q_y=" << s.q_y << " k=" << s.k << " psi=" << s.psi;
  return o.str();
}

}  // namespace

SweepSummary run_sweep(const SweepConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  SweepSummary summary;
  std::mutex mu;
  const auto note = [&](const std::string& msg) {
    std::lock_guard lock(mu);
    summary.log.push_back(msg);
    if (progress) progress(msg);
  };

  std::vector<Setting> settings;
  for (double qt : cfg.q_t)
    for (double qy : cfg.q_y)
      for (double k : cfg.k)
        for (double psi : cfg.psi) settings.push_back({qt, qy, k, psi});
  const std::size_t per_setting = cfg.methods.size() * cfg.seeds.size();
  summary.requested = settings.size() * per_setting;

  // Calibrate each setting once; infeasible ones are skipped.
  std::vector<std::optional<SimParams>> params(settings.size());
  parallel_for(settings.size(), cfg.workers, [&](std::size_t i) {
    try {
      const SimConfig sc = sim_config(cfg, settings[i], 0);
      sc.validate();
      params[i] = solve_sim_params(sc, cfg.calibration);
      note("calibrated " + describe(settings[i]));
    } catch (const std::exception& e) {
      note("skipped " + describe(settings[i]) + ": " + e.what());
    }
  });

  struct Job {
    std::size_t setting;
    Method method;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < settings.size(); ++i) {
    if (!params[i]) {
      summary.skipped += per_setting;
      continue;
    }
    for (auto seed : cfg.seeds)
      for (auto m : cfg.methods) jobs.push_back({i, m, seed});
  }

  std::vector<ResultRow> rows(jobs.size());
  std::atomic<std::size_t> violations{0};
  parallel_for(jobs.size(), cfg.workers, [&](std::size_t j) {
    const Job& job = jobs[j];
    const Setting& s = settings[job.setting];
    const std::string label = describe(s) + " method=" + std::string(method_tag(job.method)) +
                              " seed=" + std::to_string(job.seed);
    try {
      FitDetail d = run_fit(cfg, s, job.method, job.seed, *params[job.setting]);
      violations += d.fit.stats.estep_violations;
      rows[j] = d.row;
      std::ostringstream msg;
      msg << "done " << label << " auc="
          << (d.row.auc ? std::to_string(*d.row.auc) : std::string("NA"));
      note(msg.str());
    } catch (const std::exception& e) {
      rows[j] = ResultRow{s, job.method, job.seed, std::nullopt, std::nullopt, 0, 0};
      note("failed " + label + ": " + e.what());
    }
  });
  std::sort(rows.begin(), rows.end(), row_less);
  summary.rows = std::move(rows);
  summary.estep_violations = violations;
  return summary;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

constexpr std::string_view kHeader = "q_t,q_y,k,psi,method,seed,auc,roc_gap,n_em_iters,wall_ms";

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string metric(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, *v, std::chars_format::fixed, 6);
  return std::string(buf, res.ptr);
}

}  // namespace

void write_rows(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kHeader << '\n';
  for (const auto& r : rows) {
    out << shortest(r.setting.q_t) << ',' << shortest(r.setting.q_y) << ','
        << shortest(r.setting.k) << ',' << shortest(r.setting.psi) << ',' << method_tag(r.method)
        << ',' << r.seed << ',' << metric(r.auc) << ',' << metric(r.roc_gap) << ','
        << r.n_em_iters << ',' << r.wall_ms << '\n';
  }
}

void write_rows_atomic(const std::string& path, const std::vector<ResultRow>& rows) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    write_rows(out, rows);
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, target);
}

std::vector<ResultRow> read_rows(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kHeader) {
    throw std::invalid_argument("results line 1: expected header '" + std::string(kHeader) + "'");
  }
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(trim(line));
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(trim(cell));
    const auto fail = [&](const std::string& what) {
      return std::invalid_argument("results line " + std::to_string(line_no) + ": " + what);
    };
    if (f.size() != 10) throw fail("expected 10 fields, got " + std::to_string(f.size()));
    ResultRow r;
    double* nums[] = {&r.setting.q_t, &r.setting.q_y, &r.setting.k, &r.setting.psi};
    for (int i = 0; i < 4; ++i) {
      if (!parse_number(f[static_cast<std::size_t>(i)], *nums[i])) throw fail("bad number '" + f[static_cast<std::size_t>(i)] + "'");
    }
    try {
      r.method = parse_method(f[4]);
    } catch (const std::invalid_argument& e) {
      throw fail(e.what());
    }
    const auto parse_int = [&](const std::string& s, auto& out) {
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      if (ec != std::errc() || p != s.data() + s.size()) throw fail("bad integer '" + s + "'");
    };
    parse_int(f[5], r.seed);
    for (int i : {6, 7}) {
      const std::string& cell = f[static_cast<std::size_t>(i)];
      if (cell == "NA") continue;
      double v;
      if (!parse_number(cell, v) || v < 0.0 || v > 1.0) throw fail("bad metric '" + cell + "'");
      (i == 6 ? r.auc : r.roc_gap) = v;
    }
    parse_int(f[8], r.n_em_iters);
    parse_int(f[9], r.wall_ms);
    rows.push_back(r);
  }
  return rows;
}

std::vector<ResultRow> read_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open results '" + path + "'");
  return read_rows(in);
}

// ---------------------------------------------------------------------------
// Report

std::string auc_band(double auc) {
  if (auc <= kAucBandEdges[0]) return "(-inf,0.775]";
  if (auc <= kAucBandEdges[1]) return "(0.775,0.825]";
  if (auc <= kAucBandEdges[2]) return "(0.825,0.875]";
  return "(0.875,inf)";
}

Report make_report(const std::vector<ResultRow>& rows) {
  std::map<Method, std::vector<const ResultRow*>> by_method;
  for (const auto& r : rows) by_method[r.method].push_back(&r);
  Report report;
  const std::string bands[] = {auc_band(0.0), auc_band(0.8), auc_band(0.85), auc_band(1.0)};
  for (const auto& [method, group] : by_method) {
    MethodAggregate agg;
    agg.method = std::string(method_tag(method));
    agg.rows = group.size();
    std::vector<double> aucs, gaps;
    std::map<std::string, std::vector<double>> band_gaps;
    for (const auto* r : group) {
      if (r->auc) aucs.push_back(*r->auc);
      if (r->roc_gap) gaps.push_back(*r->roc_gap);
      if (r->auc && r->roc_gap) {
        ++agg.valid;
        band_gaps[auc_band(*r->auc)].push_back(*r->roc_gap);
      }
    }
    if (!aucs.empty()) agg.auc = aggregate(aucs);
    if (!gaps.empty()) agg.roc_gap = aggregate(gaps);
    report.methods.push_back(agg);
    for (const auto& band : bands) {
      BandCell cell{agg.method, band, 0, 0.0};
      if (auto it = band_gaps.find(band); it != band_gaps.end()) {
        cell.count = it->second.size();
        cell.median_roc_gap = aggregate(it->second).median;
      }
      report.bands.push_back(cell);
    }
  }
  return report;
}

void write_report(std::ostream& out, const Report& report) {
  const auto agg = [](const std::optional<Aggregate>& a) {
    if (!a) return std::string("NA,NA,NA,NA");
    return metric(a->median) + ',' + metric(a->min) + ',' + metric(a->max) + ',' +
           metric(a->range);
  };
  out << "method,rows,valid,auc_median,auc_min,auc_max,auc_range,"
         "roc_gap_median,roc_gap_min,roc_gap_max,roc_gap_range\n";
  for (const auto& m : report.methods) {
    out << m.method << ',' << m.rows << ',' << m.valid << ',' << agg(m.auc) << ','
        << agg(m.roc_gap) << '\n';
  }
  out << "\nmethod,auc_band,count,roc_gap_median\n";
  for (const auto& b : report.bands) {
    out << b.method << ",\"" << b.band << "\"," << b.count << ','
        << (b.count ? metric(b.median_roc_gap) : std::string("NA")) << '\n';
  }
}

}  // namespace dcem
