#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dcem/baselines.hpp"
#include "dcem/metrics.hpp"
#include "dcem/synthgen.hpp"

namespace dcem {

// Angle literal: a number, or a multiple/fraction of pi such as "pi",
// "-pi/2", "2*pi/3", "0.5pi". Throws std::invalid_argument.
double parse_angle(std::string_view text);

struct SweepConfig {
  std::vector<double> q_t{2.0};
  std::vector<double> q_y{0.5};
  std::vector<double> k{1.0};
  std::vector<double> psi{0.0};
  std::vector<Method> methods{Method::kDcem};
  std::vector<std::uint64_t> seeds{0};
  std::uint64_t master_seed = 42;
  std::size_t n = 20000;
  double overlap_scale = 1.0;
  MethodConfig method;
  CalibrationOptions calibration;
  std::string output = "results.csv";
  bool record_wall_time = true;
  int workers = 1;

  void validate() const;
};

// YAML config; errors carry the offending key and line. Relative output
// paths are kept as written.
SweepConfig parse_sweep_config(std::istream& in);
SweepConfig load_sweep_config(const std::string& path);

struct Setting {
  double q_t, q_y, k, psi;
};

SimConfig sim_config(const SweepConfig& cfg, const Setting& s, std::uint64_t seed_index);
// Model seeds are shared by every method in a (setting, seed) cell so that
// methods see the same initial weights.
MethodConfig method_config(const SweepConfig& cfg, const Setting& s, std::uint64_t seed_index);

struct ResultRow {
  Setting setting;
  Method method;
  std::uint64_t seed;
  std::optional<double> auc;
  std::optional<double> roc_gap;
  int n_em_iters = 0;
  std::int64_t wall_ms = 0;
};

// Canonical order: setting tuple, then method tag, then seed.
bool row_less(const ResultRow& a, const ResultRow& b);

void write_rows(std::ostream& out, const std::vector<ResultRow>& rows);
// Writes to `path` via a temporary file and rename.
void write_rows_atomic(const std::string& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_rows(std::istream& in);
std::vector<ResultRow> read_rows(const std::string& path);

struct FitDetail {
  ResultRow row;
  FitOutput fit;
  SplitSet data;
};

// One method on one setting; the row's metrics are absent when evaluation
// is undefined (e.g. single-class test group).
FitDetail run_fit(const SweepConfig& cfg, const Setting& s, Method method,
                  std::uint64_t seed_index, const SimParams& params);

struct SweepSummary {
  std::vector<ResultRow> rows;
  std::size_t requested = 0;  // settings x methods x seeds
  std::size_t skipped = 0;    // jobs dropped because their setting is infeasible
  std::size_t estep_violations = 0;
  std::vector<std::string> log;
};

using ProgressFn = std::function<void(const std::string&)>;

// Runs every job on cfg.workers threads and returns rows in canonical order.
SweepSummary run_sweep(const SweepConfig& cfg, const ProgressFn& progress = {});

struct MethodAggregate {
  std::string method;
  std::size_t rows = 0;
  std::size_t valid = 0;
  std::optional<Aggregate> auc;  // over rows with a defined metric
  std::optional<Aggregate> roc_gap;
};

struct BandCell {
  std::string method;
  std::string band;
  std::size_t count = 0;
  double median_roc_gap = 0.0;
};

struct Report {
  std::vector<MethodAggregate> methods;
  std::vector<BandCell> bands;
};

inline constexpr double kAucBandEdges[] = {0.775, 0.825, 0.875};

std::string auc_band(double auc);
Report make_report(const std::vector<ResultRow>& rows);
void write_report(std::ostream& out, const Report& report);

}  // namespace dcem
