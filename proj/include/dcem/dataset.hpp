#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace dcem {

enum class Split { kTrain, kValidation, kTest };

std::string_view split_name(Split s);

// One individual. `y` is ground truth and is never visible to the censored
// learners; `y_obs` is the proxy label, always equal to y * t.
struct LabeledExample {
  std::vector<double> x;
  int a = 0;
  int t = 0;
  int y = 0;
  int y_obs = 0;
};

struct Dataset {
  std::vector<LabeledExample> examples;
  Split split = Split::kTrain;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  // Feature dimension; 0 for an empty dataset.
  std::size_t dim() const { return examples.empty() ? 0 : examples.front().x.size(); }

  // Throws std::invalid_argument on ragged features, non-binary fields or
  // y_obs != y * t.
  void validate() const;
};

enum class FeatureSet {
  kX,         // covariates only
  kXAndGroup  // covariates with the group bit appended
};

// Column-major design matrix, one column per selected example.
Eigen::MatrixXd feature_matrix(const Dataset& data, FeatureSet features,
                               const std::vector<std::size_t>& rows);
Eigen::MatrixXd feature_matrix(const Dataset& data, FeatureSet features);

std::vector<std::size_t> all_rows(const Dataset& data);

// Columnar text format: header `x0,...,x{d-1},a,t,y,y_obs`, floats printed
// with 17 significant digits so a write/read cycle is exact.
void write_csv(const Dataset& data, std::ostream& out);
void write_csv(const Dataset& data, const std::string& path);
Dataset read_csv(std::istream& in, Split split);
Dataset read_csv(const std::string& path, Split split);

}  // namespace dcem
