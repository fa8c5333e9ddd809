#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "dcem/dataset.hpp"
#include "dcem/em.hpp"
#include "dcem/nnet.hpp"

namespace dcem {

enum class Method {
  kDcem,
  kYObs,
  kTestedOnly,
  kTestedOnlyGroup,
  kGroupOnly0,
  kGroupOnly1,
  kOracle,
  kImputationOnly,
  kNoCausalReg,
  kHardT,
  kIpwTested,
};

std::string_view method_tag(Method m);
// Throws std::invalid_argument for an unknown tag.
Method parse_method(std::string_view tag);
const std::vector<Method>& all_methods();

// A fitted outcome model together with the features it consumes.
struct Classifier {
  Network net;
  FeatureSet features = FeatureSet::kX;

  std::vector<double> predict(const Dataset& data) const;
};

struct FitStats {
  std::array<std::size_t, 2> rows_by_group{0, 0};  // training rows consumed, per group
  int em_iterations = 0;
  std::size_t estep_violations = 0;
};

struct FitOutput {
  Classifier model;
  FitStats stats;
  std::optional<Propensity> propensity;  // for methods that fit one
};

// Shared settings; every method uses em.train for its outcome model and
// em.propensity for any propensity model.
struct MethodConfig {
  EMConfig em;
  double ipw_clip = 0.05;
};

// 1 / max(t_hat, clip), defined for tested examples only.
double ipw_weight(int t, double t_hat, double clip = 0.05);

// Throws std::invalid_argument when the method's training subset is empty or
// its targets are single-class.
FitOutput fit_method(Method method, const Dataset& train, const Dataset& val,
                     const MethodConfig& cfg);

}  // namespace dcem
