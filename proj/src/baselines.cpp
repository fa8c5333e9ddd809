#include "dcem/baselines.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace dcem {

namespace {

struct Entry {
  Method method;
  std::string_view tag;
};

constexpr Entry kMethods[] = {
    {Method::kDcem, "dcem"},
    {Method::kYObs, "y_obs"},
    {Method::kTestedOnly, "tested_only"},
    {Method::kTestedOnlyGroup, "tested_only_group"},
    {Method::kGroupOnly0, "group_only_0"},
    {Method::kGroupOnly1, "group_only_1"},
    {Method::kOracle, "oracle"},
    {Method::kImputationOnly, "imputation_only"},
    {Method::kNoCausalReg, "no_causal_reg"},
    {Method::kHardT, "hard_t"},
    {Method::kIpwTested, "ipw_tested"},
};

enum class Target { kObserved, kTruth };

Network train_model(const Eigen::MatrixXd& x, std::vector<double> targets,
                    std::vector<double> weights, const TrainConfig& cfg) {
  return train(make_network(x, cfg), x, std::move(targets), std::move(weights), cfg).net;
}

// Plain cross-entropy fit on the selected rows.
FitOutput fit_rows(const Dataset& train, const std::vector<std::size_t>& rows, FeatureSet features,
                   Target target, std::vector<double> weights, const TrainConfig& cfg,
                   std::string_view method) {
  if (rows.empty()) {
    throw std::invalid_argument(std::string(method) + ": no training examples");
  }
  FitOutput out;
  std::vector<double> targets;
  targets.reserve(rows.size());
  for (auto i : rows) {
    const auto& ex = train.examples[i];
    targets.push_back(static_cast<double>(target == Target::kTruth ? ex.y : ex.y_obs));
    ++out.stats.rows_by_group[static_cast<std::size_t>(ex.a)];
  }
  const auto [lo, hi] = std::minmax_element(targets.begin(), targets.end());
  if (*lo == *hi) {
    throw std::invalid_argument(std::string(method) + ": single-class training targets");
  }
  const Eigen::MatrixXd x = feature_matrix(train, features, rows);
  out.model.features = features;
  out.model.net = train_model(x, std::move(targets), std::move(weights), cfg);
  return out;
}

std::vector<std::size_t> select(const Dataset& data, bool (*keep)(const LabeledExample&)) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (keep(data.examples[i])) rows.push_back(i);
  }
  return rows;
}

bool is_tested(const LabeledExample& ex) { return ex.t == 1; }
bool in_group_0(const LabeledExample& ex) { return ex.a == 0; }
bool in_group_1(const LabeledExample& ex) { return ex.a == 1; }

FitOutput fit_em(const Dataset& train, const Dataset& val, EMConfig cfg, MStepVariant variant) {
  cfg.variant = variant;
  EMResult em = fit_dcem(train, val, cfg);
  FitOutput out;
  out.model.net = std::move(em.model);
  out.stats.em_iterations = em.state.iteration;
  out.stats.estep_violations = em.estep_violations;
  if (variant == MStepVariant::kCausal) out.propensity = std::move(em.state.g_zeta);
  for (const auto& ex : train.examples) ++out.stats.rows_by_group[static_cast<std::size_t>(ex.a)];
  return out;
}

}  // namespace

std::string_view method_tag(Method m) {
  for (const auto& e : kMethods) {
    if (e.method == m) return e.tag;
  }
  throw std::invalid_argument("unknown method");
}

Method parse_method(std::string_view tag) {
  for (const auto& e : kMethods) {
    if (e.tag == tag) return e.method;
  }
  throw std::invalid_argument("unknown method '" + std::string(tag) + "'");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = [] {
    std::vector<Method> v;
    for (const auto& e : kMethods) v.push_back(e.method);
    return v;
  }();
  return methods;
}

std::vector<double> Classifier::predict(const Dataset& data) const {
  const Eigen::VectorXd p = net.predict(feature_matrix(data, features));
  return {p.data(), p.data() + p.size()};
}

double ipw_weight(int t, double t_hat, double clip) {
  if (t != 1) throw std::invalid_argument("inverse-propensity weights are defined for tested rows");
  return 1.0 / std::max(t_hat, clip);
}

FitOutput fit_method(Method method, const Dataset& train, const Dataset& val,
                     const MethodConfig& cfg) {
  const std::string_view tag = method_tag(method);
  const TrainConfig& tc = cfg.em.train;
  switch (method) {
    case Method::kDcem:
      return fit_em(train, val, cfg.em, MStepVariant::kCausal);
    case Method::kNoCausalReg:
      return fit_em(train, val, cfg.em, MStepVariant::kNoRegularizer);
    case Method::kHardT:
      return fit_em(train, val, cfg.em, MStepVariant::kHardT);
    case Method::kImputationOnly: {
      EMConfig one = cfg.em;
      one.max_iters = 1;
      return fit_em(train, val, one, MStepVariant::kNoRegularizer);
    }
    case Method::kYObs:
      return fit_rows(train, all_rows(train), FeatureSet::kX, Target::kObserved, {}, tc, tag);
    case Method::kOracle:
      return fit_rows(train, all_rows(train), FeatureSet::kX, Target::kTruth, {}, tc, tag);
    case Method::kTestedOnly:
      return fit_rows(train, select(train, is_tested), FeatureSet::kX, Target::kObserved, {}, tc,
                      tag);
    case Method::kTestedOnlyGroup:
      return fit_rows(train, select(train, is_tested), FeatureSet::kXAndGroup, Target::kObserved,
                      {}, tc, tag);
    case Method::kGroupOnly0:
      return fit_rows(train, select(train, in_group_0), FeatureSet::kX, Target::kObserved, {}, tc,
                      tag);
    case Method::kGroupOnly1:
      return fit_rows(train, select(train, in_group_1), FeatureSet::kX, Target::kObserved, {}, tc,
                      tag);
    case Method::kIpwTested: {
      const Propensity g = fit_propensity(train, val, cfg.em.propensity, cfg.em.temperature);
      const std::vector<std::size_t> rows = select(train, is_tested);
      std::vector<double> weights;
      weights.reserve(rows.size());
      for (auto i : rows) {
        weights.push_back(ipw_weight(1, g.predict(train.examples[i]), cfg.ipw_clip));
      }
      FitOutput out =
          fit_rows(train, rows, FeatureSet::kX, Target::kObserved, std::move(weights), tc, tag);
      out.propensity = g;
      return out;
    }
  }
  throw std::invalid_argument("unknown method");
}

}  // namespace dcem
