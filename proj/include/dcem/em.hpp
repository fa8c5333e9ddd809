#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "dcem/dataset.hpp"
#include "dcem/nnet.hpp"

namespace dcem {

// Propensity model g(x, a) with temperature-scaled output
// t_hat = logistic(z / temperature). Frozen once fitted.
struct Propensity {
  Network net;
  double temperature = 1.0;

  double predict(const LabeledExample& ex) const;
  std::vector<double> predict(const Dataset& data) const;
};

// Trains on the train split with t as the target and the group bit appended
// to x, early-stopped on validation. Throws if t is single-class.
Propensity fit_propensity(const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                          double temperature = 1.0);

// Posterior pseudo-label: y_obs for tested examples, f(x) otherwise.
double e_step(const Network& f, const LabeledExample& ex);

// Batched E-step over a dataset; `inputs` are its covariate columns. Tested
// rows copy y_obs without a forward pass.
std::vector<double> e_step(const Network& f, const Dataset& data, const Eigen::MatrixXd& inputs);

// Number of tested rows whose pseudo-label differs from y_obs.
std::size_t count_estep_violations(const Dataset& data, const std::vector<double>& q);

// L(Q, yhat) + Q L(y_obs, yhat t_hat), both products clamped.
double m_step_loss(double q, int y_obs, double y_hat, double t_hat);

// Mean M-step loss over examples as a function of the outcome logits. With
// `regularize` false the second term is dropped.
class MStepObjective final : public Objective {
 public:
  MStepObjective(std::vector<double> q, std::vector<int> y_obs, std::vector<double> t_hat,
                 bool regularize = true);
  std::size_t size() const override { return q_.size(); }
  double evaluate(const Eigen::VectorXd& logits, Eigen::VectorXd* grad) const override;

 private:
  std::vector<double> q_;
  std::vector<int> y_obs_;
  std::vector<double> t_hat_;
  bool regularize_;
};

enum class EMInit { kTestedOnly, kRandom };

enum class MStepVariant {
  kCausal,         // full regularised loss with the propensity model
  kNoRegularizer,  // plain cross-entropy against Q
  kHardT           // t_hat replaced by the observed t; no propensity model
};

struct EMConfig {
  int max_iters = 50;
  int patience = 3;
  bool warm_start = true;
  double temperature = 1.0;
  EMInit init = EMInit::kTestedOnly;
  MStepVariant variant = MStepVariant::kCausal;
  TrainConfig train;  // pretraining and every M-step
  TrainConfig propensity = [] {
    TrainConfig c;
    c.patience = 50;
    c.seed = 43;
    return c;
  }();

  void validate() const;
};

struct EMState {
  Network f_theta;
  Propensity g_zeta;
  std::vector<double> q_values;  // train pseudo-labels from the last E-step
  std::vector<double> t_hat;     // train propensities
  int iteration = 0;             // completed EM iterations
  std::vector<double> val_loss_history;
};

struct EMResult {
  Network model;  // best-validation f_theta
  EMState state;
  int best_iteration = 0;  // 1-based
  std::size_t estep_violations = 0;
};

// Pretrains f on tested examples (or starts from a random network), fits the
// propensity model, then alternates E- and M-steps until max_iters or until
// the validation M-step loss has not improved for `patience` iterations.
EMResult fit_dcem(const Dataset& train, const Dataset& val, const EMConfig& cfg);

}  // namespace dcem
