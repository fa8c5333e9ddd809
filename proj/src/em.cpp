#include "dcem/em.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dcem {

double Propensity::predict(const LabeledExample& ex) const {
  std::vector<double> in(ex.x);
  in.push_back(static_cast<double>(ex.a));
  return clamp_prob(logistic(net.logit(in) / temperature));
}

std::vector<double> Propensity::predict(const Dataset& data) const {
  const Eigen::VectorXd z = net.logits(feature_matrix(data, FeatureSet::kXAndGroup));
  std::vector<double> out(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    out[static_cast<std::size_t>(i)] = clamp_prob(logistic(z(i) / temperature));
  }
  return out;
}

namespace {

std::vector<double> column(const Dataset& data, int LabeledExample::*field) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& ex : data.examples) out.push_back(static_cast<double>(ex.*field));
  return out;
}

std::vector<int> observed_labels(const Dataset& data) {
  std::vector<int> out;
  out.reserve(data.size());
  for (const auto& ex : data.examples) out.push_back(ex.y_obs);
  return out;
}

}  // namespace

Propensity fit_propensity(const Dataset& train_data, const Dataset& val, const TrainConfig& cfg,
                          double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  std::size_t tested = 0;
  for (const auto& ex : train_data.examples) tested += static_cast<std::size_t>(ex.t);
  if (tested == 0 || tested == train_data.size()) {
    throw std::invalid_argument("propensity model needs both tested and untested examples");
  }
  const Eigen::MatrixXd x = feature_matrix(train_data, FeatureSet::kXAndGroup);
  const BceObjective objective(column(train_data, &LabeledExample::t));
  Network net = make_network(x, cfg);
  if (val.empty()) return {train(std::move(net), x, objective, cfg).net, temperature};
  const Eigen::MatrixXd vx = feature_matrix(val, FeatureSet::kXAndGroup);
  const BceObjective val_objective(column(val, &LabeledExample::t));
  return {train(std::move(net), x, objective, cfg, Holdout{vx, val_objective}).net, temperature};
}

double e_step(const Network& f, const LabeledExample& ex) {
  if (ex.t == 1) return static_cast<double>(ex.y_obs);
  return f.forward(ex.x);
}

std::vector<double> e_step(const Network& f, const Dataset& data, const Eigen::MatrixXd& inputs) {
  std::vector<std::size_t> untested;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.examples[i].t == 0) untested.push_back(i);
  }
  Eigen::MatrixXd sub(inputs.rows(), static_cast<Eigen::Index>(untested.size()));
  for (std::size_t j = 0; j < untested.size(); ++j) {
    sub.col(static_cast<Eigen::Index>(j)) = inputs.col(static_cast<Eigen::Index>(untested[j]));
  }
  const Eigen::VectorXd p = f.predict(sub);
  std::vector<double> q(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.examples[i].t == 1) q[i] = static_cast<double>(data.examples[i].y_obs);
  }
  for (std::size_t j = 0; j < untested.size(); ++j) q[untested[j]] = p(static_cast<Eigen::Index>(j));
  return q;
}

std::size_t count_estep_violations(const Dataset& data, const std::vector<double>& q) {
  std::size_t bad = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& ex = data.examples[i];
    if (ex.t == 1 && q[i] != static_cast<double>(ex.y_obs)) ++bad;
  }
  return bad;
}

double m_step_loss(double q, int y_obs, double y_hat, double t_hat) {
  const double p = clamp_prob(y_hat);
  return bce(q, p) + q * bce(static_cast<double>(y_obs), p * t_hat);
}

MStepObjective::MStepObjective(std::vector<double> q, std::vector<int> y_obs,
                               std::vector<double> t_hat, bool regularize)
    : q_(std::move(q)), y_obs_(std::move(y_obs)), t_hat_(std::move(t_hat)), regularize_(regularize) {
  if (y_obs_.size() != q_.size() || t_hat_.size() != q_.size()) {
    throw std::invalid_argument("M-step inputs differ in length");
  }
}

double MStepObjective::evaluate(const Eigen::VectorXd& logits, Eigen::VectorXd* grad) const {
  const auto n = static_cast<Eigen::Index>(q_.size());
  if (grad) grad->resize(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double raw = logistic(logits(i));
    const double p = clamp_prob(raw);
    const double q = q_[k];
    double loss = -q * std::log(p) - (1.0 - q) * std::log1p(-p);
    const bool p_free = p == raw;
    double dz = p_free ? p - q : 0.0;
    if (regularize_ && q != 0.0) {
      const double y = static_cast<double>(y_obs_[k]);
      const double raw_u = p * t_hat_[k];
      const double u = clamp_prob(raw_u);
      loss += q * (-y * std::log(u) - (1.0 - y) * std::log1p(-u));
      if (p_free && u == raw_u) {
        dz += q * t_hat_[k] * p * (1.0 - p) * ((1.0 - y) / (1.0 - u) - y / u);
      }
    }
    total += loss;
    if (grad) (*grad)(i) = dz * inv_n;
  }
  return total * inv_n;
}

void EMConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
  if (patience < 1) throw std::invalid_argument("patience must be at least 1");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
}

EMResult fit_dcem(const Dataset& train_data, const Dataset& val, const EMConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> tested;
  for (std::size_t i = 0; i < train_data.size(); ++i) {
    if (train_data.examples[i].t == 1) tested.push_back(i);
  }
  if (tested.empty()) throw std::invalid_argument("EM requires tested training examples");
  if (val.empty()) throw std::invalid_argument("EM requires a validation split");

  const Eigen::MatrixXd x = feature_matrix(train_data, FeatureSet::kX);
  const Eigen::MatrixXd vx = feature_matrix(val, FeatureSet::kX);

  EMResult result;
  EMState& state = result.state;
  const Network fresh = make_network(x, cfg.train);
  if (cfg.init == EMInit::kTestedOnly) {
    std::vector<double> targets;
    for (auto i : tested) targets.push_back(static_cast<double>(train_data.examples[i].y_obs));
    state.f_theta =
        train(fresh, feature_matrix(train_data, FeatureSet::kX, tested), targets, {}, cfg.train).net;
  } else {
    state.f_theta = fresh;
  }

  std::vector<double> val_t_hat;
  if (cfg.variant != MStepVariant::kCausal) {
    // Hard-t uses the observed t; without the regulariser t_hat is unused.
    state.t_hat = column(train_data, &LabeledExample::t);
    val_t_hat = column(val, &LabeledExample::t);
  } else {
    state.g_zeta = fit_propensity(train_data, val, cfg.propensity, cfg.temperature);
    state.t_hat = state.g_zeta.predict(train_data);
    val_t_hat = state.g_zeta.predict(val);
  }
  const bool regularize = cfg.variant != MStepVariant::kNoRegularizer;
  const std::vector<int> y_obs = observed_labels(train_data);
  const std::vector<int> val_y_obs = observed_labels(val);

  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    state.q_values = e_step(state.f_theta, train_data, x);
    std::vector<double> val_q = e_step(state.f_theta, val, vx);
    result.estep_violations += count_estep_violations(train_data, state.q_values) +
                               count_estep_violations(val, val_q);

    const MStepObjective objective(state.q_values, y_obs, state.t_hat, regularize);
    Network start = cfg.warm_start ? state.f_theta : fresh;
    state.f_theta = train(std::move(start), x, objective, cfg.train).net;
    state.iteration = it;

    const MStepObjective val_objective(std::move(val_q), val_y_obs, val_t_hat, regularize);
    const double val_loss = val_objective.evaluate(state.f_theta.logits(vx), nullptr);
    if (!std::isfinite(val_loss)) {
      throw std::runtime_error("non-finite validation loss at EM iteration " + std::to_string(it));
    }
    state.val_loss_history.push_back(val_loss);
    if (val_loss < best_val) {
      best_val = val_loss;
      result.model = state.f_theta;
      result.best_iteration = it;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace dcem
