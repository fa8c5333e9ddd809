#include "dcem/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dcem {

double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

double bce(double target, double pred, double weight) {
  const double p = clamp_prob(pred);
  return weight * (-target * std::log(p) - (1.0 - target) * std::log1p(-p));
}

// ---------------------------------------------------------------------------
// Network

Network::Network(std::size_t input_dim, std::vector<std::size_t> hidden, std::uint64_t seed)
    : input_dim_(input_dim), hidden_(std::move(hidden)) {
  if (input_dim_ == 0) throw std::invalid_argument("network input dimension must be positive");
  std::mt19937_64 rng(seed);
  std::size_t fan_in = input_dim_;
  auto make = [&](std::size_t out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer layer{Eigen::MatrixXd(out, fan_in), Eigen::VectorXd(out)};
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = u(rng);
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = u(rng);
    layers_.push_back(std::move(layer));
    fan_in = out;
  };
  for (std::size_t h : hidden_) {
    if (h == 0) throw std::invalid_argument("hidden layer sizes must be positive");
    make(h);
  }
  make(1);
  shift_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(input_dim_));
  scale_ = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(input_dim_));
}

Network Network::zeros(std::size_t input_dim, std::vector<std::size_t> hidden) {
  Network net(input_dim, std::move(hidden), 0);
  for (auto& layer : net.layers_) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  return net;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void Network::set_input_transform(Eigen::VectorXd shift, Eigen::VectorXd scale) {
  if (static_cast<std::size_t>(shift.size()) != input_dim_ ||
      static_cast<std::size_t>(scale.size()) != input_dim_) {
    throw std::invalid_argument("input transform dimension mismatch");
  }
  shift_ = std::move(shift);
  scale_ = std::move(scale);
}

Eigen::MatrixXd Network::transform(const Eigen::MatrixXd& inputs) const {
  if (static_cast<std::size_t>(inputs.rows()) != input_dim_) {
    throw std::invalid_argument("input dimension " + std::to_string(inputs.rows()) +
                                " does not match network input " + std::to_string(input_dim_));
  }
  return (inputs.colwise() - shift_).array().colwise() * scale_.array();
}

Eigen::VectorXd Network::logits(const Eigen::MatrixXd& inputs) const {
  Eigen::MatrixXd h = transform(inputs);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd a = layers_[l].weight * h;
    a.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) a = a.cwiseMax(0.0);
    h = std::move(a);
  }
  return h.row(0).transpose();
}

Eigen::VectorXd Network::predict(const Eigen::MatrixXd& inputs) const {
  Eigen::VectorXd z = logits(inputs);
  return z.unaryExpr([](double v) { return clamp_prob(logistic(v)); });
}

double Network::logit(std::span<const double> x) const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t i = 0; i < x.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = x[i];
  return logits(m)(0);
}

double Network::forward(std::span<const double> x) const {
  return clamp_prob(logistic(logit(x)));
}

Eigen::VectorXd Network::parameters() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  for (const auto& l : layers_) {
    flat.segment(k, l.weight.size()) = l.weight.reshaped();
    k += l.weight.size();
    flat.segment(k, l.bias.size()) = l.bias;
    k += l.bias.size();
  }
  return flat;
}

void Network::set_parameters(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
    throw std::invalid_argument("parameter vector has wrong length");
  }
  Eigen::Index k = 0;
  for (auto& l : layers_) {
    l.weight.reshaped() = flat.segment(k, l.weight.size());
    k += l.weight.size();
    l.bias = flat.segment(k, l.bias.size());
    k += l.bias.size();
  }
}

bool Network::operator==(const Network& other) const {
  if (input_dim_ != other.input_dim_ || hidden_ != other.hidden_) return false;
  if (shift_ != other.shift_ || scale_ != other.scale_) return false;
  return parameters() == other.parameters();
}

void Network::save(std::ostream& out) const {
  out << "dcem-network 1\n";
  out << "input " << input_dim_ << "\n";
  out << "hidden";
  for (auto h : hidden_) out << ' ' << h;
  out << "\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < shift_.size(); ++i) out << shift_(i) << ' ' << scale_(i) << '\n';
  const Eigen::VectorXd p = parameters();
  out << "params " << p.size() << "\n";
  for (Eigen::Index i = 0; i < p.size(); ++i) out << p(i) << '\n';
}

Network Network::load(std::istream& in) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "dcem-network" || version != 1) {
    throw std::runtime_error("not a dcem-network v1 checkpoint");
  }
  std::size_t input_dim = 0;
  if (!(in >> tag >> input_dim) || tag != "input") throw std::runtime_error("missing input line");
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  std::istringstream hs(line);
  hs >> tag;
  if (tag != "hidden") throw std::runtime_error("missing hidden line");
  std::vector<std::size_t> hidden;
  for (std::size_t h; hs >> h;) hidden.push_back(h);
  Network net(input_dim, hidden, 0);
  Eigen::VectorXd shift(static_cast<Eigen::Index>(input_dim));
  Eigen::VectorXd scale(static_cast<Eigen::Index>(input_dim));
  for (std::size_t i = 0; i < input_dim; ++i) {
    if (!(in >> shift(static_cast<Eigen::Index>(i)) >> scale(static_cast<Eigen::Index>(i)))) {
      throw std::runtime_error("truncated input transform");
    }
  }
  net.set_input_transform(shift, scale);
  std::size_t count = 0;
  if (!(in >> tag >> count) || tag != "params" || count != net.parameter_count()) {
    throw std::runtime_error("parameter count does not match architecture");
  }
  Eigen::VectorXd p(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(in >> p(i))) throw std::runtime_error("truncated parameter list");
  }
  net.set_parameters(p);
  return net;
}

// ---------------------------------------------------------------------------
// Objectives

BceObjective::BceObjective(std::vector<double> targets, std::vector<double> weights)
    : targets_(std::move(targets)), weights_(std::move(weights)) {
  if (!weights_.empty() && weights_.size() != targets_.size()) {
    throw std::invalid_argument("targets and weights differ in length");
  }
  for (double q : targets_) {
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("soft target outside [0,1]");
  }
  for (double w : weights_) {
    if (!(w >= 0.0)) throw std::invalid_argument("negative example weight");
  }
}

double BceObjective::evaluate(const Eigen::VectorXd& logits, Eigen::VectorXd* grad) const {
  const Eigen::Index n = logits.size();
  if (static_cast<std::size_t>(n) != targets_.size()) {
    throw std::invalid_argument("logit count does not match objective size");
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  if (grad) grad->resize(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = weights_.empty() ? 1.0 : weights_[static_cast<std::size_t>(i)];
    const double q = targets_[static_cast<std::size_t>(i)];
    const double raw = logistic(logits(i));
    const double p = clamp_prob(raw);
    total += bce(q, p, w);
    if (grad) (*grad)(i) = (raw == p) ? w * (p - q) * inv_n : 0.0;
  }
  return total * inv_n;
}

// ---------------------------------------------------------------------------
// Training

namespace {

// Buffers are reused across epochs; reallocating activation-sized matrices
// every step costs more than the products themselves.
struct Workspace {
  const Eigen::MatrixXd* input = nullptr;
  std::vector<Eigen::MatrixXd> pre;   // pre-activations per layer
  std::vector<Eigen::MatrixXd> post;  // post[l] = input to layer l (l >= 1)
  Eigen::MatrixXd delta, up;

  const Eigen::MatrixXd& layer_input(std::size_t l) const { return l == 0 ? *input : post[l]; }
};

Eigen::VectorXd forward_cached(const Network& net, const Eigen::MatrixXd& x0, Workspace& ws) {
  const auto& layers = net.layers();
  ws.input = &x0;
  ws.pre.resize(layers.size());
  ws.post.resize(layers.size());
  const Eigen::Index n = x0.cols();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    auto& pre = ws.pre[l];
    pre.resize(layer.weight.rows(), n);
    if (layer.weight.cols() <= 4) {
      // Narrow inputs: a direct loop beats a rank-2 GEMM.
      const Eigen::MatrixXd& in = ws.layer_input(l);
      for (Eigen::Index c = 0; c < n; ++c) {
        pre.col(c) = layer.bias;
        for (Eigen::Index k = 0; k < layer.weight.cols(); ++k) {
          pre.col(c) += layer.weight.col(k) * in(k, c);
        }
      }
    } else {
      pre.noalias() = layer.weight * ws.layer_input(l);
      pre.colwise() += layer.bias;
    }
    if (l + 1 < layers.size()) {
      ws.post[l + 1].resize(pre.rows(), n);
      ws.post[l + 1] = pre.cwiseMax(0.0);
    }
  }
  return ws.pre.back().row(0).transpose();
}

// Gradients laid out like the layers.
void backward(const Network& net, Workspace& ws, const Eigen::VectorXd& dlogits,
              std::vector<DenseLayer>& grads) {
  const auto& layers = net.layers();
  grads.resize(layers.size());
  const std::size_t last = layers.size() - 1;
  const Eigen::MatrixXd& top = ws.layer_input(last);
  grads[last].weight.noalias() = dlogits.transpose() * top.transpose();
  grads[last].bias.resize(1);
  grads[last].bias(0) = dlogits.sum();
  if (last == 0) return;

  // Output layer has a single unit: its back-projection is an outer product.
  const Eigen::Index n = dlogits.size();
  const Eigen::VectorXd w_out = layers[last].weight.row(0).transpose();
  ws.delta.resize(w_out.size(), n);
  const auto& pre_top = ws.pre[last - 1];
  for (Eigen::Index c = 0; c < n; ++c) {
    const double g = dlogits(c);
    for (Eigen::Index r = 0; r < w_out.size(); ++r) {
      ws.delta(r, c) = pre_top(r, c) > 0.0 ? w_out(r) * g : 0.0;
    }
  }
  for (std::size_t l = last; l-- > 0;) {
    grads[l].weight.noalias() = ws.delta * ws.layer_input(l).transpose();
    grads[l].bias = ws.delta.rowwise().sum();
    if (l == 0) break;
    ws.up.resize(layers[l].weight.cols(), n);
    ws.up.noalias() = layers[l].weight.transpose() * ws.delta;
    const auto& pre = ws.pre[l - 1];
    ws.up.array() *= (pre.array() > 0.0).cast<double>();
    std::swap(ws.delta, ws.up);
  }
}

}  // namespace

class Trainer {
 public:
  static Eigen::MatrixXd transformed(const Network& net, const Eigen::MatrixXd& inputs) {
    return net.transform(inputs);
  }
};

double loss_and_gradient(const Network& net, const Eigen::MatrixXd& inputs,
                         const Objective& objective, Eigen::VectorXd* grad) {
  Workspace ws;
  const Eigen::MatrixXd x0 = Trainer::transformed(net, inputs);
  const Eigen::VectorXd z = forward_cached(net, x0, ws);
  if (!grad) return objective.evaluate(z, nullptr);
  Eigen::VectorXd dz;
  const double loss = objective.evaluate(z, &dz);
  std::vector<DenseLayer> grads;
  backward(net, ws, dz, grads);
  grad->resize(static_cast<Eigen::Index>(net.parameter_count()));
  Eigen::Index k = 0;
  for (const auto& g : grads) {
    grad->segment(k, g.weight.size()) = g.weight.reshaped();
    k += g.weight.size();
    grad->segment(k, g.bias.size()) = g.bias;
    k += g.bias.size();
  }
  return loss;
}

TrainResult train(Network net, const Eigen::MatrixXd& inputs, const Objective& objective,
                  const TrainConfig& cfg, std::optional<Holdout> holdout) {
  if (inputs.cols() == 0) throw std::invalid_argument("empty training set");
  if (static_cast<std::size_t>(inputs.cols()) != objective.size()) {
    throw std::invalid_argument("inputs and objective differ in length");
  }
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (cfg.epochs <= 0) throw std::invalid_argument("epochs must be positive");

  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kAdamEps = 1e-8;

  const Eigen::MatrixXd x0 = Trainer::transformed(net, inputs);
  Eigen::MatrixXd val_x0;
  if (holdout) val_x0 = Trainer::transformed(net, holdout->inputs);

  auto& layers = net.layers();
  std::vector<DenseLayer> m(layers.size()), v(layers.size()), grads;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    m[l] = {Eigen::MatrixXd::Zero(layers[l].weight.rows(), layers[l].weight.cols()),
            Eigen::VectorXd::Zero(layers[l].bias.size())};
    v[l] = m[l];
  }

  TrainResult result;
  result.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
  const bool early_stop = holdout && cfg.patience.has_value();
  double best_val = std::numeric_limits<double>::infinity();
  Network best;
  int since_best = 0;

  Workspace ws, vws;
  Eigen::VectorXd dz;
  double beta1_pow = 1.0, beta2_pow = 1.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Eigen::VectorXd z = forward_cached(net, x0, ws);
    const double loss = objective.evaluate(z, &dz);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch));
    }
    result.loss_history.push_back(loss);
    backward(net, ws, dz, grads);

    beta1_pow *= kBeta1;
    beta2_pow *= kBeta2;
    const double step = cfg.learning_rate / (1.0 - beta1_pow);
    const double v_corr = 1.0 / (1.0 - beta2_pow);
    auto update = [&](auto& param, auto& grad, auto& mom, auto& vel) {
      if (cfg.weight_decay > 0.0) grad += cfg.weight_decay * param;
      mom = kBeta1 * mom + (1.0 - kBeta1) * grad;
      vel = kBeta2 * vel + (1.0 - kBeta2) * grad.cwiseAbs2();
      param.array() -= step * mom.array() / ((vel.array() * v_corr).sqrt() + kAdamEps);
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
      update(layers[l].weight, grads[l].weight, m[l].weight, v[l].weight);
      update(layers[l].bias, grads[l].bias, m[l].bias, v[l].bias);
    }

    if (holdout) {
      const double val = holdout->objective.evaluate(forward_cached(net, val_x0, vws), nullptr);
      result.val_history.push_back(val);
      if (val < best_val) {
        best_val = val;
        best = net;
        result.best_epoch = epoch;
        since_best = 0;
      } else if (early_stop && ++since_best >= *cfg.patience) {
        break;
      }
    }
  }
  if (early_stop && result.best_epoch >= 0) {
    result.net = std::move(best);
  } else {
    result.net = std::move(net);
  }
  return result;
}

TrainResult train(Network net, const Eigen::MatrixXd& inputs, std::vector<double> targets,
                  std::vector<double> weights, const TrainConfig& cfg,
                  std::optional<Holdout> holdout) {
  const BceObjective objective(std::move(targets), std::move(weights));
  return train(std::move(net), inputs, objective, cfg, holdout);
}

void fit_input_transform(Network& net, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() == 0) throw std::invalid_argument("cannot fit transform on empty inputs");
  const Eigen::VectorXd mean = inputs.rowwise().mean();
  Eigen::VectorXd scale(mean.size());
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
    const double var = (inputs.row(r).array() - mean(r)).square().mean();
    scale(r) = var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
  }
  net.set_input_transform(mean, scale);
}

Network make_network(const Eigen::MatrixXd& inputs, const TrainConfig& cfg) {
  Network net(static_cast<std::size_t>(inputs.rows()), cfg.hidden, cfg.seed);
  if (cfg.standardize_inputs) fit_input_transform(net, inputs);
  return net;
}

}  // namespace dcem
