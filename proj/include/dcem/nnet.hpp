#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dcem {

// Clamp applied to every probability before a logarithm is taken.
inline constexpr double kProbEps = 1e-7;

double logistic(double z);
double clamp_prob(double p);

// Binary cross-entropy with a soft target: weight * [-q ln p - (1-q) ln(1-p)],
// p clamped to [eps, 1-eps].
double bce(double target, double pred, double weight = 1.0);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

// Feedforward classifier: input -> hidden... (ReLU) -> 1 (logistic).
// An affine input transform (x - shift) * scale is applied before the first
// layer; it is fixed at construction and never trained.
class Network {
 public:
  Network() = default;
  // Fan-in uniform initialisation U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Network(std::size_t input_dim, std::vector<std::size_t> hidden, std::uint64_t seed);

  static Network zeros(std::size_t input_dim, std::vector<std::size_t> hidden);

  std::size_t input_dim() const { return input_dim_; }
  const std::vector<std::size_t>& hidden() const { return hidden_; }
  std::size_t parameter_count() const;

  void set_input_transform(Eigen::VectorXd shift, Eigen::VectorXd scale);
  const Eigen::VectorXd& input_shift() const { return shift_; }
  const Eigen::VectorXd& input_scale() const { return scale_; }

  double logit(std::span<const double> x) const;
  // Clamped probability; never exactly 0 or 1.
  double forward(std::span<const double> x) const;

  // Batched versions over the columns of `inputs` (input_dim x n).
  Eigen::VectorXd logits(const Eigen::MatrixXd& inputs) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& inputs) const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);

  bool operator==(const Network& other) const;

  // Checkpoint: architecture header followed by one float per line.
  void save(std::ostream& out) const;
  static Network load(std::istream& in);

 private:
  Eigen::MatrixXd transform(const Eigen::MatrixXd& inputs) const;

  std::size_t input_dim_ = 0;
  std::vector<std::size_t> hidden_;
  std::vector<DenseLayer> layers_;
  Eigen::VectorXd shift_;
  Eigen::VectorXd scale_;

  friend class Trainer;
};

// A differentiable training objective over per-example logits.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::size_t size() const = 0;
  // Returns the mean loss; writes d(mean loss)/d(logit_i) into `grad` when
  // non-null.
  virtual double evaluate(const Eigen::VectorXd& logits, Eigen::VectorXd* grad) const = 0;
};

// Weighted cross-entropy against soft targets, averaged over examples.
class BceObjective final : public Objective {
 public:
  BceObjective(std::vector<double> targets, std::vector<double> weights = {});
  std::size_t size() const override { return targets_.size(); }
  double evaluate(const Eigen::VectorXd& logits, Eigen::VectorXd* grad) const override;

 private:
  std::vector<double> targets_;
  std::vector<double> weights_;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  int epochs = 1000;
  std::optional<int> patience;  // early stopping, checked once per epoch
  std::uint64_t seed = 42;      // initialisation seed for fresh networks
  std::vector<std::size_t> hidden = {64, 64};
  bool standardize_inputs = true;  // see make_network
};

struct Holdout {
  const Eigen::MatrixXd& inputs;
  const Objective& objective;
};

struct TrainResult {
  Network net;
  std::vector<double> loss_history;  // training loss at the start of each epoch
  std::vector<double> val_history;   // holdout loss after each epoch's update
  int best_epoch = -1;               // 0-based; -1 without a holdout
};

// Full-batch Adam (beta1 0.9, beta2 0.999, eps 1e-8). With a holdout and
// patience, stops after `patience` epochs without improvement and returns
// the best-holdout parameters. Throws on empty data or a non-finite loss.
TrainResult train(Network net, const Eigen::MatrixXd& inputs, const Objective& objective,
                  const TrainConfig& cfg, std::optional<Holdout> holdout = std::nullopt);

TrainResult train(Network net, const Eigen::MatrixXd& inputs, std::vector<double> targets,
                  std::vector<double> weights, const TrainConfig& cfg,
                  std::optional<Holdout> holdout = std::nullopt);

// Mean objective and its gradient with respect to the flat parameter vector
// (same order as Network::parameters()).
double loss_and_gradient(const Network& net, const Eigen::MatrixXd& inputs,
                         const Objective& objective, Eigen::VectorXd* grad);

// Per-feature standardisation fitted on the columns of `inputs`; constant
// rows are only centred.
void fit_input_transform(Network& net, const Eigen::MatrixXd& inputs);

// Fresh network seeded from cfg.seed, with the input transform fitted on
// `inputs` when cfg.standardize_inputs is set.
Network make_network(const Eigen::MatrixXd& inputs, const TrainConfig& cfg);

}  // namespace dcem
