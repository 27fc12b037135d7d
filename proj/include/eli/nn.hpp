#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

#include "eli/rng.hpp"

namespace eli {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A named trainable array and its gradient accumulator.
struct ParamRef {
  std::string name;
  Matrix* value;
  Matrix* grad;
};

/// Adam with bias correction. Gradients are consumed and zeroed by step().
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);
  void step(const std::vector<ParamRef>& params);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

void zero_grads(const std::vector<ParamRef>& params);
void scale_grads(const std::vector<ParamRef>& params, double factor);

/// Uniform Glorot initialization using the portable Rng.
void glorot_init(Matrix& m, Rng& rng);

Vector softmax(const Vector& logits);
double sigmoid(double x);

/// Single-direction LSTM over a T x input sequence (rows are time steps).
class Lstm {
 public:
  Lstm() = default;
  Lstm(std::size_t input, std::size_t hidden);

  struct Cache {
    Matrix inputs;  // T x (D + H): [x_t; h_{t-1}]
    Matrix gates;   // T x 4H, post-activation (i, f, g, o)
    Matrix cells;   // T x H
    Matrix cells_prev;
    Matrix hidden;  // T x H
  };

  /// Returns T x H hidden states; fills `cache` for backward when non-null.
  Matrix forward(const Matrix& inputs, Cache* cache) const;
  /// Accumulates parameter gradients given dL/dh for every step.
  void backward(const Cache& cache, const Matrix& d_hidden);

  void init(Rng& rng);
  std::vector<ParamRef> params(const std::string& prefix);
  std::size_t hidden() const { return hidden_; }

  Matrix weights;  // 4H x (D + H)
  Matrix bias;     // 4H x 1
  Matrix grad_weights;
  Matrix grad_bias;

 private:
  std::size_t input_ = 0;
  std::size_t hidden_ = 0;
};

/// Forward and backward LSTMs concatenated per step: T x 2H.
class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(std::size_t input, std::size_t hidden) : fwd_(input, hidden), bwd_(input, hidden) {}

  struct Cache {
    Lstm::Cache fwd, bwd;
  };

  Matrix forward(const Matrix& inputs, Cache* cache) const;
  void backward(const Cache& cache, const Matrix& d_output);
  void init(Rng& rng);
  std::vector<ParamRef> params();

  Lstm& forward_lstm() { return fwd_; }
  Lstm& backward_lstm() { return bwd_; }
  const Lstm& forward_lstm() const { return fwd_; }
  const Lstm& backward_lstm() const { return bwd_; }

 private:
  Lstm fwd_, bwd_;
};

/// Affine layer y = W (scale * x) + b. With one output it is read as a
/// logistic logit, otherwise as softmax logits.
class LinearHead {
 public:
  LinearHead() = default;
  LinearHead(std::size_t input, std::size_t outputs, double input_scale);

  Vector logits(const Vector& x) const;
  /// Class probabilities: one sigmoid value, or a softmax distribution.
  Vector probabilities(const Vector& x) const;
  /// Adds d(loss)/d(params) for cross-entropy against `label`; returns loss.
  double accumulate(const Vector& x, std::size_t label);

  void init(Rng& rng);
  std::vector<ParamRef> params(const std::string& prefix);
  std::size_t outputs() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t inputs() const { return static_cast<std::size_t>(weights.cols()); }
  double input_scale() const { return input_scale_; }

  Matrix weights;
  Matrix bias;
  Matrix grad_weights;
  Matrix grad_bias;

 private:
  double input_scale_ = 1.0;
};

struct HeadTrainConfig {
  std::size_t epochs = 40;
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t patience = 5;
  std::uint64_t seed = 7;
};

struct HeadTrainResult {
  LinearHead head;
  double best_dev_score = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

/// Deterministic split of [0, n) into (train, dev) index lists. Takes
/// round(n * dev_fraction) items for dev, at least one when n >= 2 and the
/// fraction is positive.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_dev_split(
    std::size_t n, double dev_fraction, std::uint64_t seed);

/// Minibatch Adam on cross-entropy, keeping the parameters with the highest
/// `dev_score` (evaluated after each epoch). Deterministic given the seed.
HeadTrainResult train_linear_head(
    const std::vector<Vector>& train_x, const std::vector<std::size_t>& train_y,
    std::size_t outputs, double input_scale, const HeadTrainConfig& config,
    const std::function<double(const LinearHead&)>& dev_score);

}  // namespace eli
