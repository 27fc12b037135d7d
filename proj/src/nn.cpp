#include "eli/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eli/error.hpp"

namespace eli {

Adam::Adam(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

void Adam::step(const std::vector<ParamRef>& params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
      v_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
    }
  }
  if (m_.size() != params.size()) throw InvalidArgument("Adam: parameter list changed");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& g = *params[k].grad;
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * g;
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * g.cwiseProduct(g);
    params[k].value->array() -=
        lr_ * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + eps_);
    g.setZero();
  }
}

void zero_grads(const std::vector<ParamRef>& params) {
  for (const auto& p : params) p.grad->setZero();
}

void scale_grads(const std::vector<ParamRef>& params, double factor) {
  for (const auto& p : params) *p.grad *= factor;
}

void glorot_init(Matrix& m, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-limit, limit);
  }
}

Vector softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp();
  return e / e.sum();
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// LSTM ------------------------------------------------------------------------

Lstm::Lstm(std::size_t input, std::size_t hidden) : input_(input), hidden_(hidden) {
  const auto h = static_cast<Eigen::Index>(hidden);
  weights = Matrix::Zero(4 * h, static_cast<Eigen::Index>(input + hidden));
  bias = Matrix::Zero(4 * h, 1);
  grad_weights = Matrix::Zero(weights.rows(), weights.cols());
  grad_bias = Matrix::Zero(bias.rows(), 1);
}

void Lstm::init(Rng& rng) {
  glorot_init(weights, rng);
  bias.setZero();
  // Forget gate starts open.
  const auto h = static_cast<Eigen::Index>(hidden_);
  bias.block(h, 0, h, 1).setOnes();
}

std::vector<ParamRef> Lstm::params(const std::string& prefix) {
  return {{prefix + "weights", &weights, &grad_weights}, {prefix + "bias", &bias, &grad_bias}};
}

Matrix Lstm::forward(const Matrix& inputs, Cache* cache) const {
  const auto T = inputs.rows();
  const auto D = static_cast<Eigen::Index>(input_);
  const auto H = static_cast<Eigen::Index>(hidden_);
  if (inputs.cols() != D) throw InvalidArgument("LSTM input width mismatch");

  Matrix hidden(T, H);
  Vector h = Vector::Zero(H);
  Vector c = Vector::Zero(H);
  Vector xh(D + H);
  if (cache != nullptr) {
    cache->inputs.resize(T, D + H);
    cache->gates.resize(T, 4 * H);
    cache->cells.resize(T, H);
    cache->cells_prev.resize(T, H);
  }
  for (Eigen::Index t = 0; t < T; ++t) {
    xh.head(D) = inputs.row(t).transpose();
    xh.tail(H) = h;
    Vector z = weights * xh + bias.col(0);
    for (Eigen::Index k = 0; k < H; ++k) {
      z(k) = sigmoid(z(k));
      z(H + k) = sigmoid(z(H + k));
      z(2 * H + k) = std::tanh(z(2 * H + k));
      z(3 * H + k) = sigmoid(z(3 * H + k));
    }
    if (cache != nullptr) {
      cache->inputs.row(t) = xh.transpose();
      cache->cells_prev.row(t) = c.transpose();
    }
    c = z.segment(H, H).cwiseProduct(c) + z.head(H).cwiseProduct(z.segment(2 * H, H));
    h = z.tail(H).cwiseProduct(c.array().tanh().matrix());
    hidden.row(t) = h.transpose();
    if (cache != nullptr) {
      cache->gates.row(t) = z.transpose();
      cache->cells.row(t) = c.transpose();
    }
  }
  if (cache != nullptr) cache->hidden = hidden;
  return hidden;
}

void Lstm::backward(const Cache& cache, const Matrix& d_hidden) {
  const auto T = d_hidden.rows();
  const auto D = static_cast<Eigen::Index>(input_);
  const auto H = static_cast<Eigen::Index>(hidden_);
  Vector dh_next = Vector::Zero(H);
  Vector dc_next = Vector::Zero(H);
  Vector dz(4 * H);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const Vector gates = cache.gates.row(t).transpose();
    const Vector c = cache.cells.row(t).transpose();
    const Vector c_prev = cache.cells_prev.row(t).transpose();
    const Vector tanh_c = c.array().tanh();
    const Vector dh = d_hidden.row(t).transpose() + dh_next;

    const auto i = gates.head(H);
    const auto f = gates.segment(H, H);
    const auto g = gates.segment(2 * H, H);
    const auto o = gates.tail(H);

    const Vector dc = dh.cwiseProduct(o).cwiseProduct((1.0 - tanh_c.array().square()).matrix()) +
                      dc_next;
    dz.head(H) = dc.cwiseProduct(g).cwiseProduct(i.cwiseProduct((1.0 - i.array()).matrix()));
    dz.segment(H, H) =
        dc.cwiseProduct(c_prev).cwiseProduct(f.cwiseProduct((1.0 - f.array()).matrix()));
    dz.segment(2 * H, H) = dc.cwiseProduct(i).cwiseProduct((1.0 - g.array().square()).matrix());
    dz.tail(H) = dh.cwiseProduct(tanh_c).cwiseProduct(o.cwiseProduct((1.0 - o.array()).matrix()));

    grad_weights.noalias() += dz * cache.inputs.row(t);
    grad_bias.col(0) += dz;
    dh_next = weights.rightCols(H).transpose() * dz;
    dc_next = dc.cwiseProduct(f);
  }
  (void)D;
}

Matrix BiLstm::forward(const Matrix& inputs, Cache* cache) const {
  const Matrix reversed = inputs.colwise().reverse();
  const Matrix hf = fwd_.forward(inputs, cache ? &cache->fwd : nullptr);
  const Matrix hb = bwd_.forward(reversed, cache ? &cache->bwd : nullptr).colwise().reverse();
  Matrix out(inputs.rows(), hf.cols() + hb.cols());
  out << hf, hb;
  return out;
}

void BiLstm::backward(const Cache& cache, const Matrix& d_output) {
  const auto H = static_cast<Eigen::Index>(fwd_.hidden());
  fwd_.backward(cache.fwd, d_output.leftCols(H));
  const Matrix d_bwd = d_output.rightCols(H).colwise().reverse();
  bwd_.backward(cache.bwd, d_bwd);
}

void BiLstm::init(Rng& rng) {
  fwd_.init(rng);
  bwd_.init(rng);
}

std::vector<ParamRef> BiLstm::params() {
  auto p = fwd_.params("lstm_fwd.");
  auto b = bwd_.params("lstm_bwd.");
  p.insert(p.end(), b.begin(), b.end());
  return p;
}

// Linear head ----------------------------------------------------------------------

LinearHead::LinearHead(std::size_t input, std::size_t outputs, double input_scale)
    : weights(Matrix::Zero(static_cast<Eigen::Index>(outputs), static_cast<Eigen::Index>(input))),
      bias(Matrix::Zero(static_cast<Eigen::Index>(outputs), 1)),
      grad_weights(Matrix::Zero(weights.rows(), weights.cols())),
      grad_bias(Matrix::Zero(bias.rows(), 1)),
      input_scale_(input_scale) {
  if (outputs == 0 || input == 0) throw InvalidArgument("LinearHead needs positive sizes");
}

Vector LinearHead::logits(const Vector& x) const {
  if (x.size() != weights.cols()) throw InvalidArgument("LinearHead input width mismatch");
  return weights * (input_scale_ * x) + bias.col(0);
}

Vector LinearHead::probabilities(const Vector& x) const {
  const Vector z = logits(x);
  if (z.size() == 1) return Vector::Constant(1, sigmoid(z(0)));
  return softmax(z);
}

double LinearHead::accumulate(const Vector& x, std::size_t label) {
  const Vector z = logits(x);
  Vector dz;
  double loss;
  if (z.size() == 1) {
    const double p = sigmoid(z(0));
    const double y = label == 0 ? 0.0 : 1.0;
    loss = -(y * std::log(std::max(p, 1e-300)) + (1 - y) * std::log(std::max(1 - p, 1e-300)));
    dz = Vector::Constant(1, p - y);
  } else {
    dz = softmax(z);
    loss = -std::log(std::max(dz(static_cast<Eigen::Index>(label)), 1e-300));
    dz(static_cast<Eigen::Index>(label)) -= 1.0;
  }
  grad_weights.noalias() += dz * (input_scale_ * x).transpose();
  grad_bias.col(0) += dz;
  return loss;
}

void LinearHead::init(Rng& rng) {
  glorot_init(weights, rng);
  bias.setZero();
}

std::vector<ParamRef> LinearHead::params(const std::string& prefix) {
  return {{prefix + "weights", &weights, &grad_weights}, {prefix + "bias", &bias, &grad_bias}};
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_dev_split(
    std::size_t n, double dev_fraction, std::uint64_t seed) {
  if (dev_fraction < 0.0 || dev_fraction >= 1.0) throw InvalidArgument("dev fraction must be in [0, 1)");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  auto dev_n = static_cast<std::size_t>(std::llround(static_cast<double>(n) * dev_fraction));
  if (dev_fraction > 0.0 && n >= 2) dev_n = std::max<std::size_t>(dev_n, 1);
  if (n > 0) dev_n = std::min(dev_n, n - 1);
  std::vector<std::size_t> dev(order.begin(), order.begin() + static_cast<long>(dev_n));
  std::vector<std::size_t> train(order.begin() + static_cast<long>(dev_n), order.end());
  std::sort(dev.begin(), dev.end());
  std::sort(train.begin(), train.end());
  return {train, dev};
}

HeadTrainResult train_linear_head(const std::vector<Vector>& train_x,
                                  const std::vector<std::size_t>& train_y, std::size_t outputs,
                                  double input_scale, const HeadTrainConfig& config,
                                  const std::function<double(const LinearHead&)>& dev_score) {
  if (train_x.empty()) throw InvalidArgument("no training samples");
  if (train_x.size() != train_y.size()) throw InvalidArgument("samples and labels differ in size");
  Rng rng(config.seed);
  LinearHead head(static_cast<std::size_t>(train_x.front().size()), outputs, input_scale);
  head.init(rng);
  Adam adam(config.learning_rate);
  const auto params = head.params("");

  HeadTrainResult result;
  result.head = head;
  result.best_dev_score = -1.0;
  std::vector<std::size_t> order(train_x.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t stale = 0;
  const std::size_t batch = std::max<std::size_t>(1, config.batch_size);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::size_t end = std::min(order.size(), b + batch);
      for (std::size_t k = b; k < end; ++k) head.accumulate(train_x[order[k]], train_y[order[k]]);
      scale_grads(params, 1.0 / static_cast<double>(end - b));
      adam.step(params);
    }
    result.epochs_run = epoch + 1;
    const double score = dev_score(head);
    if (score > result.best_dev_score) {
      result.best_dev_score = score;
      result.best_epoch = epoch + 1;
      result.head = head;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  return result;
}

}  // namespace eli
