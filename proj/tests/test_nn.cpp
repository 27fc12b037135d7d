#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "eli/error.hpp"
#include "eli/nn.hpp"

using namespace eli;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

}  // namespace

TEST_CASE("softmax and sigmoid") {
  Vector v(3);
  v << 1.0, 2.0, 3.0;
  const Vector p = softmax(v);
  CHECK(p.sum() == doctest::Approx(1.0));
  CHECK(p[2] > p[1]);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  CHECK(p[0] == doctest::Approx(std::exp(1.0) / z).epsilon(1e-14));
  Vector big(2);
  big << 1000.0, 0.0;
  CHECK(softmax(big)[0] == doctest::Approx(1.0));
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) <= 1.0);
}

TEST_CASE("Adam minimizes a quadratic") {
  Matrix w = Matrix::Constant(2, 1, 5.0);
  Matrix g = Matrix::Zero(2, 1);
  Adam adam(0.1);
  for (int k = 0; k < 500; ++k) {
    g = 2.0 * w;
    adam.step({{"w", &w, &g}});
    CHECK(g.isZero());
  }
  CHECK(w.norm() < 1e-2);
}

TEST_CASE("LSTM gradient agrees with central differences") {
  Rng rng(3);
  BiLstm lstm(4, 3);
  lstm.init(rng);
  const Matrix x = random_matrix(5, 4, rng);
  const Matrix target = random_matrix(5, 6, rng);
  auto loss = [&] {
    const Matrix h = lstm.forward(x, nullptr);
    return 0.5 * (h - target).squaredNorm();
  };
  BiLstm::Cache cache;
  const Matrix h = lstm.forward(x, &cache);
  auto params = lstm.params();
  zero_grads(params);
  lstm.backward(cache, h - target);
  const double step = 1e-5;
  for (const auto& p : params) {
    for (Eigen::Index i = 0; i < p.value->size(); ++i) {
      double& w = p.value->data()[i];
      const double saved = w;
      w = saved + step;
      const double up = loss();
      w = saved - step;
      const double down = loss();
      w = saved;
      CHECK(std::abs(p.grad->data()[i] - (up - down) / (2 * step)) < 1e-7);
    }
  }
}

TEST_CASE("linear head gradient and probabilities") {
  Rng rng(9);
  for (std::size_t outputs : {1u, 3u}) {
    LinearHead head(4, outputs, 2.0);
    head.init(rng);
    Vector x(4);
    x << 0.3, -0.2, 0.5, 0.1;
    const Vector p = head.probabilities(x);
    if (outputs == 1) {
      CHECK(p.size() == 1);
      CHECK(p[0] == doctest::Approx(sigmoid(head.logits(x)[0])));
    } else {
      CHECK(p.sum() == doctest::Approx(1.0));
    }
    auto params = head.params("h");
    zero_grads(params);
    const std::size_t label = outputs == 1 ? 1 : 2;
    head.accumulate(x, label);
    LinearHead probe = head;
    const double step = 1e-6;
    for (Eigen::Index i = 0; i < head.weights.size(); ++i) {
      probe.weights = head.weights;
      probe.weights.data()[i] += step;
      const double up = probe.accumulate(x, label);
      probe.weights.data()[i] -= 2 * step;
      const double down = probe.accumulate(x, label);
      CHECK(head.grad_weights.data()[i] == doctest::Approx((up - down) / (2 * step)).epsilon(1e-5));
    }
  }
}

TEST_CASE("train/dev split") {
  const auto [train, dev] = train_dev_split(100, 0.1, 7);
  CHECK(dev.size() == 10);
  CHECK(train.size() == 90);
  CHECK(std::is_sorted(train.begin(), train.end()));
  std::vector<std::size_t> all = train;
  all.insert(all.end(), dev.begin(), dev.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> want(100);
  std::iota(want.begin(), want.end(), 0);
  CHECK(all == want);
  CHECK(train_dev_split(100, 0.1, 7) == train_dev_split(100, 0.1, 7));
  CHECK(train_dev_split(3, 0.01, 1).second.size() == 1);
  CHECK(train_dev_split(1, 0.5, 1).second.empty());
  CHECK(train_dev_split(10, 0.0, 1).second.empty());
  CHECK_THROWS_AS(train_dev_split(10, 1.0, 1), InvalidArgument);
}

TEST_CASE("linear head training is deterministic and keeps the best epoch") {
  Rng rng(1);
  std::vector<Vector> xs;
  std::vector<std::size_t> ys;
  for (int k = 0; k < 200; ++k) {
    Vector x(2);
    x << rng.uniform(-1, 1), rng.uniform(-1, 1);
    xs.push_back(x);
    ys.push_back(x[0] + x[1] > 0 ? 1 : 0);
  }
  auto accuracy = [&](const LinearHead& h) {
    double hits = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) hits += (h.probabilities(xs[k])[0] >= 0.5) == (ys[k] == 1);
    return hits / static_cast<double>(xs.size());
  };
  HeadTrainConfig cfg;
  cfg.learning_rate = 0.05;
  const auto a = train_linear_head(xs, ys, 1, 1.0, cfg, accuracy);
  const auto b = train_linear_head(xs, ys, 1, 1.0, cfg, accuracy);
  CHECK(a.head.weights == b.head.weights);
  CHECK(a.best_dev_score == b.best_dev_score);
  CHECK(a.best_dev_score >= 0.95);
  CHECK(accuracy(a.head) == a.best_dev_score);
  CHECK(a.epochs_run <= cfg.epochs);
}
