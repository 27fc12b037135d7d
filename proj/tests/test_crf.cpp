#include <cmath>

#include "doctest.h"
#include "eli/crf.hpp"
#include "eli/error.hpp"
#include "eli/rng.hpp"
#include "oracles.hpp"

using namespace eli;

namespace {

BoolMatrix all_allowed(std::size_t labels) {
  BoolMatrix m = BoolMatrix::Constant(static_cast<Eigen::Index>(labels + 2), static_cast<Eigen::Index>(labels + 2), true);
  m.col(static_cast<Eigen::Index>(labels)).setConstant(false);
  m.row(static_cast<Eigen::Index>(labels + 1)).setConstant(false);
  m(static_cast<Eigen::Index>(labels), static_cast<Eigen::Index>(labels + 1)) = false;
  return m;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(-2.0, 2.0);
  }
  return m;
}

}  // namespace

TEST_CASE("BIO transition mask") {
  const TagSet t = TagSet::bio();
  REQUIRE(t.size() == kNumTags);
  CHECK(t.allowed(kBInt, kIInt));
  CHECK(t.allowed(kIInt, kIInt));
  CHECK_FALSE(t.allowed(kO, kIInt));
  CHECK_FALSE(t.allowed(kBOut, kIInt));
  CHECK_FALSE(t.allowed(t.start(), kIOut));
  CHECK(t.allowed(t.start(), kBOut));
  CHECK(t.allowed(kIOut, t.stop()));
  CHECK(t.allowed(kIInt, kBOut));
  CHECK(respects_mask(t.transition_mask(), {kBInt, kIInt, kO}));
  CHECK_FALSE(respects_mask(t.transition_mask(), {kO, kIInt}));
}

TEST_CASE("length-1 symmetric CRF gives log(1/2)") {
  const Matrix e = Matrix::Zero(1, 2);
  const Matrix t = Matrix::Zero(4, 4);
  CHECK(crf_log_likelihood(e, t, all_allowed(2), {0}) == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  CHECK(crf_log_likelihood(e, t, all_allowed(2), {1}) == doctest::Approx(std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("length-2 hand-set scores agree with explicit enumeration") {
  Matrix e(2, 2);
  e << 1.0, 0.5, -0.3, 2.0;
  Matrix t = Matrix::Zero(4, 4);
  t(0, 1) = 0.7;
  t(1, 0) = -1.2;
  t(1, 1) = 0.4;
  t(2, 0) = 0.1;  // START -> 0
  t(1, 3) = 0.3;  // 1 -> STOP
  // Paths: score(y) = t[S,y0] + e0 + t[y0,y1] + e1 + t[y1,E].
  const double s00 = 0.1 + 1.0 + 0.0 - 0.3 + 0.0;
  const double s01 = 0.1 + 1.0 + 0.7 + 2.0 + 0.3;
  const double s10 = 0.0 + 0.5 - 1.2 - 0.3 + 0.0;
  const double s11 = 0.0 + 0.5 + 0.4 + 2.0 + 0.3;
  const double z = std::log(std::exp(s00) + std::exp(s01) + std::exp(s10) + std::exp(s11));
  const auto mask = all_allowed(2);
  CHECK(crf_log_likelihood(e, t, mask, {0, 1}) == doctest::Approx(s01 - z).epsilon(1e-12));
  CHECK(crf_log_likelihood(e, t, mask, {1, 0}) == doctest::Approx(s10 - z).epsilon(1e-12));
  CHECK(sequence_score(e, t, {1, 1}) == doctest::Approx(s11).epsilon(1e-12));
}

TEST_CASE("likelihood normalizes over every allowed gold sequence") {
  Rng rng(17);
  const TagSet bio = TagSet::bio();
  for (int k = 0; k < 30; ++k) {
    const auto len = static_cast<Eigen::Index>(1 + rng.below(4));
    const Matrix e = random_matrix(len, 5, rng);
    const Matrix t = random_matrix(7, 7, rng);
    double total = 0.0;
    for (const auto& y : oracle::all_sequences(static_cast<std::size_t>(len), 5)) {
      if (respects_mask(bio.transition_mask(), y)) {
        const double ll = crf_log_likelihood(e, t, bio.transition_mask(), y);
        CHECK(ll == doctest::Approx(oracle::brute_log_likelihood(e, t, bio.transition_mask(), y)).epsilon(1e-10));
        total += std::exp(ll);
      }
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("likelihood rejects bad input") {
  const TagSet bio = TagSet::bio();
  const Matrix e = Matrix::Zero(2, 5);
  const Matrix t = Matrix::Zero(7, 7);
  CHECK_THROWS_AS(crf_log_likelihood(e, t, bio.transition_mask(), {kO, kIInt}), InvalidArgument);
  CHECK_THROWS_AS(crf_log_likelihood(e, t, bio.transition_mask(), {kO}), InvalidArgument);
  CHECK_THROWS_AS(crf_log_likelihood(e, Matrix::Zero(6, 6), bio.transition_mask(), {kO, kO}), InvalidArgument);
}

TEST_CASE("gradient agrees with central differences") {
  Rng rng(23);
  const TagSet bio = TagSet::bio();
  const Matrix e = random_matrix(4, 5, rng);
  const Matrix t = random_matrix(7, 7, rng);
  const std::vector<std::size_t> gold = {kBOut, kIOut, kO, kBInt};
  const CrfLoss loss = crf_nll_and_gradient(e, t, bio.transition_mask(), gold);
  CHECK(loss.nll == doctest::Approx(-crf_log_likelihood(e, t, bio.transition_mask(), gold)).epsilon(1e-12));
  const double h = 1e-5;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    Matrix up = e, down = e;
    up.data()[i] += h;
    down.data()[i] -= h;
    const double num = (-crf_log_likelihood(up, t, bio.transition_mask(), gold) +
                        crf_log_likelihood(down, t, bio.transition_mask(), gold)) /
                       (2 * h);
    CHECK(loss.d_emissions.data()[i] == doctest::Approx(num).epsilon(1e-6));
  }
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    Matrix up = t, down = t;
    up.data()[i] += h;
    down.data()[i] -= h;
    const double num = (-crf_log_likelihood(e, up, bio.transition_mask(), gold) +
                        crf_log_likelihood(e, down, bio.transition_mask(), gold)) /
                       (2 * h);
    CHECK(std::abs(loss.d_transitions.data()[i] - num) < 1e-7);
  }
}

TEST_CASE("Viterbi examples") {
  const TagSet bio = TagSet::bio();
  const Matrix t = Matrix::Zero(7, 7);
  Matrix e1 = Matrix::Zero(1, 5);
  e1(0, kO) = 3.0;
  CHECK(viterbi_decode(e1, t, bio.transition_mask()) == std::vector<std::size_t>{kO});

  Rng rng(31);
  for (int k = 0; k < 20; ++k) {
    const Matrix e = random_matrix(3, 5, rng);
    const Matrix tr = random_matrix(7, 7, rng);
    CHECK(viterbi_decode(e, tr, all_allowed(5)) == oracle::brute_viterbi(e, tr, all_allowed(5)));
  }

  // Emissions prefer [O, I-INT], which the mask forbids.
  Matrix e2 = Matrix::Zero(2, 5);
  e2(0, kO) = 5.0;
  e2(1, kIInt) = 5.0;
  const auto path = viterbi_decode(e2, t, bio.transition_mask());
  CHECK(path == oracle::brute_viterbi(e2, t, bio.transition_mask()));
  CHECK(respects_mask(bio.transition_mask(), path));
  CHECK(path[1] != kIInt);

  CHECK(viterbi_decode(Matrix::Zero(0, 5), t, bio.transition_mask()).empty());
}

TEST_CASE("Viterbi ties go to the lowest label") {
  const Matrix e = Matrix::Zero(3, 3);
  const Matrix t = Matrix::Zero(5, 5);
  CHECK(viterbi_decode(e, t, all_allowed(3)) == std::vector<std::size_t>{0, 0, 0});
  CHECK(viterbi_decode(e, t, all_allowed(3)) == oracle::brute_viterbi(e, t, all_allowed(3)));
}

TEST_CASE("span decoding") {
  using V = std::vector<LabeledSpan>;
  CHECK(decode_spans({kBInt, kIInt, kO}) == V{{{0, 2}, EntityType::Intervention}});
  CHECK(decode_spans({kIOut, kO}) == V{{{0, 1}, EntityType::Outcome}});
  CHECK(decode_spans({kBInt, kBInt}) == V{{{0, 1}, EntityType::Intervention}, {{1, 2}, EntityType::Intervention}});
  CHECK(decode_spans({kBInt, kIOut}) == V{{{0, 1}, EntityType::Intervention}, {{1, 2}, EntityType::Outcome}});
  CHECK(decode_spans({}).empty());
}

TEST_CASE("property: BIO encoding round-trips") {
  Rng rng(41);
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = rng.below(12);
    std::vector<LabeledSpan> spans;
    std::size_t pos = 0;
    while (pos < n) {
      const std::size_t len = 1 + rng.below(3);
      if (pos + len <= n && rng.chance(0.4)) {
        spans.push_back({{pos, pos + len}, rng.chance(0.5) ? EntityType::Intervention : EntityType::Outcome});
      }
      pos += len;
    }
    const auto tags = encode_spans_to_bio(spans, n);
    CHECK(tags.size() == n);
    CHECK(respects_mask(TagSet::bio().transition_mask(), tags));
    CHECK(decode_spans(tags) == spans);
  }
}

TEST_CASE("property: masked Viterbi equals exhaustive search") {
  Rng rng(43);
  const TagSet bio = TagSet::bio();
  for (int k = 0; k < 100; ++k) {
    const auto len = static_cast<Eigen::Index>(1 + rng.below(5));
    const Matrix e = random_matrix(len, 5, rng);
    const Matrix t = random_matrix(7, 7, rng);
    const auto got = viterbi_decode(e, t, bio.transition_mask());
    CHECK(got == oracle::brute_viterbi(e, t, bio.transition_mask()));
  }
}
