#include "eli/crf.hpp"

#include <cmath>
#include <limits>

#include "eli/error.hpp"

namespace eli {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

void check_shapes(const Matrix& emissions, const Matrix& transitions, const BoolMatrix& mask) {
  const auto labels = emissions.cols();
  if (transitions.rows() != labels + 2 || transitions.cols() != labels + 2) {
    throw InvalidArgument("transition matrix must be (labels+2) square");
  }
  if (mask.rows() != labels + 2 || mask.cols() != labels + 2) {
    throw InvalidArgument("transition mask must be (labels+2) square");
  }
}

struct Lattice {
  Matrix alpha;  // T x L, log forward scores
  Matrix beta;   // T x L, log backward scores
  double log_z = kNegInf;
};

Lattice forward_backward(const Matrix& e, const Matrix& tr, const BoolMatrix& mask) {
  const auto T = e.rows();
  const auto L = e.cols();
  const auto start = L;
  const auto stop = L + 1;
  Lattice lat;
  lat.alpha = Matrix::Constant(T, L, kNegInf);
  lat.beta = Matrix::Constant(T, L, kNegInf);

  for (Eigen::Index j = 0; j < L; ++j) {
    if (mask(start, j)) lat.alpha(0, j) = tr(start, j) + e(0, j);
  }
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index j = 0; j < L; ++j) {
      double acc = kNegInf;
      for (Eigen::Index i = 0; i < L; ++i) {
        if (mask(i, j)) acc = log_add(acc, lat.alpha(t - 1, i) + tr(i, j));
      }
      if (acc != kNegInf) lat.alpha(t, j) = acc + e(t, j);
    }
  }
  for (Eigen::Index i = 0; i < L; ++i) {
    if (mask(i, stop)) lat.beta(T - 1, i) = tr(i, stop);
  }
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    for (Eigen::Index i = 0; i < L; ++i) {
      double acc = kNegInf;
      for (Eigen::Index j = 0; j < L; ++j) {
        if (mask(i, j)) acc = log_add(acc, tr(i, j) + e(t + 1, j) + lat.beta(t + 1, j));
      }
      lat.beta(t, i) = acc;
    }
  }
  for (Eigen::Index j = 0; j < L; ++j) {
    lat.log_z = log_add(lat.log_z, lat.alpha(T - 1, j) + lat.beta(T - 1, j));
  }
  if (lat.log_z == kNegInf) throw InvalidArgument("no label sequence satisfies the transition mask");
  return lat;
}

void check_gold(const Matrix& emissions, const BoolMatrix& mask,
                const std::vector<std::size_t>& gold) {
  if (gold.size() != static_cast<std::size_t>(emissions.rows())) {
    throw InvalidArgument("gold sequence length does not match emissions");
  }
  if (gold.empty()) throw InvalidArgument("CRF likelihood needs a non-empty sequence");
  for (auto g : gold) {
    if (g >= static_cast<std::size_t>(emissions.cols())) throw InvalidArgument("gold label out of range");
  }
  if (!respects_mask(mask, gold)) throw InvalidArgument("gold sequence violates the transition mask");
}

}  // namespace

TagSet::TagSet(std::vector<std::string> labels, BoolMatrix mask)
    : labels_(std::move(labels)), mask_(std::move(mask)) {
  const auto n = static_cast<Eigen::Index>(labels_.size() + 2);
  if (mask_.rows() != n || mask_.cols() != n) {
    throw InvalidArgument("transition mask must be (labels+2) square");
  }
}

TagSet TagSet::bio() {
  std::vector<std::string> labels{"O", "B-INT", "I-INT", "B-OUT", "I-OUT"};
  const Eigen::Index n = kNumTags + 2;
  const Eigen::Index start = kNumTags;
  const Eigen::Index stop = kNumTags + 1;
  BoolMatrix mask = BoolMatrix::Constant(n, n, true);
  mask.col(start).setConstant(false);  // nothing enters START
  mask.row(stop).setConstant(false);   // nothing leaves STOP
  for (Eigen::Index from = 0; from < n; ++from) {
    mask(from, kIInt) = (from == kBInt || from == kIInt);
    mask(from, kIOut) = (from == kBOut || from == kIOut);
  }
  mask(start, stop) = false;
  return TagSet(std::move(labels), std::move(mask));
}

bool respects_mask(const BoolMatrix& mask, const std::vector<std::size_t>& labels) {
  const auto L = mask.rows() - 2;
  const auto start = L;
  const auto stop = L + 1;
  if (labels.empty()) return true;
  if (!mask(start, static_cast<Eigen::Index>(labels.front()))) return false;
  for (std::size_t t = 1; t < labels.size(); ++t) {
    if (!mask(static_cast<Eigen::Index>(labels[t - 1]), static_cast<Eigen::Index>(labels[t]))) {
      return false;
    }
  }
  return mask(static_cast<Eigen::Index>(labels.back()), stop);
}

double sequence_score(const Matrix& emissions, const Matrix& transitions,
                      const std::vector<std::size_t>& labels) {
  const auto L = emissions.cols();
  if (labels.empty()) return transitions(L, L + 1);
  double s = transitions(L, static_cast<Eigen::Index>(labels[0]));
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const auto y = static_cast<Eigen::Index>(labels[t]);
    s += emissions(static_cast<Eigen::Index>(t), y);
    if (t > 0) s += transitions(static_cast<Eigen::Index>(labels[t - 1]), y);
  }
  return s + transitions(static_cast<Eigen::Index>(labels.back()), L + 1);
}

double crf_log_likelihood(const Matrix& emissions, const Matrix& transitions,
                          const BoolMatrix& mask, const std::vector<std::size_t>& gold) {
  check_shapes(emissions, transitions, mask);
  check_gold(emissions, mask, gold);
  const Lattice lat = forward_backward(emissions, transitions, mask);
  return sequence_score(emissions, transitions, gold) - lat.log_z;
}

CrfLoss crf_nll_and_gradient(const Matrix& emissions, const Matrix& transitions,
                             const BoolMatrix& mask, const std::vector<std::size_t>& gold) {
  check_shapes(emissions, transitions, mask);
  check_gold(emissions, mask, gold);
  const auto T = emissions.rows();
  const auto L = emissions.cols();
  const auto start = L;
  const auto stop = L + 1;
  const Lattice lat = forward_backward(emissions, transitions, mask);

  CrfLoss out;
  out.nll = lat.log_z - sequence_score(emissions, transitions, gold);
  out.d_emissions = (lat.alpha + lat.beta).array() - lat.log_z;
  out.d_emissions = out.d_emissions.array().exp();
  out.d_transitions = Matrix::Zero(L + 2, L + 2);

  for (Eigen::Index j = 0; j < L; ++j) {
    out.d_transitions(start, j) = out.d_emissions(0, j);
    out.d_transitions(j, stop) = out.d_emissions(T - 1, j);
  }
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index i = 0; i < L; ++i) {
      if (lat.alpha(t - 1, i) == kNegInf) continue;
      for (Eigen::Index j = 0; j < L; ++j) {
        if (!mask(i, j)) continue;
        const double lp = lat.alpha(t - 1, i) + transitions(i, j) + emissions(t, j) +
                          lat.beta(t, j) - lat.log_z;
        out.d_transitions(i, j) += std::exp(lp);
      }
    }
  }

  for (Eigen::Index t = 0; t < T; ++t) {
    out.d_emissions(t, static_cast<Eigen::Index>(gold[static_cast<std::size_t>(t)])) -= 1.0;
  }
  out.d_transitions(start, static_cast<Eigen::Index>(gold.front())) -= 1.0;
  out.d_transitions(static_cast<Eigen::Index>(gold.back()), stop) -= 1.0;
  for (std::size_t t = 1; t < gold.size(); ++t) {
    out.d_transitions(static_cast<Eigen::Index>(gold[t - 1]), static_cast<Eigen::Index>(gold[t])) -= 1.0;
  }
  return out;
}

std::vector<std::size_t> viterbi_decode(const Matrix& emissions, const Matrix& transitions,
                                        const BoolMatrix& mask) {
  check_shapes(emissions, transitions, mask);
  const auto T = emissions.rows();
  const auto L = emissions.cols();
  if (T == 0) return {};
  const auto start = L;
  const auto stop = L + 1;

  Matrix score = Matrix::Constant(T, L, kNegInf);
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> back(T, L);
  back.setZero();
  for (Eigen::Index j = 0; j < L; ++j) {
    if (mask(start, j)) score(0, j) = transitions(start, j) + emissions(0, j);
  }
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index j = 0; j < L; ++j) {
      double best = kNegInf;
      Eigen::Index arg = -1;
      for (Eigen::Index i = 0; i < L; ++i) {
        if (!mask(i, j) || score(t - 1, i) == kNegInf) continue;
        const double s = score(t - 1, i) + transitions(i, j);
        if (arg < 0 || s > best) {
          best = s;
          arg = i;
        }
      }
      if (arg >= 0) {
        score(t, j) = best + emissions(t, j);
        back(t, j) = arg;
      }
    }
  }
  double best = kNegInf;
  Eigen::Index last = -1;
  for (Eigen::Index j = 0; j < L; ++j) {
    if (!mask(j, stop) || score(T - 1, j) == kNegInf) continue;
    const double s = score(T - 1, j) + transitions(j, stop);
    if (last < 0 || s > best) {
      best = s;
      last = j;
    }
  }
  if (last < 0) throw InvalidArgument("no label sequence satisfies the transition mask");

  std::vector<std::size_t> path(static_cast<std::size_t>(T));
  path.back() = static_cast<std::size_t>(last);
  for (Eigen::Index t = T - 1; t > 0; --t) {
    last = back(t, last);
    path[static_cast<std::size_t>(t - 1)] = static_cast<std::size_t>(last);
  }
  return path;
}

std::vector<LabeledSpan> decode_spans(const std::vector<std::size_t>& labels) {
  std::vector<LabeledSpan> spans;
  bool open = false;
  LabeledSpan current;
  auto close = [&](std::size_t end) {
    if (open) {
      current.span.end = end;
      spans.push_back(current);
      open = false;
    }
  };
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const std::size_t tag = labels[t];
    if (tag == kO || tag >= kNumTags) {
      close(t);
      continue;
    }
    const EntityType type = (tag == kBInt || tag == kIInt) ? EntityType::Intervention
                                                             : EntityType::Outcome;
    const bool inside = (tag == kIInt || tag == kIOut);
    if (inside && open && current.etype == type) continue;
    close(t);
    current = LabeledSpan{TokenSpan{t, t}, type};
    open = true;
  }
  close(labels.size());
  return spans;
}

std::vector<std::size_t> encode_spans_to_bio(const std::vector<LabeledSpan>& spans,
                                             std::size_t length) {
  std::vector<std::size_t> labels(length, kO);
  for (const auto& s : spans) {
    if (s.span.start >= s.span.end || s.span.end > length) {
      throw InvalidArgument("span out of range for BIO encoding");
    }
    const bool intervention = s.etype == EntityType::Intervention;
    for (std::size_t t = s.span.start; t < s.span.end; ++t) {
      if (labels[t] != kO) throw InvalidArgument("overlapping spans cannot be BIO encoded");
      labels[t] = t == s.span.start ? (intervention ? kBInt : kBOut)
                                    : (intervention ? kIInt : kIOut);
    }
  }
  return labels;
}

}  // namespace eli
