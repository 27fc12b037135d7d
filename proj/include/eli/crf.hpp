#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "eli/corpus.hpp"

namespace eli {

using Matrix = Eigen::MatrixXd;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Tag indices of the joint intervention/outcome BIO scheme.
enum Tag : std::size_t { kO = 0, kBInt = 1, kIInt = 2, kBOut = 3, kIOut = 4 };
inline constexpr std::size_t kNumTags = 5;

/// Labels plus an allowed-transition mask over labels + virtual START/STOP.
/// Row = previous state, column = next state; START is index `size()`,
/// STOP is `size() + 1`.
class TagSet {
 public:
  /// The five-label BIO set: I-X may only follow B-X or I-X.
  static TagSet bio();
  /// Arbitrary label set with a caller-provided (L+2)x(L+2) mask.
  TagSet(std::vector<std::string> labels, BoolMatrix mask);

  const std::vector<std::string>& labels() const { return labels_; }
  const BoolMatrix& transition_mask() const { return mask_; }
  std::size_t size() const { return labels_.size(); }
  std::size_t start() const { return labels_.size(); }
  std::size_t stop() const { return labels_.size() + 1; }
  bool allowed(std::size_t from, std::size_t to) const { return mask_(from, to); }

 private:
  std::vector<std::string> labels_;
  BoolMatrix mask_;
};

/// Whether a label sequence uses only allowed transitions (incl. START/STOP).
/// The empty sequence is always allowed.
bool respects_mask(const BoolMatrix& mask, const std::vector<std::size_t>& labels);

/// Unnormalized path score; masks are not consulted.
double sequence_score(const Matrix& emissions, const Matrix& transitions,
                      const std::vector<std::size_t>& labels);

/// log p(gold) under the masked linear-chain CRF. Throws InvalidArgument if
/// gold breaks the mask or shapes disagree.
double crf_log_likelihood(const Matrix& emissions, const Matrix& transitions,
                          const BoolMatrix& mask, const std::vector<std::size_t>& gold);

struct CrfLoss {
  double nll = 0.0;
  Matrix d_emissions;    // T x L
  Matrix d_transitions;  // (L+2) x (L+2)
};

/// Negative log-likelihood with its gradient via forward-backward.
CrfLoss crf_nll_and_gradient(const Matrix& emissions, const Matrix& transitions,
                             const BoolMatrix& mask, const std::vector<std::size_t>& gold);

/// Highest-scoring mask-respecting sequence. Backpointer and final-state ties
/// go to the lowest label index. Empty emissions give an empty sequence.
std::vector<std::size_t> viterbi_decode(const Matrix& emissions, const Matrix& transitions,
                                        const BoolMatrix& mask);

struct LabeledSpan {
  TokenSpan span;
  EntityType etype = EntityType::Intervention;
  friend bool operator==(const LabeledSpan&, const LabeledSpan&) = default;
  friend auto operator<=>(const LabeledSpan&, const LabeledSpan&) = default;
};

/// Maximal B/I runs of the BIO tag set. A stray I-X opens a new span as if
/// it were B-X.
std::vector<LabeledSpan> decode_spans(const std::vector<std::size_t>& labels);

/// Inverse of decode_spans for non-overlapping spans.
std::vector<std::size_t> encode_spans_to_bio(const std::vector<LabeledSpan>& spans,
                                             std::size_t length);

}  // namespace eli
