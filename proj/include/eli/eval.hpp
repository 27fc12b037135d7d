#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "eli/corpus.hpp"
#include "eli/crf.hpp"

namespace eli {

/// Precision, recall and F1 with the counts behind them. 0/0 ratios are 0.
struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  static PRF from_counts(std::size_t tp, std::size_t fp, std::size_t fn);
  /// For metrics that are not count ratios (clustering scores).
  static PRF from_scores(double precision, double recall);
};

double harmonic_f1(double precision, double recall);

struct TokenScores {
  PRF intervention;
  PRF outcome;
  PRF overall;
};

/// Per-token comparison: for each type, a token is positive when it lies in
/// a mention of that type. `overall` sums the counts of both types.
TokenScores token_prf(std::size_t num_tokens, std::span<const LabeledSpan> gold,
                      std::span<const LabeledSpan> pred);
TokenScores token_prf(std::span<const AnnotatedDocument> gold,
                      std::span<const AnnotatedDocument> pred);

std::vector<LabeledSpan> labeled_spans(std::span<const Mention> mentions);

/// Entity-level extraction: a gold entity is found when at least one of its
/// mentions matches a predicted span; every predicted span that matches no
/// mention of a gold entity is a false positive, repeats included. With
/// `partial`, any overlap of the same type counts as a match.
PRF entity_prf(const AnnotatedDocument& gold, std::span<const LabeledSpan> pred,
               bool partial = false);
PRF entity_prf(std::span<const AnnotatedDocument> gold, std::span<const AnnotatedDocument> pred,
               bool partial = false);

enum class RelationMode { Triplet, Binary };

/// A predicted tuple matches a gold relation when every grounded mention of
/// each slot is a mention of the corresponding gold entity and the
/// directions agree. Slots are grounded by their explicit span when
/// present, otherwise by all mentions of the predicted entity. Gold
/// relations are claimed greedily in descending prediction confidence.
/// Binary mode ignores comparators and collapses repeated
/// (intervention, outcome, direction) gold relations.
PRF relation_prf(const AnnotatedDocument& gold, const AnnotatedDocument& pred, RelationMode mode);
PRF relation_prf(std::span<const AnnotatedDocument> gold, std::span<const AnnotatedDocument> pred,
                 RelationMode mode);

/// Drops every comparator (and its span).
std::vector<RelationTuple> project_binary(std::span<const RelationTuple> tuples);

/// Sentence-level evidence detection.
PRF evidence_prf(std::span<const AnnotatedDocument> gold, std::span<const AnnotatedDocument> pred);

struct LinkOutcome {
  bool intervention = false;
  bool comparator = false;
  bool outcome = false;
};

struct LinkingAccuracy {
  double intervention = 0.0;
  double comparator = 0.0;
  double outcome = 0.0;
  std::size_t cases = 0;
};

/// Throws InvalidArgument for an empty list.
LinkingAccuracy linking_accuracy(std::span<const LinkOutcome> outcomes);

/// One LinkOutcome per gold relation, judged against the predicted tuples
/// attached to the same evidence sentence.
std::vector<LinkOutcome> link_outcomes(const AnnotatedDocument& gold,
                                       const AnnotatedDocument& pred);

struct DirectionScores {
  std::array<PRF, kNumDirections> per_class;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::size_t cases = 0;
};

DirectionScores direction_prf(std::span<const Direction> gold, std::span<const Direction> pred);

/// Pairs each gold relation with a predicted tuple on the same evidence
/// sentence whose intervention and outcome grounding match (direction is
/// ignored), for scoring the inference stage in isolation.
struct DirectionPairs {
  std::vector<Direction> gold;
  std::vector<Direction> pred;
  std::size_t unpaired = 0;
};
DirectionPairs pair_directions(std::span<const AnnotatedDocument> gold,
                               std::span<const AnnotatedDocument> pred);

struct ReportFlags {
  bool gold_mentions = false;
  bool gold_evidence = false;
  bool gold_links = false;
  bool partial = false;
};

/// Every metric for a prediction set, as a flat key -> value map plus a text
/// table laid out like the usual extraction / linking / inference tables.
struct Report {
  std::map<std::string, double> metrics;
  std::string table;
};

/// Predictions are matched to gold documents by doc_id; missing
/// predictions count as empty documents.
Report make_report(std::span<const AnnotatedDocument> gold, std::span<const AnnotatedDocument> pred,
                   const ReportFlags& flags);

/// Flat JSON object, keys sorted, byte-stable.
std::string metrics_json(const std::map<std::string, double>& metrics);

}  // namespace eli
