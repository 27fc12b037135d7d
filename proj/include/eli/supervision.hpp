#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eli/corpus.hpp"
#include "eli/encoder.hpp"
#include "eli/evidence.hpp"
#include "eli/inference.hpp"
#include "eli/linking.hpp"
#include "eli/rng.hpp"

namespace eli {

/// One prompt-style annotation: free-text arms and outcome, a direction,
/// and the character span of its supporting evidence.
struct Prompt {
  std::string doc_id;
  std::string intervention;
  std::string comparator;
  std::string outcome;
  Direction label = Direction::NoDifference;
  std::size_t evidence_start = 0;
  std::size_t evidence_end = 0;
  friend bool operator==(const Prompt&, const Prompt&) = default;
};

/// JSON-Lines `{"doc_id","i","c","o","label","evidence":[s,e]}`.
Prompt parse_prompt_line(std::string_view line, std::size_t line_no = 0);
std::string to_json_line(const Prompt& p);
std::vector<Prompt> load_prompts(const std::filesystem::path& path);
void write_prompts(std::span<const Prompt> prompts, const std::filesystem::path& path);

/// Minimum cosine similarity for a mention to join an existing entity.
struct GroupingConfig {
  double similarity_threshold = 0.8;
};

/// For each mention, the index of the most similar seed when that
/// similarity is at least `threshold` (earliest seed on ties), else
/// nullopt, meaning a new entity of its own.
std::vector<std::optional<std::size_t>> assign_mentions_to_entities(
    std::span<const Embedding> mentions, std::span<const Embedding> seeds, double threshold);

/// Mean B-cubed F1 over `dev` of the grouping induced at `threshold`.
/// Seeds are the first mention of every gold entity that takes part in a
/// relation; mentions only join seeds of their own type.
double grouping_score(std::span<const AnnotatedDocument> dev, const EncoderBackend& backend,
                      double threshold);

/// Grid value with the best grouping_score; ties go to the smallest value.
/// Throws InvalidArgument on an empty grid.
double tune_threshold(std::span<const AnnotatedDocument> dev, const EncoderBackend& backend,
                      std::span<const double> grid);

/// Evidence-classifier sampling. Positives are the sentences overlapping
/// any span (character offsets); each positive then draws the unused
/// non-positive sentence closest in token length, earliest on ties.
std::vector<std::pair<std::size_t, bool>> sample_evidence_training(
    const Document& doc, std::span<const std::pair<std::size_t, std::size_t>> evidence_spans);

/// Up to `k` UNRELATED spans for one gold (intervention, comparator) pair,
/// preferring other intervention mentions, then the compound span of the
/// adjacent pair, then random 1-4 token spans clear of the gold spans.
std::vector<TokenSpan> synthesize_linker_negatives(const AnnotatedDocument& doc,
                                                   TokenSpan gold_intervention,
                                                   std::optional<TokenSpan> gold_comparator,
                                                   Rng& rng, std::size_t k = 3);

struct TrainingSamples {
  std::vector<EvidenceSample> evidence;
  std::vector<LinkSample> link;
  std::vector<InferenceSample> infer;

  void append(TrainingSamples other);
};

/// Sidecar JSON-Lines with one `{"task": "evidence"|"link"|"infer", ...}`
/// record per sample.
void write_samples(const TrainingSamples& samples, const std::filesystem::path& path);
TrainingSamples load_samples(const std::filesystem::path& path);

struct SupervisionConfig {
  GroupingConfig grouping;
  std::size_t linker_negatives = 3;
  std::uint64_t seed = 7;
};

/// Training samples for all three heads from an annotated document.
TrainingSamples derive_samples(const AnnotatedDocument& doc, const SupervisionConfig& config);

using MentionSource = std::function<std::vector<Mention>(const Document&)>;

struct DistantCorpus {
  std::vector<AnnotatedDocument> docs;
  TrainingSamples samples;
  std::size_t skipped_prompts = 0;
  /// Prompts whose arm or outcome attracted no mention.
  std::size_t unprojected_prompts = 0;
};

/// Projects prompts onto tagged documents: mentions join the prompt entity
/// whose text they resemble, leftovers become unrelated singletons, and
/// each prompt becomes a relation on its first evidence sentence.
/// Prompts naming an unknown document are skipped with a warning.
DistantCorpus build_training_corpus(std::span<const Document> raw_docs,
                                    std::span<const Prompt> prompts,
                                    const MentionSource& mentions, const EncoderBackend& backend,
                                    const SupervisionConfig& config);

}  // namespace eli
