#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "eli/config.hpp"
#include "eli/corpus.hpp"
#include "eli/encoder.hpp"
#include "eli/evidence.hpp"
#include "eli/inference.hpp"
#include "eli/linking.hpp"
#include "eli/tagger.hpp"

namespace eli {

struct PipelineConfig {
  EncoderConfig encoder;
  std::filesystem::path tagger;
  std::filesystem::path evidence;
  std::filesystem::path linker;
  std::filesystem::path inference;
  double grouping_threshold = 0.8;
  double evidence_threshold = 0.5;
  std::uint64_t seed = 7;
  std::size_t workers = 1;

  /// Reads `encoder.*`, `models.*` and `pipeline.*` keys.
  static PipelineConfig from_config(const Config& config);
};

EncoderConfig encoder_config(const Config& config);

struct PipelineModels {
  std::unique_ptr<EncoderBackend> backend;
  TaggerModel tagger;
  EvidenceClassifier evidence;
  LinkerModel linker;
  InferenceModel inference;
};

/// Loads every checkpoint and builds the backend. Throws ValidationError
/// when a checkpoint's encoder differs from the configured one.
PipelineModels load_models(const PipelineConfig& config);

/// Replaces predicted stages with gold annotations from the input.
/// Gold links imply gold mentions and entities.
struct GoldSwitches {
  bool mentions = false;
  bool evidence = false;
  bool links = false;
};

/// Greedy grouping in document order: a mention joins the most similar
/// existing group of its type (compared with the group's first mention)
/// when the similarity reaches `threshold`, else starts a new group.
std::vector<Entity> group_mentions(const Document& doc, std::span<const Mention> mentions,
                                   const EncoderBackend& backend, double threshold);

struct DedupeResult {
  std::vector<RelationTuple> tuples;
  /// One message per (intervention, comparator, outcome) seen with
  /// different directions.
  std::vector<std::string> conflicts;
};

/// Collapses tuples sharing (intervention, comparator, outcome) to the one
/// with the highest confidence (earliest on ties), keeping input order.
DedupeResult dedupe_relations(std::span<const RelationTuple> tuples);

struct RunReport {
  std::size_t documents = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // doc_id, error
  std::vector<std::string> conflicts;
  std::size_t skipped_sentences = 0;

  std::string to_json() const;
};

struct RunOutput {
  /// One predicted document per successfully processed input, in order.
  std::vector<AnnotatedDocument> predictions;
  RunReport report;

  std::vector<RelationTuple> relations() const;
};

/// Extract, group, link and infer for every document. Tuple confidence is
/// evidence score x primary probability x direction probability. A
/// document that fails at any stage is recorded and skipped.
RunOutput run_end_to_end(const PipelineModels& models, const PipelineConfig& config,
                         std::span<const AnnotatedDocument> docs, const GoldSwitches& gold = {});

}  // namespace eli
