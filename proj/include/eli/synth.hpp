#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eli/corpus.hpp"
#include "eli/supervision.hpp"

namespace eli {

/// Templated trial abstracts with exact gold mentions, entities, evidence
/// sentences and relations, plus the matching prompt-style annotations.
struct SynthConfig {
  std::size_t train = 500;
  std::size_t dev = 50;
  std::size_t test = 100;
  std::uint64_t seed = 7;
  /// Share of documents with two active arms against one comparator.
  double multi_arm = 0.2;
  /// Share of adverse-outcome decreases phrased as an improvement.
  double hard_fraction = 0.3;
  /// Share of documents mentioning a background co-intervention.
  double extraneous = 0.5;
  /// Share of drug and outcome names reserved for dev/test documents.
  double held_out = 0.25;
};

struct SynthDocument {
  AnnotatedDocument doc;
  std::vector<Prompt> prompts;
  /// Indices into doc.relations() phrased with lexical inversion.
  std::vector<std::size_t> hard_relations;
};

struct SynthSplit {
  std::vector<AnnotatedDocument> docs;
  std::vector<Prompt> prompts;
  /// (doc_id, relation index) of every lexical-inversion relation.
  std::vector<std::pair<std::string, std::size_t>> hard_cases;
};

struct SynthCorpus {
  SynthSplit train;
  SynthSplit dev;
  SynthSplit test;
};

/// One abstract; a pure function of its arguments. Without
/// `unseen_names` the reserved drug and outcome names are never drawn.
SynthDocument synth_document(const std::string& doc_id, const SynthConfig& config,
                             bool unseen_names = false);

/// Documents named `<split>-NNNN`; only dev and test use reserved names.
SynthCorpus synth_corpus(const SynthConfig& config);

/// Writes <split>.jsonl, <split>.prompts.jsonl and <split>.hard.jsonl for
/// each split into `dir`.
void write_synth_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

/// The erythromycin-versus-placebo abstract with two no-difference
/// findings in one sentence.
AnnotatedDocument erythromycin_example();

}  // namespace eli
