#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eli/checkpoint.hpp"
#include "eli/corpus.hpp"
#include "eli/encoder.hpp"
#include "eli/nn.hpp"

namespace eli {

enum class LinkRole : std::size_t { Primary = 0, Comparator = 1, Unrelated = 2 };
inline constexpr std::size_t kNumLinkRoles = 3;
std::string_view to_string(LinkRole r);
LinkRole parse_link_role(std::string_view s);

struct LinkSample {
  std::vector<std::string> candidate;
  std::vector<std::string> sentence;
  LinkRole label = LinkRole::Unrelated;
};

struct LinkerConfig {
  HeadTrainConfig train;
  double dev_fraction = 0.1;
};

/// Softmax head over the joint encoding of (candidate span, sentence).
class LinkerModel {
 public:
  LinkerModel() = default;
  LinkerModel(EncoderConfig encoder, LinearHead head);

  /// Probabilities in LinkRole order.
  Vector probabilities(const EncoderBackend& backend, std::span<const std::string> candidate,
                       std::span<const std::string> sentence) const;

  const EncoderConfig& encoder() const { return encoder_; }
  const LinearHead& head() const { return head_; }
  Checkpoint to_checkpoint() const;
  static LinkerModel from_checkpoint(const Checkpoint& ckpt);

 private:
  EncoderConfig encoder_;
  LinearHead head_;
};

struct LinkerTrainResult {
  LinkerModel model;
  double dev_accuracy = 0.0;
  std::size_t best_epoch = 0;
};

/// Throws InvalidArgument on an empty sample list.
LinkerTrainResult train_linker(std::span<const LinkSample> samples, const EncoderBackend& backend,
                               const LinkerConfig& config);

/// An intervention mention offered to the linker.
struct LinkCandidate {
  std::string mention_id;
  std::string entity_id;
  TokenSpan span;
};

/// One distribution per candidate for the given sentence. Throws
/// InvalidArgument when `candidates` is empty.
std::vector<Vector> score_candidates(const LinkerModel& model, const EncoderBackend& backend,
                                     const Document& doc, std::size_t sentence,
                                     std::span<const LinkCandidate> candidates);

struct LinkChoice {
  std::size_t primary = 0;
  std::optional<std::size_t> comparator;
};

/// Primary = highest PRIMARY probability; comparator = highest COMPARATOR
/// probability among candidates of another entity, kept only when it beats
/// that candidate's UNRELATED probability. Ties go to the earliest span.
/// Indices refer to `candidates`, which must be non-empty.
LinkChoice select_links(std::span<const LinkCandidate> candidates, std::span<const Vector> probs);

struct EvidenceLink {
  std::size_t evidence_sentence = 0;
  std::string intervention;
  TokenSpan intervention_span;
  double primary_probability = 0.0;
  std::optional<std::string> comparator;
  std::optional<TokenSpan> comparator_span;
  /// Outcome entities with a mention inside the sentence, each with its
  /// first in-sentence mention.
  std::vector<std::pair<std::string, TokenSpan>> outcomes;
};

struct LinkResult {
  std::vector<EvidenceLink> links;
  /// Evidence sentences dropped because the document has no grouped
  /// intervention mention.
  std::size_t skipped_sentences = 0;
};

/// Links each evidence sentence of `doc` (whose mentions must already be
/// grouped into entities). Sentences without an outcome mention yield no
/// link.
LinkResult link_evidence(const LinkerModel& model, const EncoderBackend& backend,
                         const AnnotatedDocument& doc, std::span<const std::size_t> evidence);

}  // namespace eli
