#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace eli {

enum class EntityType { Intervention, Outcome };
enum class Direction { Increased, Decreased, NoDifference };

inline constexpr std::size_t kNumDirections = 3;

std::string_view to_string(EntityType t);
std::string_view to_string(Direction d);
EntityType parse_entity_type(std::string_view s);
Direction parse_direction(std::string_view s);
inline std::size_t index_of(Direction d) { return static_cast<std::size_t>(d); }
inline Direction direction_at(std::size_t i) { return static_cast<Direction>(i); }

/// Half-open token interval [start, end).
struct TokenSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  bool contains(const TokenSpan& other) const {
    return start <= other.start && other.end <= end;
  }
  bool overlaps(const TokenSpan& other) const {
    return start < other.end && other.start < end;
  }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
  friend auto operator<=>(const TokenSpan&, const TokenSpan&) = default;
};

/// Character offsets count Unicode code points, not bytes.
struct Token {
  std::string surface;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  friend bool operator==(const Token&, const Token&) = default;
};

/// A tokenized abstract with stored sentence segmentation. Immutable; the
/// only way to obtain one is through a validating factory.
class Document {
 public:
  /// Throws ValidationError when offsets or sentence ranges are inconsistent.
  static Document create(std::string doc_id, std::string text,
                         const std::vector<std::pair<std::size_t, std::size_t>>& token_offsets,
                         std::vector<TokenSpan> sentences);

  /// Convenience tokenizer for raw text: splits on whitespace and
  /// punctuation, ends sentences at '.', '!' or '?' tokens.
  static Document from_text(std::string doc_id, std::string text);

  const std::string& doc_id() const { return doc_id_; }
  const std::string& text() const { return text_; }
  const std::vector<Token>& tokens() const { return tokens_; }
  const std::vector<TokenSpan>& sentences() const { return sentences_; }
  std::size_t num_tokens() const { return tokens_.size(); }
  std::size_t num_sentences() const { return sentences_.size(); }

  /// Index of the sentence containing token `token_index`.
  std::size_t sentence_of(std::size_t token_index) const;

  /// Surface text of a token span, copied verbatim from the document text.
  std::string span_text(TokenSpan span) const;
  std::vector<std::string> span_tokens(TokenSpan span) const;
  std::string sentence_text(std::size_t sentence_index) const;

  /// Sentences whose character extent overlaps [char_start, char_end).
  std::vector<std::size_t> sentences_overlapping(std::size_t char_start,
                                                 std::size_t char_end) const;

  std::size_t text_length() const { return byte_of_char_.size() - 1; }

  friend bool operator==(const Document& a, const Document& b) {
    return a.doc_id_ == b.doc_id_ && a.text_ == b.text_ && a.tokens_ == b.tokens_ &&
           a.sentences_ == b.sentences_;
  }

 private:
  Document() = default;

  std::string doc_id_;
  std::string text_;
  std::vector<Token> tokens_;
  std::vector<TokenSpan> sentences_;
  std::vector<std::size_t> byte_of_char_;
  std::vector<std::size_t> sentence_of_token_;
};

struct Mention {
  std::string mention_id;
  std::string doc_id;
  TokenSpan span;
  EntityType etype = EntityType::Intervention;
  friend bool operator==(const Mention&, const Mention&) = default;
};

struct Entity {
  std::string entity_id;
  std::string doc_id;
  EntityType etype = EntityType::Intervention;
  std::vector<std::string> mentions;
  std::string canonical_text;
  friend bool operator==(const Entity&, const Entity&) = default;
};

struct EvidenceSentence {
  std::string doc_id;
  std::size_t sentence_index = 0;
  double score = 0.0;
};

/// (intervention, comparator, outcome, direction). An absent comparator is
/// the binary (intervention, outcome) form. Optional spans record which
/// mention of each entity grounded the prediction.
struct RelationTuple {
  std::string doc_id;
  std::string intervention;
  std::optional<std::string> comparator;
  std::string outcome;
  Direction direction = Direction::NoDifference;
  std::size_t evidence_sentence = 0;
  double confidence = 1.0;
  std::optional<TokenSpan> intervention_span;
  std::optional<TokenSpan> comparator_span;
  std::optional<TokenSpan> outcome_span;
  friend bool operator==(const RelationTuple&, const RelationTuple&) = default;
};

class AnnotatedDocument {
 public:
  /// Validates every cross-reference; throws ValidationError naming the
  /// doc_id and the broken invariant. Entity canonical_text is recomputed
  /// from the first listed mention.
  static AnnotatedDocument create(Document document, std::vector<Mention> mentions,
                                  std::vector<Entity> entities,
                                  std::vector<std::size_t> evidence_sentences,
                                  std::vector<RelationTuple> relations);

  /// A document with no annotations.
  static AnnotatedDocument bare(Document document);

  const Document& document() const { return document_; }
  const std::string& doc_id() const { return document_.doc_id(); }
  const std::vector<Mention>& mentions() const { return mentions_; }
  const std::vector<Entity>& entities() const { return entities_; }
  const std::vector<std::size_t>& evidence_sentences() const { return evidence_; }
  const std::vector<RelationTuple>& relations() const { return relations_; }

  const Mention* find_mention(std::string_view id) const;
  const Entity* find_entity(std::string_view id) const;
  /// Entity containing the mention, or nullptr for ungrouped mentions.
  const Entity* entity_of_mention(std::string_view mention_id) const;
  std::vector<TokenSpan> entity_spans(const Entity& e) const;

  friend bool operator==(const AnnotatedDocument&, const AnnotatedDocument&) = default;

 private:
  AnnotatedDocument(Document d) : document_(std::move(d)) {}

  Document document_;
  std::vector<Mention> mentions_;
  std::vector<Entity> entities_;
  std::vector<std::size_t> evidence_;
  std::vector<RelationTuple> relations_;
};

/// Validates a tuple against its document (types, distinct arms, grounding).
void validate_relation(const AnnotatedDocument& doc, const RelationTuple& r);

// JSON-Lines I/O ----------------------------------------------------------

/// Parses one corpus record. `line_no` is only used in error messages.
AnnotatedDocument parse_document_line(std::string_view line, std::size_t line_no = 0);
std::string to_json_line(const AnnotatedDocument& doc);

/// Throws IoError if unreadable, ParseError("line N: ...") on malformed
/// records and ValidationError on invariant violations.
std::vector<AnnotatedDocument> load_corpus(const std::filesystem::path& path);
void write_corpus(std::span<const AnnotatedDocument> docs, const std::filesystem::path& path);

std::string to_json_line(const RelationTuple& r);
RelationTuple parse_relation_line(std::string_view line, std::size_t line_no = 0);
void write_predictions(std::span<const RelationTuple> relations,
                       const std::filesystem::path& path);
std::vector<RelationTuple> load_predictions(const std::filesystem::path& path);

// Statistics ---------------------------------------------------------------

struct CorpusStats {
  std::size_t num_abstracts = 0;
  std::size_t num_relations = 0;
  std::size_t num_entities = 0;
  std::size_t num_mentions = 0;
  double relations_per_doc = 0.0;
  double entities_per_doc = 0.0;
  double mentions_per_doc = 0.0;

  static CorpusStats from_counts(std::size_t abstracts, std::size_t relations,
                                 std::size_t entities, std::size_t mentions);
};

/// Throws InvalidArgument on an empty corpus.
CorpusStats corpus_stats(std::span<const AnnotatedDocument> corpus);

}  // namespace eli
