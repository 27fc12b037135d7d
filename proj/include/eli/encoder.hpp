#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eli/corpus.hpp"

namespace eli {

using Embedding = Eigen::VectorXd;

struct EncoderConfig {
  std::string name = "hashed";
  std::size_t dim = 64;
  std::uint64_t seed = 13;
  std::size_t max_tokens = 512;
  /// Endpoint of the embedding service, `pretrained` backend only.
  std::string url;
  bool frozen = true;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// Produces contextual token vectors and pooled encodings of one or more
/// jointly encoded segments. Implementations are read-only after
/// construction and safe to call concurrently.
class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::size_t max_tokens() const = 0;
  /// Settings that rebuild an equivalent backend via make_encoder.
  virtual EncoderConfig config() const = 0;

  /// One vector per token. `tokens` is a single sentence-sized sequence.
  virtual std::vector<Embedding> encode_sequence(std::span<const std::string> tokens) const = 0;

  /// Joint encoding of several segments (one segment = a sentence vector).
  virtual Embedding encode_segments(std::span<const std::vector<std::string>> segments) const = 0;
};

/// Character n-gram hashing featurizer. Each token vector is a pure function
/// of (lower-cased surface, sentence-initial flag, seed), unit-normalized.
class HashedBackend final : public EncoderBackend {
 public:
  HashedBackend(std::size_t dim, std::uint64_t seed, std::size_t max_tokens = 512);

  std::string name() const override { return "hashed"; }
  std::size_t dim() const override { return dim_; }
  std::size_t max_tokens() const override { return max_tokens_; }
  EncoderConfig config() const override;
  std::vector<Embedding> encode_sequence(std::span<const std::string> tokens) const override;
  Embedding encode_segments(std::span<const std::vector<std::string>> segments) const override;

  Embedding token_vector(const std::string& surface, bool sentence_initial,
                         std::uint64_t salt = 0) const;

 private:
  void add_feature(Embedding& v, const std::string& feature, double weight,
                   std::uint64_t salt) const;

  std::size_t dim_;
  std::uint64_t seed_;
  std::size_t max_tokens_;
};

/// Client for an external service hosting a pretrained transformer.
/// Requests are `POST <url>/encode` with a JSON body
/// `{"mode": "tokens"|"pooled", "segments": [[tok, ...], ...]}` and the
/// reply `{"vectors": [[...], ...]}` (one per token, or exactly one).
class PretrainedBackend final : public EncoderBackend {
 public:
  PretrainedBackend(std::string url, std::size_t dim, std::size_t max_tokens);

  std::string name() const override { return "pretrained"; }
  std::size_t dim() const override { return dim_; }
  std::size_t max_tokens() const override { return max_tokens_; }
  EncoderConfig config() const override;
  std::vector<Embedding> encode_sequence(std::span<const std::string> tokens) const override;
  Embedding encode_segments(std::span<const std::vector<std::string>> segments) const override;

 private:
  std::vector<Embedding> request(const std::string& mode,
                                 std::span<const std::vector<std::string>> segments,
                                 std::size_t expected) const;

  std::string url_;
  std::string host_;
  std::string path_prefix_;
  std::size_t dim_;
  std::size_t max_tokens_;
};

/// Builds the backend named by `config.name` ("hashed" or "pretrained").
std::unique_ptr<EncoderBackend> make_encoder(const EncoderConfig& config);

/// Token vectors for every token of `doc`, or of sentences
/// [first, last) when `sentence_range` is given. Encodes sentence by
/// sentence; a sentence longer than the backend limit is an error.
std::vector<Embedding> encode_tokens(
    const EncoderBackend& backend, const Document& doc,
    std::optional<std::pair<std::size_t, std::size_t>> sentence_range = std::nullopt);

/// Mean of the span's token vectors. Throws on an empty span.
Embedding encode_span(const EncoderBackend& backend, const Document& doc, TokenSpan span);
Embedding encode_span(std::span<const Embedding> doc_token_vectors, TokenSpan span);

/// Mean token vector of free text given as tokens (e.g. prompt strings).
Embedding encode_text(const EncoderBackend& backend, std::span<const std::string> tokens);

/// Throws InvalidArgument for a zero vector or mismatched widths.
double cosine_similarity(const Embedding& a, const Embedding& b);

/// Whitespace/punctuation tokenization used for free-text inputs.
std::vector<std::string> simple_tokens(const std::string& text);

}  // namespace eli
