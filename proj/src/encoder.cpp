#include "eli/encoder.hpp"

#include <cctype>
#include <cmath>

#include "eli/error.hpp"
#include "eli/rng.hpp"
#include "httplib.h"
#include "json.hpp"

namespace eli {

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string shape(const std::string& s) {
  std::string out;
  for (unsigned char c : s) {
    char k;
    if (std::isupper(c)) k = 'X';
    else if (std::islower(c)) k = 'x';
    else if (std::isdigit(c)) k = 'd';
    else k = static_cast<char>(c);
    if (out.empty() || out.back() != k) out.push_back(k);
  }
  return out;
}

void normalize(Embedding& v) {
  const double n = v.norm();
  if (n > 0.0) v /= n;
}

// Token-level overlap between a short segment and the final (context) segment.
double shared_fraction(const std::vector<std::string>& short_seg,
                       const std::vector<std::string>& context) {
  std::size_t words = 0, shared = 0;
  for (const auto& t : short_seg) {
    if (t.empty() || !std::isalnum(static_cast<unsigned char>(t[0]))) continue;
    ++words;
    const std::string lt = lower(t);
    for (const auto& c : context) {
      if (lower(c) == lt) {
        ++shared;
        break;
      }
    }
  }
  return words == 0 ? 0.0 : static_cast<double>(shared) / static_cast<double>(words);
}

constexpr double kNgramWeight = 0.6;
constexpr double kShapeWeight = 0.25;
constexpr double kPositionWeight = 0.25;

}  // namespace

// Hashed backend -------------------------------------------------------------

HashedBackend::HashedBackend(std::size_t dim, std::uint64_t seed, std::size_t max_tokens)
    : dim_(dim), seed_(seed), max_tokens_(max_tokens) {
  if (dim == 0) throw InvalidArgument("encoder.dim must be positive");
}

EncoderConfig HashedBackend::config() const {
  EncoderConfig c;
  c.name = "hashed";
  c.dim = dim_;
  c.seed = seed_;
  c.max_tokens = max_tokens_;
  return c;
}

void HashedBackend::add_feature(Embedding& v, const std::string& feature, double weight,
                                std::uint64_t salt) const {
  // Two signed buckets per feature soften collisions at small widths.
  std::uint64_t h = splitmix64(fnv1a64(feature) ^ splitmix64(seed_ ^ salt));
  for (int k = 0; k < 2; ++k) {
    const double sign = (h >> 63) ? -1.0 : 1.0;
    v[static_cast<Eigen::Index>(h % dim_)] += sign * weight * M_SQRT1_2;
    h = splitmix64(h);
  }
}

Embedding HashedBackend::token_vector(const std::string& surface, bool sentence_initial,
                                      std::uint64_t salt) const {
  const std::string w = lower(surface);
  Embedding v = Embedding::Zero(static_cast<Eigen::Index>(dim_));
  add_feature(v, "w|" + w, 1.0, salt);

  Embedding grams = Embedding::Zero(static_cast<Eigen::Index>(dim_));
  const std::string padded = "^" + w + "$";
  for (std::size_t n = 3; n <= 4; ++n) {
    for (std::size_t i = 0; i + n <= padded.size(); ++i) {
      add_feature(grams, "g|" + padded.substr(i, n), 1.0, salt);
    }
  }
  normalize(grams);
  v += kNgramWeight * grams;
  add_feature(v, "s|" + shape(surface), kShapeWeight, salt);
  if (sentence_initial) add_feature(v, "p|initial", kPositionWeight, salt);
  normalize(v);
  return v;
}

std::vector<Embedding> HashedBackend::encode_sequence(std::span<const std::string> tokens) const {
  if (tokens.size() > max_tokens_) {
    throw InvalidArgument("input of " + std::to_string(tokens.size()) +
                          " tokens exceeds the encoder limit of " + std::to_string(max_tokens_));
  }
  std::vector<Embedding> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) out.push_back(token_vector(tokens[i], i == 0));
  return out;
}

Embedding HashedBackend::encode_segments(std::span<const std::vector<std::string>> segments) const {
  if (segments.empty()) throw InvalidArgument("encode_segments needs at least one segment");
  std::size_t total = 0;
  for (const auto& s : segments) total += s.size();
  if (total > max_tokens_) {
    throw InvalidArgument("input of " + std::to_string(total) +
                          " tokens exceeds the encoder limit of " + std::to_string(max_tokens_));
  }
  Embedding v = Embedding::Zero(static_cast<Eigen::Index>(dim_));
  for (std::size_t k = 0; k < segments.size(); ++k) {
    Embedding seg = Embedding::Zero(static_cast<Eigen::Index>(dim_));
    for (std::size_t i = 0; i < segments[k].size(); ++i) {
      seg += token_vector(segments[k][i], i == 0, k);
    }
    normalize(seg);
    v += seg;
  }
  if (segments.size() > 1) {
    // Cross-segment overlap stands in for attention between the segments.
    Embedding cross = Embedding::Zero(static_cast<Eigen::Index>(dim_));
    const auto& context = segments.back();
    for (std::size_t k = 0; k + 1 < segments.size(); ++k) {
      const double f = shared_fraction(segments[k], context);
      const std::string tag = "x|" + std::to_string(k);
      add_feature(cross, tag + "|shared", f, 0);
      add_feature(cross, tag + "|absent", 1.0 - f, 0);
    }
    normalize(cross);
    v += cross;
  }
  normalize(v);
  return v;
}

// Pretrained backend ------------------------------------------------------------

PretrainedBackend::PretrainedBackend(std::string url, std::size_t dim, std::size_t max_tokens)
    : url_(url), dim_(dim), max_tokens_(max_tokens) {
  if (url.empty()) throw InvalidArgument("encoder.url is required for the pretrained backend");
  if (dim == 0) throw InvalidArgument("encoder.dim must be positive");
  const auto scheme = url.find("://");
  const auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) {
    host_ = url;
  } else {
    host_ = url.substr(0, path_start);
    path_prefix_ = url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }
}

std::vector<Embedding> PretrainedBackend::request(const std::string& mode,
                                                  std::span<const std::vector<std::string>> segments,
                                                  std::size_t expected) const {
  nlohmann::json body;
  body["mode"] = mode;
  body["segments"] = nlohmann::json::array();
  for (const auto& s : segments) body["segments"].push_back(s);

  httplib::Client client(host_);
  client.set_read_timeout(120, 0);
  auto res = client.Post(path_prefix_ + "/encode", body.dump(), "application/json");
  if (!res) {
    throw IoError("encoder service " + host_ + " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw IoError("encoder service returned HTTP " + std::to_string(res->status));
  }
  std::vector<Embedding> out;
  try {
    const auto reply = nlohmann::json::parse(res->body);
    for (const auto& vec : reply.at("vectors")) {
      const auto values = vec.get<std::vector<double>>();
      if (values.size() != dim_) {
        throw ParseError("encoder service returned width " + std::to_string(values.size()) +
                         ", expected " + std::to_string(dim_));
      }
      Embedding e = Eigen::Map<const Embedding>(values.data(), static_cast<Eigen::Index>(dim_));
      if (!e.allFinite()) throw ParseError("encoder service returned non-finite values");
      out.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed encoder reply: ") + e.what());
  }
  if (out.size() != expected) {
    throw ParseError("encoder service returned " + std::to_string(out.size()) +
                     " vectors, expected " + std::to_string(expected));
  }
  return out;
}

std::vector<Embedding> PretrainedBackend::encode_sequence(std::span<const std::string> tokens) const {
  if (tokens.size() > max_tokens_) {
    throw InvalidArgument("input of " + std::to_string(tokens.size()) +
                          " tokens exceeds the encoder limit of " + std::to_string(max_tokens_));
  }
  if (tokens.empty()) return {};
  const std::vector<std::vector<std::string>> segs{{tokens.begin(), tokens.end()}};
  return request("tokens", segs, tokens.size());
}

Embedding PretrainedBackend::encode_segments(std::span<const std::vector<std::string>> segments) const {
  std::size_t total = 0;
  for (const auto& s : segments) total += s.size();
  if (segments.empty()) throw InvalidArgument("encode_segments needs at least one segment");
  if (total > max_tokens_) {
    throw InvalidArgument("input of " + std::to_string(total) +
                          " tokens exceeds the encoder limit of " + std::to_string(max_tokens_));
  }
  return request("pooled", segments, 1).front();
}

// Free functions -------------------------------------------------------------------

EncoderConfig PretrainedBackend::config() const {
  EncoderConfig c;
  c.name = "pretrained";
  c.dim = dim_;
  c.max_tokens = max_tokens_;
  c.url = url_;
  return c;
}

std::unique_ptr<EncoderBackend> make_encoder(const EncoderConfig& config) {
  if (config.name == "hashed") {
    return std::make_unique<HashedBackend>(config.dim, config.seed, config.max_tokens);
  }
  if (config.name == "pretrained") {
    return std::make_unique<PretrainedBackend>(config.url, config.dim, config.max_tokens);
  }
  throw InvalidArgument("unknown encoder '" + config.name + "'");
}

std::vector<Embedding> encode_tokens(const EncoderBackend& backend, const Document& doc,
                                     std::optional<std::pair<std::size_t, std::size_t>> sentence_range) {
  const std::size_t first = sentence_range ? sentence_range->first : 0;
  const std::size_t last = sentence_range ? sentence_range->second : doc.num_sentences();
  if (first > last || last > doc.num_sentences()) {
    throw InvalidArgument("sentence range out of bounds");
  }
  std::vector<Embedding> out;
  for (std::size_t s = first; s < last; ++s) {
    const auto tokens = doc.span_tokens(doc.sentences()[s]);
    auto vecs = backend.encode_sequence(tokens);
    for (auto& v : vecs) out.push_back(std::move(v));
  }
  return out;
}

Embedding encode_span(std::span<const Embedding> doc_token_vectors, TokenSpan span) {
  if (span.start >= span.end) throw InvalidArgument("cannot embed an empty span");
  if (span.end > doc_token_vectors.size()) throw InvalidArgument("span out of range");
  Embedding sum = doc_token_vectors[span.start];
  for (std::size_t i = span.start + 1; i < span.end; ++i) sum += doc_token_vectors[i];
  return sum / static_cast<double>(span.size());
}

Embedding encode_span(const EncoderBackend& backend, const Document& doc, TokenSpan span) {
  if (span.start >= span.end) throw InvalidArgument("cannot embed an empty span");
  if (span.end > doc.num_tokens()) throw InvalidArgument("span out of range");
  const std::size_t first = doc.sentence_of(span.start);
  const std::size_t last = doc.sentence_of(span.end - 1) + 1;
  const auto vecs = encode_tokens(backend, doc, std::make_pair(first, last));
  const std::size_t offset = doc.sentences()[first].start;
  return encode_span(vecs, TokenSpan{span.start - offset, span.end - offset});
}

Embedding encode_text(const EncoderBackend& backend, std::span<const std::string> tokens) {
  if (tokens.empty()) throw InvalidArgument("cannot embed empty text");
  const auto vecs = backend.encode_sequence(tokens);
  return encode_span(vecs, TokenSpan{0, vecs.size()});
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) throw InvalidArgument("cosine_similarity: width mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw InvalidArgument("cosine_similarity: zero vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

std::vector<std::string> simple_tokens(const std::string& text) {
  const Document d = Document::from_text("", text);
  std::vector<std::string> out;
  for (const auto& t : d.tokens()) out.push_back(t.surface);
  return out;
}

}  // namespace eli
