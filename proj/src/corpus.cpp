#include "eli/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "eli/error.hpp"
#include "eli/jsonl.hpp"
#include "json.hpp"

namespace eli {

using jsonl::blank;
using jsonl::read_lines;
using jsonl::with_line_context;
using jsonl::write_lines;

using ojson = nlohmann::ordered_json;

std::string_view to_string(EntityType t) {
  return t == EntityType::Intervention ? "intervention" : "outcome";
}

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::Increased: return "increased";
    case Direction::Decreased: return "decreased";
    case Direction::NoDifference: return "no_diff";
  }
  return "no_diff";
}

EntityType parse_entity_type(std::string_view s) {
  if (s == "intervention") return EntityType::Intervention;
  if (s == "outcome") return EntityType::Outcome;
  throw ParseError("unknown entity type '" + std::string(s) + "'");
}

Direction parse_direction(std::string_view s) {
  if (s == "increased") return Direction::Increased;
  if (s == "decreased") return Direction::Decreased;
  if (s == "no_diff") return Direction::NoDifference;
  throw ParseError("unknown direction '" + std::string(s) + "'");
}

// Document ----------------------------------------------------------------

namespace {

std::vector<std::size_t> code_point_starts(const std::string& text) {
  std::vector<std::size_t> starts;
  starts.reserve(text.size() + 1);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if ((c & 0xC0) != 0x80) starts.push_back(i);
  }
  starts.push_back(text.size());
  return starts;
}

[[noreturn]] void invalid(const std::string& doc_id, const std::string& what) {
  throw ValidationError("doc " + doc_id + ": " + what);
}

}  // namespace

Document Document::create(std::string doc_id, std::string text,
                          const std::vector<std::pair<std::size_t, std::size_t>>& token_offsets,
                          std::vector<TokenSpan> sentences) {
  Document d;
  d.byte_of_char_ = code_point_starts(text);
  const std::size_t length = d.byte_of_char_.size() - 1;

  std::size_t prev_end = 0;
  d.tokens_.reserve(token_offsets.size());
  for (std::size_t i = 0; i < token_offsets.size(); ++i) {
    const auto [s, e] = token_offsets[i];
    if (s >= e || e > length || s < prev_end) {
      invalid(doc_id, "token " + std::to_string(i) +
                          " offsets must be non-empty, non-overlapping, increasing and "
                          "within the text");
    }
    prev_end = e;
    const std::size_t bs = d.byte_of_char_[s];
    const std::size_t be = d.byte_of_char_[e];
    d.tokens_.push_back(Token{text.substr(bs, be - bs), s, e});
  }

  std::size_t expected = 0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (sentences[i].start != expected || sentences[i].end <= sentences[i].start) {
      invalid(doc_id, "sentence ranges must partition the tokens (sentence " +
                          std::to_string(i) + ")");
    }
    expected = sentences[i].end;
  }
  if (expected != d.tokens_.size()) {
    invalid(doc_id, "sentence ranges must cover every token");
  }

  d.sentence_of_token_.resize(d.tokens_.size());
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    for (std::size_t t = sentences[s].start; t < sentences[s].end; ++t) {
      d.sentence_of_token_[t] = s;
    }
  }
  d.doc_id_ = std::move(doc_id);
  d.text_ = std::move(text);
  d.sentences_ = std::move(sentences);
  return d;
}

Document Document::from_text(std::string doc_id, std::string text) {
  const auto starts = code_point_starts(text);
  std::vector<std::pair<std::size_t, std::size_t>> offsets;
  std::vector<TokenSpan> sentences;
  const std::size_t n = starts.size() - 1;

  auto byte_at = [&](std::size_t cp) { return static_cast<unsigned char>(text[starts[cp]]); };
  auto is_word = [&](std::size_t cp) {
    const unsigned char c = byte_at(cp);
    return c >= 0x80 || std::isalnum(c) || c == '-' || c == '/';
  };

  std::size_t sentence_start = 0;
  std::size_t i = 0;
  while (i < n) {
    const unsigned char c = byte_at(i);
    if (c < 0x80 && std::isspace(c)) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    if (is_word(i)) {
      while (j < n) {
        if (is_word(j)) {
          ++j;
        } else if (byte_at(j) == '.' && j + 1 < n && std::isdigit(byte_at(j - 1)) &&
                   std::isdigit(byte_at(j + 1))) {
          ++j;  // decimal point
        } else {
          break;
        }
      }
    }
    offsets.emplace_back(i, j);
    if (j == i + 1 && (c == '.' || c == '!' || c == '?')) {
      sentences.push_back({sentence_start, offsets.size()});
      sentence_start = offsets.size();
    }
    i = j;
  }
  if (sentence_start < offsets.size()) sentences.push_back({sentence_start, offsets.size()});
  return create(std::move(doc_id), std::move(text), offsets, std::move(sentences));
}

std::size_t Document::sentence_of(std::size_t token_index) const {
  if (token_index >= sentence_of_token_.size()) {
    throw InvalidArgument("token index out of range");
  }
  return sentence_of_token_[token_index];
}

std::string Document::span_text(TokenSpan span) const {
  if (span.start >= span.end || span.end > tokens_.size()) {
    throw InvalidArgument("invalid token span");
  }
  const std::size_t bs = byte_of_char_[tokens_[span.start].char_start];
  const std::size_t be = byte_of_char_[tokens_[span.end - 1].char_end];
  return text_.substr(bs, be - bs);
}

std::vector<std::string> Document::span_tokens(TokenSpan span) const {
  if (span.start > span.end || span.end > tokens_.size()) {
    throw InvalidArgument("invalid token span");
  }
  std::vector<std::string> out;
  out.reserve(span.size());
  for (std::size_t i = span.start; i < span.end; ++i) out.push_back(tokens_[i].surface);
  return out;
}

std::string Document::sentence_text(std::size_t sentence_index) const {
  return span_text(sentences_.at(sentence_index));
}

std::vector<std::size_t> Document::sentences_overlapping(std::size_t char_start,
                                                         std::size_t char_end) const {
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < sentences_.size(); ++s) {
    const std::size_t ss = tokens_[sentences_[s].start].char_start;
    const std::size_t se = tokens_[sentences_[s].end - 1].char_end;
    if (char_start < se && ss < char_end) out.push_back(s);
  }
  return out;
}

// AnnotatedDocument -------------------------------------------------------

AnnotatedDocument AnnotatedDocument::bare(Document document) {
  return AnnotatedDocument(std::move(document));
}

AnnotatedDocument AnnotatedDocument::create(Document document, std::vector<Mention> mentions,
                                            std::vector<Entity> entities,
                                            std::vector<std::size_t> evidence_sentences,
                                            std::vector<RelationTuple> relations) {
  const std::string& id = document.doc_id();
  std::map<std::string, const Mention*> by_id;
  for (const auto& m : mentions) {
    if (m.doc_id != id) invalid(id, "mention " + m.mention_id + " belongs to another document");
    if (m.span.start >= m.span.end || m.span.end > document.num_tokens()) {
      invalid(id, "mention " + m.mention_id + " span out of range");
    }
    if (!by_id.emplace(m.mention_id, &m).second) {
      invalid(id, "duplicate mention id " + m.mention_id);
    }
  }

  std::vector<const Mention*> sorted;
  for (const auto& m : mentions) sorted.push_back(&m);
  std::sort(sorted.begin(), sorted.end(), [](const Mention* a, const Mention* b) {
    return std::tie(a->etype, a->span) < std::tie(b->etype, b->span);
  });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i]->etype == sorted[i - 1]->etype && sorted[i]->span.overlaps(sorted[i - 1]->span)) {
      invalid(id, "overlapping " + std::string(to_string(sorted[i]->etype)) + " mentions " +
                      sorted[i - 1]->mention_id + " and " + sorted[i]->mention_id);
    }
  }

  std::set<std::string> entity_ids;
  std::set<std::string> grouped;
  for (auto& e : entities) {
    if (e.doc_id != id) invalid(id, "entity " + e.entity_id + " belongs to another document");
    if (!entity_ids.insert(e.entity_id).second) invalid(id, "duplicate entity id " + e.entity_id);
    if (e.mentions.empty()) invalid(id, "entity " + e.entity_id + " has no mentions");
    for (const auto& mid : e.mentions) {
      auto it = by_id.find(mid);
      if (it == by_id.end()) {
        invalid(id, "entity " + e.entity_id + " references missing mention " + mid);
      }
      if (it->second->etype != e.etype) {
        invalid(id, "entity " + e.entity_id + " mixes entity types");
      }
      if (!grouped.insert(mid).second) {
        invalid(id, "mention " + mid + " belongs to more than one entity");
      }
    }
    e.canonical_text = document.span_text(by_id.at(e.mentions.front())->span);
  }

  for (std::size_t s : evidence_sentences) {
    if (s >= document.num_sentences()) {
      invalid(id, "evidence sentence index " + std::to_string(s) + " out of range");
    }
  }

  AnnotatedDocument out(std::move(document));
  out.mentions_ = std::move(mentions);
  out.entities_ = std::move(entities);
  out.evidence_ = std::move(evidence_sentences);
  for (auto& r : relations) {
    validate_relation(out, r);
  }
  out.relations_ = std::move(relations);
  return out;
}

const Mention* AnnotatedDocument::find_mention(std::string_view id) const {
  for (const auto& m : mentions_) {
    if (m.mention_id == id) return &m;
  }
  return nullptr;
}

const Entity* AnnotatedDocument::find_entity(std::string_view id) const {
  for (const auto& e : entities_) {
    if (e.entity_id == id) return &e;
  }
  return nullptr;
}

const Entity* AnnotatedDocument::entity_of_mention(std::string_view mention_id) const {
  for (const auto& e : entities_) {
    if (std::find(e.mentions.begin(), e.mentions.end(), mention_id) != e.mentions.end()) {
      return &e;
    }
  }
  return nullptr;
}

std::vector<TokenSpan> AnnotatedDocument::entity_spans(const Entity& e) const {
  std::vector<TokenSpan> out;
  for (const auto& mid : e.mentions) out.push_back(find_mention(mid)->span);
  return out;
}

void validate_relation(const AnnotatedDocument& doc, const RelationTuple& r) {
  const std::string& id = doc.doc_id();
  if (r.doc_id != id) invalid(id, "relation belongs to another document");
  auto require = [&](const std::string& eid, EntityType type, const char* role) -> const Entity& {
    const Entity* e = doc.find_entity(eid);
    if (e == nullptr) invalid(id, std::string("relation ") + role + " references missing entity " + eid);
    if (e->etype != type) {
      invalid(id, std::string("relation ") + role + " entity " + eid + " has the wrong type");
    }
    return *e;
  };
  auto check_span = [&](const Entity& e, const std::optional<TokenSpan>& span, const char* role) {
    if (!span) return;
    for (const auto& s : doc.entity_spans(e)) {
      if (s == *span) return;
    }
    invalid(id, std::string("relation ") + role + " span is not a mention of entity " + e.entity_id);
  };

  const Entity& i = require(r.intervention, EntityType::Intervention, "intervention");
  check_span(i, r.intervention_span, "intervention");
  const Entity& o = require(r.outcome, EntityType::Outcome, "outcome");
  check_span(o, r.outcome_span, "outcome");
  if (r.comparator) {
    if (*r.comparator == r.intervention) invalid(id, "relation intervention equals comparator");
    const Entity& c = require(*r.comparator, EntityType::Intervention, "comparator");
    check_span(c, r.comparator_span, "comparator");
  } else if (r.comparator_span) {
    invalid(id, "relation has a comparator span but no comparator");
  }
  if (r.evidence_sentence >= doc.document().num_sentences()) {
    invalid(id, "relation evidence sentence out of range");
  }
  if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) {
    invalid(id, "relation confidence outside [0,1]");
  }
}

// JSON ----------------------------------------------------------------------

namespace {

ojson span_json(const TokenSpan& s) { return ojson::array({s.start, s.end}); }

TokenSpan parse_span(const ojson& j) {
  if (!j.is_array() || j.size() != 2) throw ParseError("span must be a [start, end] pair");
  return TokenSpan{j.at(0).get<std::size_t>(), j.at(1).get<std::size_t>()};
}

std::optional<TokenSpan> optional_span(const ojson& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return parse_span(*it);
}

ojson relation_body(const RelationTuple& r, bool with_doc_id) {
  ojson j;
  if (with_doc_id) j["doc_id"] = r.doc_id;
  j["i"] = r.intervention;
  j["c"] = r.comparator ? ojson(*r.comparator) : ojson(nullptr);
  j["o"] = r.outcome;
  j["direction"] = std::string(to_string(r.direction));
  j["evidence"] = r.evidence_sentence;
  if (with_doc_id || r.confidence != 1.0) j["confidence"] = r.confidence;
  if (r.intervention_span) j["i_span"] = span_json(*r.intervention_span);
  if (r.comparator_span) j["c_span"] = span_json(*r.comparator_span);
  if (r.outcome_span) j["o_span"] = span_json(*r.outcome_span);
  return j;
}

RelationTuple parse_relation(const ojson& j, const std::string& doc_id) {
  RelationTuple r;
  r.doc_id = doc_id;
  r.intervention = j.at("i").get<std::string>();
  if (!j.at("c").is_null()) r.comparator = j.at("c").get<std::string>();
  r.outcome = j.at("o").get<std::string>();
  r.direction = parse_direction(j.at("direction").get<std::string>());
  r.evidence_sentence = j.at("evidence").get<std::size_t>();
  if (auto it = j.find("confidence"); it != j.end()) r.confidence = it->get<double>();
  r.intervention_span = optional_span(j, "i_span");
  r.comparator_span = optional_span(j, "c_span");
  r.outcome_span = optional_span(j, "o_span");
  return r;
}

}  // namespace

AnnotatedDocument parse_document_line(std::string_view line, std::size_t line_no) {
  // Parse errors carry the line number; validation errors carry the doc id.
  struct Parsed {
    Document doc;
    std::vector<Mention> mentions;
    std::vector<Entity> entities;
    std::vector<std::size_t> evidence;
    std::vector<RelationTuple> relations;
  };
  std::optional<Parsed> parsed;
  with_line_context(line_no, [&] {
    const ojson j = ojson::parse(line);
    const auto doc_id = j.at("doc_id").get<std::string>();
    std::vector<std::pair<std::size_t, std::size_t>> offsets;
    for (const auto& t : j.at("tokens")) {
      const auto s = parse_span(t);
      offsets.emplace_back(s.start, s.end);
    }
    std::vector<TokenSpan> sentences;
    for (const auto& s : j.at("sentences")) sentences.push_back(parse_span(s));
    Document doc = Document::create(doc_id, j.at("text").get<std::string>(), offsets,
                                    std::move(sentences));
    Parsed p{std::move(doc), {}, {}, {}, {}};
    if (auto it = j.find("mentions"); it != j.end()) {
      for (const auto& m : *it) {
        p.mentions.push_back(Mention{m.at("id").get<std::string>(), doc_id,
                                     TokenSpan{m.at("start").get<std::size_t>(),
                                               m.at("end").get<std::size_t>()},
                                     parse_entity_type(m.at("type").get<std::string>())});
      }
    }
    if (auto it = j.find("entities"); it != j.end()) {
      for (const auto& e : *it) {
        p.entities.push_back(Entity{e.at("id").get<std::string>(), doc_id,
                                    parse_entity_type(e.at("type").get<std::string>()),
                                    e.at("mentions").get<std::vector<std::string>>(), ""});
      }
    }
    if (auto it = j.find("evidence"); it != j.end()) {
      p.evidence = it->get<std::vector<std::size_t>>();
    }
    if (auto it = j.find("relations"); it != j.end()) {
      for (const auto& r : *it) p.relations.push_back(parse_relation(r, doc_id));
    }
    parsed.emplace(std::move(p));
    return 0;
  });
  return AnnotatedDocument::create(std::move(parsed->doc), std::move(parsed->mentions),
                                   std::move(parsed->entities), std::move(parsed->evidence),
                                   std::move(parsed->relations));
}

std::string to_json_line(const AnnotatedDocument& doc) {
  const Document& d = doc.document();
  ojson j;
  j["doc_id"] = d.doc_id();
  j["text"] = d.text();
  ojson tokens = ojson::array();
  for (const auto& t : d.tokens()) tokens.push_back(ojson::array({t.char_start, t.char_end}));
  j["tokens"] = std::move(tokens);
  ojson sentences = ojson::array();
  for (const auto& s : d.sentences()) sentences.push_back(span_json(s));
  j["sentences"] = std::move(sentences);
  ojson mentions = ojson::array();
  for (const auto& m : doc.mentions()) {
    ojson mj;
    mj["id"] = m.mention_id;
    mj["type"] = std::string(to_string(m.etype));
    mj["start"] = m.span.start;
    mj["end"] = m.span.end;
    mentions.push_back(std::move(mj));
  }
  j["mentions"] = std::move(mentions);
  ojson entities = ojson::array();
  for (const auto& e : doc.entities()) {
    ojson ej;
    ej["id"] = e.entity_id;
    ej["type"] = std::string(to_string(e.etype));
    ej["mentions"] = e.mentions;
    entities.push_back(std::move(ej));
  }
  j["entities"] = std::move(entities);
  j["evidence"] = doc.evidence_sentences();
  ojson relations = ojson::array();
  for (const auto& r : doc.relations()) relations.push_back(relation_body(r, false));
  j["relations"] = std::move(relations);
  return j.dump();
}

std::vector<AnnotatedDocument> load_corpus(const std::filesystem::path& path) {
  std::vector<AnnotatedDocument> docs;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank(lines[i])) continue;
    docs.push_back(parse_document_line(lines[i], i + 1));
  }
  return docs;
}

void write_corpus(std::span<const AnnotatedDocument> docs, const std::filesystem::path& path) {
  std::vector<std::string> lines;
  lines.reserve(docs.size());
  for (const auto& d : docs) lines.push_back(to_json_line(d));
  write_lines(lines, path);
}

std::string to_json_line(const RelationTuple& r) { return relation_body(r, true).dump(); }

RelationTuple parse_relation_line(std::string_view line, std::size_t line_no) {
  return with_line_context(line_no, [&] {
    const ojson j = ojson::parse(line);
    return parse_relation(j, j.at("doc_id").get<std::string>());
  });
}

void write_predictions(std::span<const RelationTuple> relations,
                       const std::filesystem::path& path) {
  std::vector<std::string> lines;
  lines.reserve(relations.size());
  for (const auto& r : relations) lines.push_back(to_json_line(r));
  write_lines(lines, path);
}

std::vector<RelationTuple> load_predictions(const std::filesystem::path& path) {
  std::vector<RelationTuple> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank(lines[i])) continue;
    out.push_back(parse_relation_line(lines[i], i + 1));
  }
  return out;
}

// Statistics ----------------------------------------------------------------

CorpusStats CorpusStats::from_counts(std::size_t abstracts, std::size_t relations,
                                     std::size_t entities, std::size_t mentions) {
  if (abstracts == 0) throw InvalidArgument("corpus statistics need at least one abstract");
  CorpusStats s;
  s.num_abstracts = abstracts;
  s.num_relations = relations;
  s.num_entities = entities;
  s.num_mentions = mentions;
  const auto n = static_cast<double>(abstracts);
  s.relations_per_doc = static_cast<double>(relations) / n;
  s.entities_per_doc = static_cast<double>(entities) / n;
  s.mentions_per_doc = static_cast<double>(mentions) / n;
  return s;
}

CorpusStats corpus_stats(std::span<const AnnotatedDocument> corpus) {
  std::size_t relations = 0, entities = 0, mentions = 0;
  for (const auto& d : corpus) {
    relations += d.relations().size();
    entities += d.entities().size();
    mentions += d.mentions().size();
  }
  return CorpusStats::from_counts(corpus.size(), relations, entities, mentions);
}

}  // namespace eli

namespace eli::jsonl {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

void write_lines(const std::vector<std::string>& lines, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace eli::jsonl
