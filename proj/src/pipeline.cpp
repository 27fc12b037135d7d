#include "eli/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <thread>
#include <tuple>

#include "eli/error.hpp"
#include "eli/log.hpp"
#include "eli/supervision.hpp"
#include "json.hpp"

namespace eli {

EncoderConfig encoder_config(const Config& config) {
  EncoderConfig e;
  e.name = config.get_string("encoder.name", e.name);
  e.dim = config.get_uint("encoder.dim", e.dim);
  e.seed = config.get_uint("encoder.seed", e.seed);
  e.max_tokens = config.get_uint("encoder.max_tokens", e.max_tokens);
  e.url = config.get_string("encoder.url", e.url);
  e.frozen = config.get_bool("encoder.frozen", e.frozen);
  return e;
}

PipelineConfig PipelineConfig::from_config(const Config& config) {
  PipelineConfig p;
  p.encoder = encoder_config(config);
  p.tagger = config.get_string("models.tagger", "tagger.ckpt.json");
  p.evidence = config.get_string("models.evidence", "evidence.ckpt.json");
  p.linker = config.get_string("models.linker", "linker.ckpt.json");
  p.inference = config.get_string("models.inference", "inference.ckpt.json");
  p.grouping_threshold = config.get_double("pipeline.grouping_threshold", p.grouping_threshold);
  p.evidence_threshold = config.get_double("pipeline.evidence_threshold", p.evidence_threshold);
  p.seed = config.get_uint("seed", p.seed);
  p.workers = std::max<std::uint64_t>(1, config.get_uint("pipeline.workers", p.workers));
  if (p.grouping_threshold < -1.0 || p.grouping_threshold > 1.0) {
    throw ValidationError("pipeline.grouping_threshold must lie in [-1, 1]");
  }
  if (p.evidence_threshold < 0.0 || p.evidence_threshold > 1.0) {
    throw ValidationError("pipeline.evidence_threshold must lie in [0, 1]");
  }
  return p;
}

PipelineModels load_models(const PipelineConfig& config) {
  PipelineModels m;
  auto load = [&](const std::filesystem::path& path, const std::string& kind) {
    if (!std::filesystem::exists(path)) throw ValidationError("missing " + kind + " checkpoint " + path.string());
    Checkpoint c = load_checkpoint(path, kind);
    const bool same = c.encoder.name == config.encoder.name && c.encoder.dim == config.encoder.dim &&
                      (c.encoder.name == "hashed" ? c.encoder.seed == config.encoder.seed
                                                  : c.encoder.url == config.encoder.url);
    if (!same) {
      throw ValidationError(kind + " checkpoint " + path.string() + " was trained with a different encoder");
    }
    return c;
  };
  m.tagger = TaggerModel::from_checkpoint(load(config.tagger, "tagger"));
  m.evidence = EvidenceClassifier::from_checkpoint(load(config.evidence, "evidence"));
  m.evidence.set_threshold(config.evidence_threshold);
  m.linker = LinkerModel::from_checkpoint(load(config.linker, "linker"));
  m.inference = InferenceModel::from_checkpoint(load(config.inference, "inference"));
  m.backend = make_encoder(config.encoder);
  return m;
}

std::vector<Entity> group_mentions(const Document& doc, std::span<const Mention> mentions,
                                   const EncoderBackend& backend, double threshold) {
  std::vector<std::size_t> order(mentions.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return mentions[a].span < mentions[b].span; });
  const auto token_vecs = encode_tokens(backend, doc);

  struct Group {
    EntityType type;
    Embedding seed;
    std::vector<std::string> members;
  };
  std::vector<Group> groups;
  for (auto k : order) {
    const Mention& m = mentions[k];
    const Embedding v = encode_span(token_vecs, m.span);
    std::vector<std::size_t> candidates;
    std::vector<Embedding> seeds;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (groups[g].type == m.etype) {
        candidates.push_back(g);
        seeds.push_back(groups[g].seed);
      }
    }
    const auto assigned = assign_mentions_to_entities(std::span<const Embedding>(&v, 1), seeds, threshold);
    if (assigned.front()) {
      groups[candidates[*assigned.front()]].members.push_back(m.mention_id);
    } else {
      groups.push_back(Group{m.etype, v, {m.mention_id}});
    }
  }
  std::vector<Entity> out;
  for (auto& g : groups) {
    out.push_back(Entity{"e" + std::to_string(out.size() + 1), doc.doc_id(), g.type, std::move(g.members), ""});
  }
  return out;
}

DedupeResult dedupe_relations(std::span<const RelationTuple> tuples) {
  DedupeResult out;
  using Key = std::tuple<std::string, std::optional<std::string>, std::string>;
  std::map<Key, std::size_t> index;
  std::set<Key> flagged;
  for (const auto& t : tuples) {
    const Key key{t.intervention, t.comparator, t.outcome};
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, out.tuples.size());
      out.tuples.push_back(t);
      continue;
    }
    RelationTuple& kept = out.tuples[it->second];
    if (kept.direction != t.direction && flagged.insert(key).second) {
      out.conflicts.push_back(t.doc_id + ": conflicting directions for (" + t.intervention + ", " +
                              t.comparator.value_or("-") + ", " + t.outcome + ")");
    }
    if (t.confidence > kept.confidence) kept = t;
  }
  return out;
}

std::string RunReport::to_json() const {
  nlohmann::ordered_json j;
  j["documents"] = documents;
  j["failed"] = failures.size();
  nlohmann::ordered_json f = nlohmann::ordered_json::array();
  for (const auto& [doc, err] : failures) f.push_back({{"doc_id", doc}, {"error", err}});
  j["failures"] = std::move(f);
  j["conflicts"] = conflicts;
  j["skipped_sentences"] = skipped_sentences;
  return j.dump(2) + "\n";
}

std::vector<RelationTuple> RunOutput::relations() const {
  std::vector<RelationTuple> out;
  for (const auto& d : predictions) out.insert(out.end(), d.relations().begin(), d.relations().end());
  return out;
}

namespace {

struct DocResult {
  std::optional<AnnotatedDocument> doc;
  std::string error;
  std::vector<std::string> conflicts;
  std::size_t skipped_sentences = 0;
};

TokenSpan grounding_span(const AnnotatedDocument& doc, const std::string& entity,
                         const std::optional<TokenSpan>& explicit_span, TokenSpan sentence) {
  if (explicit_span) return *explicit_span;
  const auto spans = doc.entity_spans(*doc.find_entity(entity));
  for (const auto& s : spans) {
    if (sentence.contains(s)) return s;
  }
  return spans.front();
}

DocResult process(const PipelineModels& models, const PipelineConfig& config, const AnnotatedDocument& input,
                  const GoldSwitches& gold) {
  DocResult result;
  const Document& doc = input.document();
  const EncoderBackend& backend = *models.backend;

  std::vector<Mention> mentions;
  std::vector<Entity> entities;
  if (gold.mentions || gold.links) {
    mentions = input.mentions();
    entities = input.entities();
    // Ungrouped gold mentions still need an entity to be linkable.
    std::set<std::string> grouped;
    for (const auto& e : entities) grouped.insert(e.mentions.begin(), e.mentions.end());
    for (const auto& m : mentions) {
      if (grouped.count(m.mention_id) == 0) {
        entities.push_back(Entity{"g" + m.mention_id, doc.doc_id(), m.etype, {m.mention_id}, ""});
      }
    }
  } else {
    mentions = predict_mentions(models.tagger, backend, doc);
    entities = group_mentions(doc, mentions, backend, config.grouping_threshold);
  }

  std::vector<std::size_t> evidence;
  std::map<std::size_t, double> evidence_score;
  if (gold.evidence || gold.links) {
    evidence = input.evidence_sentences();
    for (auto s : evidence) evidence_score[s] = 1.0;
  } else {
    for (const auto& s : classify_sentences(models.evidence, backend, doc)) {
      evidence.push_back(s.sentence_index);
      evidence_score[s.sentence_index] = s.score;
    }
  }

  AnnotatedDocument grouped =
      AnnotatedDocument::create(doc, mentions, entities, evidence, {});

  std::vector<RelationTuple> tuples;
  auto infer = [&](RelationTuple r, TokenSpan i_span, std::optional<TokenSpan> c_span, TokenSpan o_span,
                   double upstream) {
    const TokenSpan sent = doc.sentences()[r.evidence_sentence];
    InferenceSample candidate;
    candidate.intervention = doc.span_tokens(i_span);
    if (c_span) candidate.comparator = doc.span_tokens(*c_span);
    candidate.outcome = doc.span_tokens(o_span);
    candidate.evidence = doc.span_tokens(sent);
    const auto [direction, prob] = predict_direction(models.inference, backend, candidate);
    r.direction = direction;
    r.confidence = std::clamp(upstream * prob, 0.0, 1.0);
    r.intervention_span = i_span;
    r.comparator_span = c_span;
    r.outcome_span = o_span;
    tuples.push_back(std::move(r));
  };

  if (gold.links) {
    for (const auto& g : input.relations()) {
      const TokenSpan sent = doc.sentences()[g.evidence_sentence];
      RelationTuple r = g;
      const TokenSpan i_span = grounding_span(input, g.intervention, g.intervention_span, sent);
      std::optional<TokenSpan> c_span;
      if (g.comparator) c_span = grounding_span(input, *g.comparator, g.comparator_span, sent);
      const TokenSpan o_span = grounding_span(input, g.outcome, g.outcome_span, sent);
      infer(std::move(r), i_span, c_span, o_span, 1.0);
    }
  } else {
    const LinkResult links = link_evidence(models.linker, backend, grouped, evidence);
    result.skipped_sentences = links.skipped_sentences;
    for (const auto& l : links.links) {
      for (const auto& [outcome, o_span] : l.outcomes) {
        RelationTuple r;
        r.doc_id = doc.doc_id();
        r.intervention = l.intervention;
        r.comparator = l.comparator;
        r.outcome = outcome;
        r.evidence_sentence = l.evidence_sentence;
        infer(std::move(r), l.intervention_span, l.comparator_span, o_span,
              evidence_score[l.evidence_sentence] * l.primary_probability);
      }
    }
  }

  DedupeResult deduped = dedupe_relations(tuples);
  result.conflicts = std::move(deduped.conflicts);
  result.doc = AnnotatedDocument::create(doc, std::move(mentions), std::move(entities), std::move(evidence),
                                         std::move(deduped.tuples));
  return result;
}

}  // namespace

RunOutput run_end_to_end(const PipelineModels& models, const PipelineConfig& config,
                         std::span<const AnnotatedDocument> docs, const GoldSwitches& gold) {
  if (!models.backend) throw InvalidArgument("pipeline models are not loaded");
  std::vector<DocResult> results(docs.size());
  auto work = [&](std::size_t k) {
    try {
      results[k] = process(models, config, docs[k], gold);
    } catch (const std::exception& e) {
      results[k] = DocResult{std::nullopt, e.what(), {}, 0};
    }
  };
  const std::size_t workers = std::min<std::size_t>(std::max<std::size_t>(1, config.workers), docs.size());
  if (workers <= 1) {
    for (std::size_t k = 0; k < docs.size(); ++k) work(k);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t k = w; k < docs.size(); k += workers) work(k);
      });
    }
    for (auto& t : pool) t.join();
  }

  RunOutput out;
  out.report.documents = docs.size();
  for (std::size_t k = 0; k < docs.size(); ++k) {
    auto& r = results[k];
    out.report.skipped_sentences += r.skipped_sentences;
    out.report.conflicts.insert(out.report.conflicts.end(), r.conflicts.begin(), r.conflicts.end());
    if (r.doc) {
      out.predictions.push_back(std::move(*r.doc));
    } else {
      warn(docs[k].doc_id() + ": " + r.error);
      out.report.failures.emplace_back(docs[k].doc_id(), r.error);
    }
  }
  return out;
}

}  // namespace eli
