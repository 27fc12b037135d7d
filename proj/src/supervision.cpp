#include "eli/supervision.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "eli/clustering.hpp"
#include "eli/error.hpp"
#include "eli/jsonl.hpp"
#include "eli/log.hpp"
#include "json.hpp"

namespace eli {

using ojson = nlohmann::ordered_json;

// Prompts ---------------------------------------------------------------------------

Prompt parse_prompt_line(std::string_view line, std::size_t line_no) {
  return jsonl::with_line_context(line_no, [&] {
    const ojson j = ojson::parse(line);
    Prompt p;
    p.doc_id = j.at("doc_id").get<std::string>();
    p.intervention = j.at("i").get<std::string>();
    if (auto it = j.find("c"); it != j.end() && !it->is_null()) p.comparator = it->get<std::string>();
    p.outcome = j.at("o").get<std::string>();
    p.label = parse_direction(j.at("label").get<std::string>());
    const auto& ev = j.at("evidence");
    if (!ev.is_array() || ev.size() != 2) throw ParseError("evidence must be [start, end]");
    p.evidence_start = ev[0].get<std::size_t>();
    p.evidence_end = ev[1].get<std::size_t>();
    if (p.evidence_start >= p.evidence_end) throw ParseError("evidence span is empty");
    if (p.intervention.empty() || p.outcome.empty()) throw ParseError("prompt needs i and o text");
    return p;
  });
}

std::string to_json_line(const Prompt& p) {
  ojson j;
  j["doc_id"] = p.doc_id;
  j["i"] = p.intervention;
  j["c"] = p.comparator;
  j["o"] = p.outcome;
  j["label"] = std::string(to_string(p.label));
  j["evidence"] = {p.evidence_start, p.evidence_end};
  return j.dump();
}

std::vector<Prompt> load_prompts(const std::filesystem::path& path) {
  std::vector<Prompt> out;
  const auto lines = jsonl::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!jsonl::blank(lines[i])) out.push_back(parse_prompt_line(lines[i], i + 1));
  }
  return out;
}

void write_prompts(std::span<const Prompt> prompts, const std::filesystem::path& path) {
  std::vector<std::string> lines;
  for (const auto& p : prompts) lines.push_back(to_json_line(p));
  jsonl::write_lines(lines, path);
}

// Grouping ----------------------------------------------------------------------------

std::vector<std::optional<std::size_t>> assign_mentions_to_entities(
    std::span<const Embedding> mentions, std::span<const Embedding> seeds, double threshold) {
  std::vector<std::optional<std::size_t>> out;
  out.reserve(mentions.size());
  for (const auto& m : mentions) {
    std::optional<std::size_t> best;
    double best_sim = 0.0;
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      const double sim = cosine_similarity(m, seeds[k]);
      if (!best || sim > best_sim) {
        best = k;
        best_sim = sim;
      }
    }
    out.push_back(best && best_sim >= threshold ? best : std::nullopt);
  }
  return out;
}

namespace {

std::string key_of(const Mention& m) {
  return std::string(to_string(m.etype)) + "|" + std::to_string(m.span.start) + ":" +
         std::to_string(m.span.end);
}

// Induced grouping of one gold document at `threshold`, with precomputed
// mention embeddings.
Clustering induced_grouping(const AnnotatedDocument& doc, const std::vector<Embedding>& vecs,
                            double threshold) {
  std::set<std::string> related;
  for (const auto& r : doc.relations()) {
    related.insert(r.intervention);
    if (r.comparator) related.insert(*r.comparator);
    related.insert(r.outcome);
  }
  Clustering out;
  for (EntityType type : {EntityType::Intervention, EntityType::Outcome}) {
    std::vector<Embedding> seeds;
    std::vector<std::size_t> members;
    std::vector<std::size_t> seed_cluster;
    for (const auto& e : doc.entities()) {
      if (e.etype != type || related.count(e.entity_id) == 0) continue;
      const auto it = std::find_if(doc.mentions().begin(), doc.mentions().end(),
                                   [&](const Mention& m) { return m.mention_id == e.mentions.front(); });
      seeds.push_back(vecs[static_cast<std::size_t>(it - doc.mentions().begin())]);
      seed_cluster.push_back(out.size());
      out.emplace_back();
    }
    std::vector<Embedding> mvecs;
    for (std::size_t k = 0; k < doc.mentions().size(); ++k) {
      if (doc.mentions()[k].etype != type) continue;
      members.push_back(k);
      mvecs.push_back(vecs[k]);
    }
    const auto assigned = assign_mentions_to_entities(mvecs, seeds, threshold);
    for (std::size_t k = 0; k < members.size(); ++k) {
      const std::string key = key_of(doc.mentions()[members[k]]);
      if (assigned[k]) {
        out[seed_cluster[*assigned[k]]].push_back(key);
      } else {
        out.push_back({key});
      }
    }
  }
  return out;
}

Clustering gold_grouping(const AnnotatedDocument& doc) {
  Clustering out;
  std::set<std::string> grouped;
  for (const auto& e : doc.entities()) {
    Cluster c;
    for (const auto& id : e.mentions) {
      c.push_back(key_of(*doc.find_mention(id)));
      grouped.insert(id);
    }
    out.push_back(std::move(c));
  }
  for (const auto& m : doc.mentions()) {
    if (grouped.count(m.mention_id) == 0) out.push_back({key_of(m)});
  }
  return out;
}

std::vector<Embedding> mention_vectors(const AnnotatedDocument& doc, const EncoderBackend& backend) {
  const auto tokens = encode_tokens(backend, doc.document());
  std::vector<Embedding> out;
  for (const auto& m : doc.mentions()) out.push_back(encode_span(tokens, m.span));
  return out;
}

}  // namespace

double grouping_score(std::span<const AnnotatedDocument> dev, const EncoderBackend& backend,
                      double threshold) {
  if (dev.empty()) throw InvalidArgument("grouping dev set is empty");
  double total = 0.0;
  for (const auto& d : dev) {
    const auto vecs = mention_vectors(d, backend);
    total += b_cubed(gold_grouping(d), induced_grouping(d, vecs, threshold)).f1;
  }
  return total / static_cast<double>(dev.size());
}

double tune_threshold(std::span<const AnnotatedDocument> dev, const EncoderBackend& backend,
                      std::span<const double> grid) {
  if (grid.empty()) throw InvalidArgument("threshold grid is empty");
  if (dev.empty()) throw InvalidArgument("grouping dev set is empty");
  std::vector<std::vector<Embedding>> vecs;
  for (const auto& d : dev) vecs.push_back(mention_vectors(d, backend));
  std::vector<double> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end());
  double best = sorted.front();
  double best_score = -1.0;
  for (double t : sorted) {
    double total = 0.0;
    for (std::size_t k = 0; k < dev.size(); ++k) {
      total += b_cubed(gold_grouping(dev[k]), induced_grouping(dev[k], vecs[k], t)).f1;
    }
    const double score = total / static_cast<double>(dev.size());
    info("threshold " + std::to_string(t) + " mean B3 F1 " + std::to_string(score));
    if (score > best_score) {
      best_score = score;
      best = t;
    }
  }
  return best;
}

// Evidence sampling ----------------------------------------------------------------------

std::vector<std::pair<std::size_t, bool>> sample_evidence_training(
    const Document& doc, std::span<const std::pair<std::size_t, std::size_t>> evidence_spans) {
  std::set<std::size_t> positives;
  for (const auto& [s, e] : evidence_spans) {
    for (auto idx : doc.sentences_overlapping(s, e)) positives.insert(idx);
  }
  std::vector<std::pair<std::size_t, bool>> out;
  for (auto p : positives) out.emplace_back(p, true);
  std::vector<bool> used(doc.num_sentences(), false);
  for (auto p : positives) used[p] = true;
  std::size_t missing = 0;
  for (auto p : positives) {
    const auto len = static_cast<long>(doc.sentences()[p].size());
    std::optional<std::size_t> best;
    long best_diff = 0;
    for (std::size_t s = 0; s < doc.num_sentences(); ++s) {
      if (used[s]) continue;
      const long diff = std::labs(static_cast<long>(doc.sentences()[s].size()) - len);
      if (!best || diff < best_diff) {
        best = s;
        best_diff = diff;
      }
    }
    if (best) {
      used[*best] = true;
      out.emplace_back(*best, false);
    } else {
      ++missing;
    }
  }
  if (missing > 0) {
    warn(doc.doc_id() + ": only " + std::to_string(positives.size() - missing) +
         " negative sentences for " + std::to_string(positives.size()) + " positives");
  }
  return out;
}

// Linker negatives -----------------------------------------------------------------------

std::vector<TokenSpan> synthesize_linker_negatives(const AnnotatedDocument& doc,
                                                   TokenSpan gold_intervention,
                                                   std::optional<TokenSpan> gold_comparator,
                                                   Rng& rng, std::size_t k) {
  std::vector<TokenSpan> gold{gold_intervention};
  if (gold_comparator) gold.push_back(*gold_comparator);
  // Every mention of the gold arms' entities is off limits for category 1.
  std::set<TokenSpan> gold_entity_spans(gold.begin(), gold.end());
  for (const auto& m : doc.mentions()) {
    if (m.etype != EntityType::Intervention) continue;
    if (std::find(gold.begin(), gold.end(), m.span) == gold.end()) continue;
    if (const Entity* e = doc.entity_of_mention(m.mention_id)) {
      for (const auto& s : doc.entity_spans(*e)) gold_entity_spans.insert(s);
    }
  }

  std::vector<TokenSpan> out;
  auto take = [&](TokenSpan s) {
    if (out.size() < k && std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  };

  std::vector<TokenSpan> extraneous;
  for (const auto& m : doc.mentions()) {
    if (m.etype == EntityType::Intervention && gold_entity_spans.count(m.span) == 0) {
      extraneous.push_back(m.span);
    }
  }
  std::sort(extraneous.begin(), extraneous.end());
  rng.shuffle(extraneous);
  for (const auto& s : extraneous) take(s);

  const Document& d = doc.document();
  if (gold_comparator && out.size() < k) {
    const TokenSpan a = std::min(gold_intervention, *gold_comparator);
    const TokenSpan b = std::max(gold_intervention, *gold_comparator);
    if (a.end <= b.start && b.start - a.end <= 2 && d.sentence_of(a.start) == d.sentence_of(b.end - 1)) {
      take(TokenSpan{a.start, b.end});
    }
  }

  const std::size_t n = d.num_tokens();
  for (std::size_t attempt = 0; out.size() < k && attempt < 20 * k && n > 0; ++attempt) {
    const std::size_t len = 1 + rng.below(4);
    if (len > n) continue;
    const std::size_t start = rng.below(n - len + 1);
    const TokenSpan s{start, start + len};
    if (d.sentence_of(s.start) != d.sentence_of(s.end - 1)) continue;
    const bool clash = std::any_of(gold.begin(), gold.end(), [&](const TokenSpan& g) { return g.overlaps(s); });
    if (!clash) take(s);
  }
  return out;
}

// Samples --------------------------------------------------------------------------------

void TrainingSamples::append(TrainingSamples other) {
  evidence.insert(evidence.end(), std::make_move_iterator(other.evidence.begin()),
                  std::make_move_iterator(other.evidence.end()));
  link.insert(link.end(), std::make_move_iterator(other.link.begin()),
              std::make_move_iterator(other.link.end()));
  infer.insert(infer.end(), std::make_move_iterator(other.infer.begin()),
               std::make_move_iterator(other.infer.end()));
}

void write_samples(const TrainingSamples& samples, const std::filesystem::path& path) {
  std::vector<std::string> lines;
  for (const auto& s : samples.evidence) {
    ojson j;
    j["task"] = "evidence";
    j["sentence"] = s.sentence;
    j["label"] = s.positive ? "pos" : "neg";
    lines.push_back(j.dump());
  }
  for (const auto& s : samples.link) {
    ojson j;
    j["task"] = "link";
    j["candidate"] = s.candidate;
    j["sentence"] = s.sentence;
    j["label"] = std::string(to_string(s.label));
    lines.push_back(j.dump());
  }
  for (const auto& s : samples.infer) {
    ojson j;
    j["task"] = "infer";
    j["i"] = s.intervention;
    j["c"] = s.comparator;
    j["o"] = s.outcome;
    j["evidence"] = s.evidence;
    j["label"] = std::string(to_string(s.label));
    lines.push_back(j.dump());
  }
  jsonl::write_lines(lines, path);
}

TrainingSamples load_samples(const std::filesystem::path& path) {
  TrainingSamples out;
  const auto lines = jsonl::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (jsonl::blank(lines[i])) continue;
    jsonl::with_line_context(i + 1, [&] {
      const ojson j = ojson::parse(lines[i]);
      const auto task = j.at("task").get<std::string>();
      using Tokens = std::vector<std::string>;
      if (task == "evidence") {
        const auto label = j.at("label").get<std::string>();
        if (label != "pos" && label != "neg") throw ParseError("evidence label must be pos or neg");
        out.evidence.push_back(EvidenceSample{j.at("sentence").get<Tokens>(), label == "pos"});
      } else if (task == "link") {
        out.link.push_back(LinkSample{j.at("candidate").get<Tokens>(), j.at("sentence").get<Tokens>(),
                                      parse_link_role(j.at("label").get<std::string>())});
      } else if (task == "infer") {
        InferenceSample s;
        s.intervention = j.at("i").get<Tokens>();
        s.comparator = j.at("c").get<Tokens>();
        s.outcome = j.at("o").get<Tokens>();
        s.evidence = j.at("evidence").get<Tokens>();
        s.label = parse_direction(j.at("label").get<std::string>());
        out.infer.push_back(std::move(s));
      } else {
        throw ParseError("unknown task '" + task + "'");
      }
      return 0;
    });
  }
  return out;
}

namespace {

// The mention of `entity` grounding a relation slot: the explicit span,
// else one inside the evidence sentence, else the entity's first mention.
TokenSpan slot_span(const AnnotatedDocument& doc, const std::string& entity,
                    const std::optional<TokenSpan>& explicit_span, TokenSpan sentence) {
  if (explicit_span) return *explicit_span;
  const auto spans = doc.entity_spans(*doc.find_entity(entity));
  for (const auto& s : spans) {
    if (sentence.contains(s)) return s;
  }
  return spans.front();
}

}  // namespace

TrainingSamples derive_samples(const AnnotatedDocument& doc, const SupervisionConfig& config) {
  TrainingSamples out;
  const Document& d = doc.document();

  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (auto s : doc.evidence_sentences()) {
    const TokenSpan sent = d.sentences()[s];
    spans.emplace_back(d.tokens()[sent.start].char_start, d.tokens()[sent.end - 1].char_end);
  }
  for (const auto& [s, positive] : sample_evidence_training(d, spans)) {
    out.evidence.push_back(EvidenceSample{d.span_tokens(d.sentences()[s]), positive});
  }

  Rng rng = Rng::for_document(config.seed, doc.doc_id());
  std::set<std::tuple<TokenSpan, std::size_t, LinkRole>> seen;
  auto add_link = [&](TokenSpan candidate, std::size_t sentence, LinkRole role) {
    if (!seen.emplace(candidate, sentence, role).second) return;
    out.link.push_back(LinkSample{d.span_tokens(candidate), d.span_tokens(d.sentences()[sentence]), role});
  };
  std::set<std::pair<std::size_t, std::string>> linked;
  for (const auto& r : doc.relations()) {
    const TokenSpan sent = d.sentences()[r.evidence_sentence];
    const TokenSpan i_span = slot_span(doc, r.intervention, r.intervention_span, sent);
    std::optional<TokenSpan> c_span;
    if (r.comparator) c_span = slot_span(doc, *r.comparator, r.comparator_span, sent);
    const TokenSpan o_span = slot_span(doc, r.outcome, r.outcome_span, sent);

    InferenceSample inf;
    inf.intervention = d.span_tokens(i_span);
    if (c_span) inf.comparator = d.span_tokens(*c_span);
    inf.outcome = d.span_tokens(o_span);
    inf.evidence = d.span_tokens(sent);
    inf.label = r.direction;
    out.infer.push_back(std::move(inf));

    // Arm samples once per (sentence, primary entity).
    if (!linked.emplace(r.evidence_sentence, r.intervention).second) continue;
    for (const auto& s : doc.entity_spans(*doc.find_entity(r.intervention))) {
      add_link(s, r.evidence_sentence, LinkRole::Primary);
    }
    if (r.comparator) {
      for (const auto& s : doc.entity_spans(*doc.find_entity(*r.comparator))) {
        add_link(s, r.evidence_sentence, LinkRole::Comparator);
      }
    }
    for (const auto& s : synthesize_linker_negatives(doc, i_span, c_span, rng, config.linker_negatives)) {
      add_link(s, r.evidence_sentence, LinkRole::Unrelated);
    }
  }
  return out;
}

// Distant corpus -------------------------------------------------------------------------

DistantCorpus build_training_corpus(std::span<const Document> raw_docs, std::span<const Prompt> prompts,
                                    const MentionSource& mention_source, const EncoderBackend& backend,
                                    const SupervisionConfig& config) {
  DistantCorpus out;
  std::map<std::string, std::vector<const Prompt*>> by_doc;
  std::set<std::string> known;
  for (const auto& d : raw_docs) known.insert(d.doc_id());
  for (const auto& p : prompts) {
    if (known.count(p.doc_id) == 0) {
      warn("prompt for unknown document '" + p.doc_id + "' skipped");
      ++out.skipped_prompts;
      continue;
    }
    by_doc[p.doc_id].push_back(&p);
  }

  for (const auto& doc : raw_docs) {
    std::vector<Mention> mentions = mention_source(doc);
    const auto& doc_prompts = by_doc[doc.doc_id()];
    const auto token_vecs = encode_tokens(backend, doc);

    // Prompt entities, one per distinct (type, text).
    struct Seed {
      EntityType type;
      std::string text;
      Embedding vec;
    };
    std::vector<Seed> seeds;
    auto seed_of = [&](EntityType type, const std::string& text) -> std::size_t {
      for (std::size_t k = 0; k < seeds.size(); ++k) {
        if (seeds[k].type == type && seeds[k].text == text) return k;
      }
      const auto tokens = simple_tokens(text);
      if (tokens.empty()) throw InvalidArgument("prompt text is empty");
      seeds.push_back(Seed{type, text, encode_text(backend, tokens)});
      return seeds.size() - 1;
    };
    struct Slots {
      std::size_t i;
      std::optional<std::size_t> c;
      std::size_t o;
    };
    std::vector<Slots> slots;
    for (const Prompt* p : doc_prompts) {
      Slots s{seed_of(EntityType::Intervention, p->intervention), std::nullopt,
              seed_of(EntityType::Outcome, p->outcome)};
      if (!simple_tokens(p->comparator).empty()) s.c = seed_of(EntityType::Intervention, p->comparator);
      slots.push_back(s);
    }

    std::vector<std::vector<std::string>> seed_members(seeds.size());
    std::vector<Entity> entities;
    for (EntityType type : {EntityType::Intervention, EntityType::Outcome}) {
      std::vector<std::size_t> seed_idx;
      std::vector<Embedding> seed_vecs;
      for (std::size_t k = 0; k < seeds.size(); ++k) {
        if (seeds[k].type == type) {
          seed_idx.push_back(k);
          seed_vecs.push_back(seeds[k].vec);
        }
      }
      std::vector<std::size_t> members;
      std::vector<Embedding> mvecs;
      for (std::size_t k = 0; k < mentions.size(); ++k) {
        if (mentions[k].etype != type) continue;
        members.push_back(k);
        mvecs.push_back(encode_span(token_vecs, mentions[k].span));
      }
      const auto assigned =
          assign_mentions_to_entities(mvecs, seed_vecs, config.grouping.similarity_threshold);
      for (std::size_t k = 0; k < members.size(); ++k) {
        const Mention& m = mentions[members[k]];
        if (assigned[k]) {
          seed_members[seed_idx[*assigned[k]]].push_back(m.mention_id);
        } else {
          entities.push_back(Entity{"", doc.doc_id(), type, {m.mention_id}, ""});
        }
      }
    }
    // Prompt entities come first, then the unrelated singletons.
    std::vector<std::optional<std::string>> seed_entity(seeds.size());
    std::vector<Entity> ordered;
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      if (seed_members[k].empty()) continue;
      Entity e{"e" + std::to_string(ordered.size() + 1), doc.doc_id(), seeds[k].type, seed_members[k], ""};
      seed_entity[k] = e.entity_id;
      ordered.push_back(std::move(e));
    }
    for (auto& e : entities) {
      e.entity_id = "e" + std::to_string(ordered.size() + 1);
      ordered.push_back(std::move(e));
    }

    std::set<std::size_t> evidence;
    std::vector<RelationTuple> relations;
    for (std::size_t k = 0; k < doc_prompts.size(); ++k) {
      const Prompt& p = *doc_prompts[k];
      const auto sentences = doc.sentences_overlapping(p.evidence_start, p.evidence_end);
      if (sentences.empty()) {
        warn(doc.doc_id() + ": prompt evidence span lies outside the text");
        ++out.unprojected_prompts;
        continue;
      }
      evidence.insert(sentences.begin(), sentences.end());
      const Slots& s = slots[k];
      if (!seed_entity[s.i] || !seed_entity[s.o]) {
        ++out.unprojected_prompts;
        continue;
      }
      RelationTuple r;
      r.doc_id = doc.doc_id();
      r.intervention = *seed_entity[s.i];
      if (s.c && seed_entity[*s.c] && *seed_entity[*s.c] != r.intervention) r.comparator = seed_entity[*s.c];
      r.outcome = *seed_entity[s.o];
      r.direction = p.label;
      r.evidence_sentence = sentences.front();
      const bool duplicate = std::any_of(relations.begin(), relations.end(), [&](const RelationTuple& x) {
        return x.intervention == r.intervention && x.comparator == r.comparator && x.outcome == r.outcome &&
               x.direction == r.direction && x.evidence_sentence == r.evidence_sentence;
      });
      if (!duplicate) relations.push_back(std::move(r));
    }
    AnnotatedDocument annotated =
        AnnotatedDocument::create(doc, std::move(mentions), std::move(ordered),
                                  std::vector<std::size_t>(evidence.begin(), evidence.end()), std::move(relations));
    out.samples.append(derive_samples(annotated, config));
    out.docs.push_back(std::move(annotated));
  }
  std::size_t relations = 0;
  for (const auto& d : out.docs) relations += d.relations().size();
  info("distant supervision: " + std::to_string(out.docs.size()) + " documents, " + std::to_string(relations) +
       " relations, " + std::to_string(out.skipped_prompts) + " prompts skipped, " +
       std::to_string(out.unprojected_prompts) + " not projected");
  return out;
}

}  // namespace eli
