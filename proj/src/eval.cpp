#include "eli/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "eli/clustering.hpp"
#include "eli/error.hpp"
#include "json.hpp"

namespace eli {

double harmonic_f1(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

PRF PRF::from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  PRF s;
  s.tp = tp;
  s.fp = fp;
  s.fn = fn;
  s.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  s.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  s.f1 = harmonic_f1(s.precision, s.recall);
  return s;
}

PRF PRF::from_scores(double precision, double recall) {
  PRF s;
  s.precision = precision;
  s.recall = recall;
  s.f1 = harmonic_f1(precision, recall);
  return s;
}

namespace {

std::map<std::string, const AnnotatedDocument*> by_doc_id(std::span<const AnnotatedDocument> docs) {
  std::map<std::string, const AnnotatedDocument*> out;
  for (const auto& d : docs) out.emplace(d.doc_id(), &d);
  return out;
}

// Calls f(gold, pred) for every gold document, substituting an empty
// prediction where none was supplied.
template <typename F>
void for_each_pair(std::span<const AnnotatedDocument> gold, std::span<const AnnotatedDocument> pred,
                   F&& f) {
  const auto preds = by_doc_id(pred);
  for (const auto& g : gold) {
    auto it = preds.find(g.doc_id());
    if (it != preds.end()) {
      f(g, *it->second);
    } else {
      f(g, AnnotatedDocument::bare(g.document()));
    }
  }
}

PRF add(const PRF& a, const PRF& b) { return PRF::from_counts(a.tp + b.tp, a.fp + b.fp, a.fn + b.fn); }

std::vector<TokenSpan> grounding(const AnnotatedDocument& doc, const std::string& entity_id,
                                 const std::optional<TokenSpan>& span) {
  if (span) return {*span};
  const Entity* e = doc.find_entity(entity_id);
  if (e == nullptr) return {};
  return doc.entity_spans(*e);
}

bool grounded_in(const std::vector<TokenSpan>& spans, const AnnotatedDocument& gold,
                 const std::string& gold_entity) {
  const Entity* e = gold.find_entity(gold_entity);
  if (e == nullptr || spans.empty()) return false;
  const auto gold_spans = gold.entity_spans(*e);
  return std::all_of(spans.begin(), spans.end(), [&](const TokenSpan& s) {
    return std::find(gold_spans.begin(), gold_spans.end(), s) != gold_spans.end();
  });
}

bool comparator_matches(const AnnotatedDocument& gold, const RelationTuple& g,
                        const AnnotatedDocument& pred, const RelationTuple& p) {
  if (!g.comparator && !p.comparator) return true;
  if (!g.comparator || !p.comparator) return false;
  return grounded_in(grounding(pred, *p.comparator, p.comparator_span), gold, *g.comparator);
}

bool tuple_matches(const AnnotatedDocument& gold, const RelationTuple& g,
                   const AnnotatedDocument& pred, const RelationTuple& p, RelationMode mode,
                   bool check_direction) {
  if (check_direction && g.direction != p.direction) return false;
  if (!grounded_in(grounding(pred, p.intervention, p.intervention_span), gold, g.intervention)) {
    return false;
  }
  if (!grounded_in(grounding(pred, p.outcome, p.outcome_span), gold, g.outcome)) return false;
  return mode == RelationMode::Binary || comparator_matches(gold, g, pred, p);
}

std::vector<RelationTuple> binary_gold(std::span<const RelationTuple> rels) {
  std::vector<RelationTuple> out;
  std::set<std::tuple<std::string, std::string, Direction>> seen;
  for (const auto& r : project_binary(rels)) {
    if (seen.emplace(r.intervention, r.outcome, r.direction).second) out.push_back(r);
  }
  return out;
}

std::vector<RelationTuple> binary_pred(std::span<const RelationTuple> rels) {
  std::vector<RelationTuple> out;
  std::map<std::tuple<std::string, std::string, Direction>, std::size_t> seen;
  for (const auto& r : project_binary(rels)) {
    auto key = std::make_tuple(r.intervention, r.outcome, r.direction);
    auto it = seen.find(key);
    if (it == seen.end()) {
      seen.emplace(key, out.size());
      out.push_back(r);
    } else if (r.confidence > out[it->second].confidence) {
      out[it->second] = r;
    }
  }
  return out;
}

std::vector<std::size_t> by_confidence(std::span<const RelationTuple> rels) {
  std::vector<std::size_t> order(rels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rels[a].confidence > rels[b].confidence;
  });
  return order;
}

std::string mention_key(const std::string& doc_id, const LabeledSpan& s) {
  return doc_id + "|" + std::string(to_string(s.etype)) + "|" + std::to_string(s.span.start) + ":" +
         std::to_string(s.span.end);
}

Clustering entity_clustering(const AnnotatedDocument& doc) {
  Clustering out;
  std::set<std::string> grouped;
  for (const auto& e : doc.entities()) {
    Cluster c;
    for (const auto& mid : e.mentions) {
      const Mention* m = doc.find_mention(mid);
      c.push_back(mention_key(doc.doc_id(), LabeledSpan{m->span, m->etype}));
      grouped.insert(mid);
    }
    out.push_back(std::move(c));
  }
  for (const auto& m : doc.mentions()) {
    if (grouped.count(m.mention_id) == 0) {
      out.push_back({mention_key(doc.doc_id(), LabeledSpan{m.span, m.etype})});
    }
  }
  return out;
}

}  // namespace

std::vector<LabeledSpan> labeled_spans(std::span<const Mention> mentions) {
  std::vector<LabeledSpan> out;
  out.reserve(mentions.size());
  for (const auto& m : mentions) out.push_back(LabeledSpan{m.span, m.etype});
  return out;
}

TokenScores token_prf(std::size_t num_tokens, std::span<const LabeledSpan> gold,
                      std::span<const LabeledSpan> pred) {
  auto mark = [num_tokens](std::span<const LabeledSpan> spans, EntityType type) {
    std::vector<bool> on(num_tokens, false);
    for (const auto& s : spans) {
      if (s.etype != type) continue;
      if (s.span.end > num_tokens) throw InvalidArgument("span beyond document length");
      for (std::size_t t = s.span.start; t < s.span.end; ++t) on[t] = true;
    }
    return on;
  };
  auto score = [&](EntityType type) {
    const auto g = mark(gold, type);
    const auto p = mark(pred, type);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t t = 0; t < num_tokens; ++t) {
      tp += g[t] && p[t];
      fp += !g[t] && p[t];
      fn += g[t] && !p[t];
    }
    return PRF::from_counts(tp, fp, fn);
  };
  TokenScores s;
  s.intervention = score(EntityType::Intervention);
  s.outcome = score(EntityType::Outcome);
  s.overall = add(s.intervention, s.outcome);
  return s;
}

TokenScores token_prf(std::span<const AnnotatedDocument> gold, std::span<const AnnotatedDocument> pred) {
  TokenScores total;
  for_each_pair(gold, pred, [&](const AnnotatedDocument& g, const AnnotatedDocument& p) {
    const auto gs = labeled_spans(g.mentions());
    const auto ps = labeled_spans(p.mentions());
    const TokenScores s = token_prf(g.document().num_tokens(), gs, ps);
    total.intervention = add(total.intervention, s.intervention);
    total.outcome = add(total.outcome, s.outcome);
  });
  total.overall = add(total.intervention, total.outcome);
  return total;
}

PRF entity_prf(const AnnotatedDocument& gold, std::span<const LabeledSpan> pred, bool partial) {
  auto matches = [partial](const LabeledSpan& a, const LabeledSpan& b) {
    if (a.etype != b.etype) return false;
    return partial ? a.span.overlaps(b.span) : a.span == b.span;
  };
  std::vector<LabeledSpan> gold_mentions;
  std::size_t tp = 0, fn = 0;
  for (const auto& e : gold.entities()) {
    bool found = false;
    for (const auto& s : gold.entity_spans(e)) {
      const LabeledSpan ls{s, e.etype};
      gold_mentions.push_back(ls);
      found = found || std::any_of(pred.begin(), pred.end(),
                                   [&](const LabeledSpan& p) { return matches(ls, p); });
    }
    found ? ++tp : ++fn;
  }
  std::size_t fp = 0;
  for (const auto& p : pred) {
    const bool hit = std::any_of(gold_mentions.begin(), gold_mentions.end(),
                                 [&](const LabeledSpan& g) { return matches(g, p); });
    if (!hit) ++fp;
  }
  return PRF::from_counts(tp, fp, fn);
}

PRF entity_prf(std::span<const AnnotatedDocument> gold, std::span<const AnnotatedDocument> pred,
               bool partial) {
  PRF total;
  for_each_pair(gold, pred, [&](const AnnotatedDocument& g, const AnnotatedDocument& p) {
    const auto spans = labeled_spans(p.mentions());
    total = add(total, entity_prf(g, spans, partial));
  });
  return total;
}

PRF relation_prf(const AnnotatedDocument& gold, const AnnotatedDocument& pred, RelationMode mode) {
  const std::vector<RelationTuple> gold_rels =
      mode == RelationMode::Binary ? binary_gold(gold.relations()) : gold.relations();
  const std::vector<RelationTuple> pred_rels =
      mode == RelationMode::Binary ? binary_pred(pred.relations()) : pred.relations();
  std::vector<bool> claimed(gold_rels.size(), false);
  std::size_t tp = 0;
  for (std::size_t pi : by_confidence(pred_rels)) {
    for (std::size_t gi = 0; gi < gold_rels.size(); ++gi) {
      if (claimed[gi]) continue;
      if (tuple_matches(gold, gold_rels[gi], pred, pred_rels[pi], mode, true)) {
        claimed[gi] = true;
        ++tp;
        break;
      }
    }
  }
  return PRF::from_counts(tp, pred_rels.size() - tp, gold_rels.size() - tp);
}

PRF relation_prf(std::span<const AnnotatedDocument> gold, std::span<const AnnotatedDocument> pred,
                 RelationMode mode) {
  PRF total;
  for_each_pair(gold, pred, [&](const AnnotatedDocument& g, const AnnotatedDocument& p) {
    total = add(total, relation_prf(g, p, mode));
  });
  return total;
}

std::vector<RelationTuple> project_binary(std::span<const RelationTuple> tuples) {
  std::vector<RelationTuple> out(tuples.begin(), tuples.end());
  for (auto& t : out) {
    t.comparator.reset();
    t.comparator_span.reset();
  }
  return out;
}

PRF evidence_prf(std::span<const AnnotatedDocument> gold, std::span<const AnnotatedDocument> pred) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for_each_pair(gold, pred, [&](const AnnotatedDocument& g, const AnnotatedDocument& p) {
    const std::set<std::size_t> gs(g.evidence_sentences().begin(), g.evidence_sentences().end());
    const std::set<std::size_t> ps(p.evidence_sentences().begin(), p.evidence_sentences().end());
    for (auto s : ps) gs.count(s) ? ++tp : ++fp;
    for (auto s : gs) fn += ps.count(s) == 0;
  });
  return PRF::from_counts(tp, fp, fn);
}

LinkingAccuracy linking_accuracy(std::span<const LinkOutcome> outcomes) {
  if (outcomes.empty()) throw InvalidArgument("linking accuracy needs at least one case");
  LinkingAccuracy acc;
  for (const auto& o : outcomes) {
    acc.intervention += o.intervention;
    acc.comparator += o.comparator;
    acc.outcome += o.outcome;
  }
  const auto n = static_cast<double>(outcomes.size());
  acc.intervention /= n;
  acc.comparator /= n;
  acc.outcome /= n;
  acc.cases = outcomes.size();
  return acc;
}

std::vector<LinkOutcome> link_outcomes(const AnnotatedDocument& gold, const AnnotatedDocument& pred) {
  std::vector<LinkOutcome> out;
  for (const auto& g : gold.relations()) {
    LinkOutcome o;
    std::vector<const RelationTuple*> here;
    for (const auto& p : pred.relations()) {
      if (p.evidence_sentence == g.evidence_sentence) here.push_back(&p);
    }
    if (!here.empty()) {
      const RelationTuple& first = *here.front();
      o.intervention =
          grounded_in(grounding(pred, first.intervention, first.intervention_span), gold, g.intervention);
      o.comparator = comparator_matches(gold, g, pred, first);
      o.outcome = std::any_of(here.begin(), here.end(), [&](const RelationTuple* p) {
        return grounded_in(grounding(pred, p->outcome, p->outcome_span), gold, g.outcome);
      });
    }
    out.push_back(o);
  }
  return out;
}

DirectionScores direction_prf(std::span<const Direction> gold, std::span<const Direction> pred) {
  if (gold.size() != pred.size()) throw InvalidArgument("direction label lists differ in length");
  DirectionScores s;
  s.cases = gold.size();
  std::size_t correct = 0;
  for (std::size_t c = 0; c < kNumDirections; ++c) {
    const Direction d = direction_at(c);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t k = 0; k < gold.size(); ++k) {
      tp += gold[k] == d && pred[k] == d;
      fp += gold[k] != d && pred[k] == d;
      fn += gold[k] == d && pred[k] != d;
    }
    s.per_class[c] = PRF::from_counts(tp, fp, fn);
    s.macro_f1 += s.per_class[c].f1 / static_cast<double>(kNumDirections);
    correct += tp;
  }
  s.accuracy = gold.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(gold.size());
  return s;
}

DirectionPairs pair_directions(std::span<const AnnotatedDocument> gold,
                               std::span<const AnnotatedDocument> pred) {
  DirectionPairs out;
  for_each_pair(gold, pred, [&](const AnnotatedDocument& g, const AnnotatedDocument& p) {
    std::vector<bool> used(p.relations().size(), false);
    const auto order = by_confidence(p.relations());
    for (const auto& gr : g.relations()) {
      bool paired = false;
      for (std::size_t pi : order) {
        const auto& pr = p.relations()[pi];
        if (used[pi] || pr.evidence_sentence != gr.evidence_sentence) continue;
        if (tuple_matches(g, gr, p, pr, RelationMode::Binary, false)) {
          used[pi] = true;
          out.gold.push_back(gr.direction);
          out.pred.push_back(pr.direction);
          paired = true;
          break;
        }
      }
      if (!paired) ++out.unpaired;
    }
  });
  return out;
}

// Report ------------------------------------------------------------------------

namespace {

void put(std::map<std::string, double>& m, const std::string& prefix, const PRF& s, bool counts) {
  m[prefix + ".p"] = s.precision;
  m[prefix + ".r"] = s.recall;
  m[prefix + ".f1"] = s.f1;
  if (counts) {
    m[prefix + ".tp"] = static_cast<double>(s.tp);
    m[prefix + ".fp"] = static_cast<double>(s.fp);
    m[prefix + ".fn"] = static_cast<double>(s.fn);
  }
}

std::string fixed(double v) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(2) << v;
  return o.str();
}

void row(std::ostringstream& out, const std::string& name, const PRF& s) {
  out << "  " << std::left << std::setw(16) << name << fixed(s.precision) << "  " << fixed(s.recall)
      << "  " << fixed(s.f1) << '\n';
}

}  // namespace

Report make_report(std::span<const AnnotatedDocument> gold, std::span<const AnnotatedDocument> pred,
                   const ReportFlags& flags) {
  Report r;
  auto& m = r.metrics;

  const TokenScores tokens = token_prf(gold, pred);
  put(m, "tokens.intervention", tokens.intervention, true);
  put(m, "tokens.outcome", tokens.outcome, true);
  put(m, "tokens.overall", tokens.overall, true);
  const PRF entities = entity_prf(gold, pred, false);
  put(m, "entities", entities, true);
  if (flags.partial) put(m, "entities.partial", entity_prf(gold, pred, true), true);
  const PRF evidence = evidence_prf(gold, pred);
  put(m, "evidence", evidence, true);
  const PRF triplet = relation_prf(gold, pred, RelationMode::Triplet);
  const PRF binary = relation_prf(gold, pred, RelationMode::Binary);
  put(m, "relations.triplet", triplet, true);
  put(m, "relations.binary", binary, true);

  std::vector<LinkOutcome> links;
  Clustering gold_clusters, pred_clusters;
  std::size_t gold_mentions = 0, pred_mentions = 0, gold_relations = 0, pred_relations = 0;
  for_each_pair(gold, pred, [&](const AnnotatedDocument& g, const AnnotatedDocument& p) {
    const auto l = link_outcomes(g, p);
    links.insert(links.end(), l.begin(), l.end());
    for (auto& c : entity_clustering(g)) gold_clusters.push_back(std::move(c));
    for (auto& c : entity_clustering(p)) pred_clusters.push_back(std::move(c));
    gold_mentions += g.mentions().size();
    pred_mentions += p.mentions().size();
    gold_relations += g.relations().size();
    pred_relations += p.relations().size();
  });
  LinkingAccuracy link_acc;
  if (!links.empty()) link_acc = linking_accuracy(links);
  m["linking.intervention"] = link_acc.intervention;
  m["linking.comparator"] = link_acc.comparator;
  m["linking.outcome"] = link_acc.outcome;
  m["linking.cases"] = static_cast<double>(link_acc.cases);

  const DirectionPairs pairs = pair_directions(gold, pred);
  const DirectionScores dir = direction_prf(pairs.gold, pairs.pred);
  for (std::size_t c = 0; c < kNumDirections; ++c) {
    put(m, "inference." + std::string(to_string(direction_at(c))), dir.per_class[c], false);
  }
  m["inference.macro_f1"] = dir.macro_f1;
  m["inference.accuracy"] = dir.accuracy;
  m["inference.cases"] = static_cast<double>(dir.cases);
  m["inference.unpaired"] = static_cast<double>(pairs.unpaired);

  const PRF b3 = b_cubed(gold_clusters, pred_clusters);
  const PRF mu = muc(gold_clusters, pred_clusters);
  const PRF ce = ceaf_e(gold_clusters, pred_clusters);
  put(m, "clustering.b3", b3, false);
  put(m, "clustering.muc", mu, false);
  put(m, "clustering.ceafe", ce, false);

  m["count.documents"] = static_cast<double>(gold.size());
  m["count.gold_mentions"] = static_cast<double>(gold_mentions);
  m["count.pred_mentions"] = static_cast<double>(pred_mentions);
  m["count.gold_relations"] = static_cast<double>(gold_relations);
  m["count.pred_relations"] = static_cast<double>(pred_relations);
  m["flags.gold_mentions"] = flags.gold_mentions;
  m["flags.gold_evidence"] = flags.gold_evidence;
  m["flags.gold_links"] = flags.gold_links;

  std::ostringstream out;
  out << "Inputs: mentions=" << (flags.gold_mentions ? "gold" : "predicted")
      << " evidence=" << (flags.gold_evidence ? "gold" : "predicted")
      << " links=" << (flags.gold_links ? "gold" : "predicted") << "\n\n";
  out << "Extraction          P     R     F1\n";
  row(out, "tokens", tokens.overall);
  row(out, "entities", entities);
  row(out, "evidence", evidence);
  out << "\nRelation inference  P     R     F1\n";
  row(out, "triplet", triplet);
  row(out, "binary", binary);
  out << "\nLinking             Acc\n";
  out << "  " << std::left << std::setw(16) << "interventions" << fixed(link_acc.intervention) << '\n';
  out << "  " << std::left << std::setw(16) << "comparators" << fixed(link_acc.comparator) << '\n';
  out << "  " << std::left << std::setw(16) << "outcomes" << fixed(link_acc.outcome) << '\n';
  out << "\nInference           P     R     F1\n";
  row(out, "increased", dir.per_class[0]);
  row(out, "decreased", dir.per_class[1]);
  row(out, "no difference", dir.per_class[2]);
  out << "\nGrouping            P     R     F1\n";
  row(out, "B3", b3);
  row(out, "MUC", mu);
  row(out, "CEAFe", ce);
  r.table = out.str();
  return r;
}

std::string metrics_json(const std::map<std::string, double>& metrics) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : metrics) j[k] = v;
  return j.dump(2) + "\n";
}

}  // namespace eli
