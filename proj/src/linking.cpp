#include "eli/linking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eli/error.hpp"

namespace eli {

std::string_view to_string(LinkRole r) {
  switch (r) {
    case LinkRole::Primary:
      return "primary";
    case LinkRole::Comparator:
      return "comparator";
    case LinkRole::Unrelated:
      return "unrelated";
  }
  return "unrelated";
}

LinkRole parse_link_role(std::string_view s) {
  if (s == "primary") return LinkRole::Primary;
  if (s == "comparator") return LinkRole::Comparator;
  if (s == "unrelated") return LinkRole::Unrelated;
  throw ParseError("unknown link role '" + std::string(s) + "'");
}

namespace {

Vector encode_pair(const EncoderBackend& backend, std::span<const std::string> candidate,
                   std::span<const std::string> sentence) {
  const std::vector<std::vector<std::string>> segments{{candidate.begin(), candidate.end()},
                                                       {sentence.begin(), sentence.end()}};
  return backend.encode_segments(segments);
}

const std::vector<std::string>& role_labels() {
  static const std::vector<std::string> labels{"primary", "comparator", "unrelated"};
  return labels;
}

}  // namespace

LinkerModel::LinkerModel(EncoderConfig encoder, LinearHead head)
    : encoder_(std::move(encoder)), head_(std::move(head)) {
  if (head_.outputs() != kNumLinkRoles) throw InvalidArgument("linker head must have three outputs");
}

Vector LinkerModel::probabilities(const EncoderBackend& backend, std::span<const std::string> candidate,
                                  std::span<const std::string> sentence) const {
  if (backend.dim() != head_.inputs()) throw InvalidArgument("encoder width does not match the linker");
  return head_.probabilities(encode_pair(backend, candidate, sentence));
}

Checkpoint LinkerModel::to_checkpoint() const {
  return head_checkpoint("linker", encoder_, head_, role_labels());
}

LinkerModel LinkerModel::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.labels != role_labels()) throw ParseError("linker checkpoint has unknown labels");
  return LinkerModel(ckpt.encoder, head_from_checkpoint(ckpt, "linker", kNumLinkRoles));
}

LinkerTrainResult train_linker(std::span<const LinkSample> samples, const EncoderBackend& backend,
                               const LinkerConfig& config) {
  if (samples.empty()) throw InvalidArgument("linker training set is empty");
  std::vector<Vector> x;
  std::vector<std::size_t> y;
  for (const auto& s : samples) {
    x.push_back(encode_pair(backend, s.candidate, s.sentence));
    y.push_back(static_cast<std::size_t>(s.label));
  }
  const auto [train_idx, dev_idx] = train_dev_split(x.size(), config.dev_fraction, config.train.seed);
  std::vector<Vector> tx;
  std::vector<std::size_t> ty;
  for (auto i : train_idx) {
    tx.push_back(x[i]);
    ty.push_back(y[i]);
  }
  const std::vector<std::size_t>& held = dev_idx.empty() ? train_idx : dev_idx;
  auto accuracy = [&](const LinearHead& head) {
    std::size_t correct = 0;
    for (auto i : held) {
      Eigen::Index best;
      head.logits(x[i]).maxCoeff(&best);
      correct += static_cast<std::size_t>(best) == y[i];
    }
    return static_cast<double>(correct) / static_cast<double>(held.size());
  };
  const double scale = std::sqrt(static_cast<double>(backend.dim()));
  HeadTrainResult r = train_linear_head(tx, ty, kNumLinkRoles, scale, config.train, accuracy);
  return LinkerTrainResult{LinkerModel(backend.config(), r.head), r.best_dev_score, r.best_epoch};
}

std::vector<Vector> score_candidates(const LinkerModel& model, const EncoderBackend& backend,
                                     const Document& doc, std::size_t sentence,
                                     std::span<const LinkCandidate> candidates) {
  if (candidates.empty()) throw InvalidArgument("no intervention candidates to score");
  if (sentence >= doc.num_sentences()) throw InvalidArgument("sentence index out of range");
  const auto sentence_tokens = doc.span_tokens(doc.sentences()[sentence]);
  std::vector<Vector> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    out.push_back(model.probabilities(backend, doc.span_tokens(c.span), sentence_tokens));
  }
  return out;
}

LinkChoice select_links(std::span<const LinkCandidate> candidates, std::span<const Vector> probs) {
  if (candidates.empty()) throw InvalidArgument("no intervention candidates");
  if (candidates.size() != probs.size()) throw InvalidArgument("one distribution per candidate expected");
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].span < candidates[b].span;
  });
  const auto P = static_cast<Eigen::Index>(LinkRole::Primary);
  const auto C = static_cast<Eigen::Index>(LinkRole::Comparator);
  const auto U = static_cast<Eigen::Index>(LinkRole::Unrelated);

  LinkChoice choice;
  choice.primary = order.front();
  for (auto k : order) {
    if (probs[k](P) > probs[choice.primary](P)) choice.primary = k;
  }
  const std::string& primary_entity = candidates[choice.primary].entity_id;
  std::optional<std::size_t> best;
  for (auto k : order) {
    if (candidates[k].entity_id == primary_entity) continue;
    if (!best || probs[k](C) > probs[*best](C)) best = k;
  }
  if (best && probs[*best](C) > probs[*best](U)) choice.comparator = best;
  return choice;
}

LinkResult link_evidence(const LinkerModel& model, const EncoderBackend& backend,
                         const AnnotatedDocument& doc, std::span<const std::size_t> evidence) {
  const Document& d = doc.document();
  std::vector<LinkCandidate> candidates;
  for (const auto& m : doc.mentions()) {
    if (m.etype != EntityType::Intervention) continue;
    const Entity* e = doc.entity_of_mention(m.mention_id);
    if (e != nullptr) candidates.push_back(LinkCandidate{m.mention_id, e->entity_id, m.span});
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const LinkCandidate& a, const LinkCandidate& b) { return a.span < b.span; });

  LinkResult result;
  for (std::size_t s : evidence) {
    if (s >= d.num_sentences()) throw InvalidArgument("evidence sentence index out of range");
    if (candidates.empty()) {
      ++result.skipped_sentences;
      continue;
    }
    const TokenSpan sentence = d.sentences()[s];
    EvidenceLink link;
    link.evidence_sentence = s;
    std::vector<Mention> outcome_mentions;
    for (const auto& m : doc.mentions()) {
      if (m.etype == EntityType::Outcome && sentence.contains(m.span)) outcome_mentions.push_back(m);
    }
    std::sort(outcome_mentions.begin(), outcome_mentions.end(),
              [](const Mention& a, const Mention& b) { return a.span < b.span; });
    for (const auto& m : outcome_mentions) {
      const Entity* e = doc.entity_of_mention(m.mention_id);
      if (e == nullptr) continue;
      const bool seen = std::any_of(link.outcomes.begin(), link.outcomes.end(),
                                    [&](const auto& o) { return o.first == e->entity_id; });
      if (!seen) link.outcomes.emplace_back(e->entity_id, m.span);
    }
    if (link.outcomes.empty()) continue;
    const auto probs = score_candidates(model, backend, d, s, candidates);
    const LinkChoice choice = select_links(candidates, probs);
    link.intervention = candidates[choice.primary].entity_id;
    link.intervention_span = candidates[choice.primary].span;
    link.primary_probability = probs[choice.primary](static_cast<Eigen::Index>(LinkRole::Primary));
    if (choice.comparator) {
      link.comparator = candidates[*choice.comparator].entity_id;
      link.comparator_span = candidates[*choice.comparator].span;
    }
    result.links.push_back(std::move(link));
  }
  return result;
}

}  // namespace eli
