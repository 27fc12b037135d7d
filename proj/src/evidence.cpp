#include "eli/evidence.hpp"

#include <cmath>
#include <sstream>

#include "eli/error.hpp"

namespace eli {

namespace {

Vector encode_sentence(const EncoderBackend& backend, std::span<const std::string> sentence) {
  const std::vector<std::vector<std::string>> segments{{sentence.begin(), sentence.end()}};
  return backend.encode_segments(segments);
}

}  // namespace

EvidenceClassifier::EvidenceClassifier(EncoderConfig encoder, LinearHead head, double threshold)
    : encoder_(std::move(encoder)), head_(std::move(head)), threshold_(threshold) {
  if (head_.outputs() != 1) throw InvalidArgument("evidence head must have one output");
}

double EvidenceClassifier::score(const EncoderBackend& backend,
                                 std::span<const std::string> sentence) const {
  if (backend.dim() != head_.inputs()) throw InvalidArgument("encoder width does not match the classifier");
  return head_.probabilities(encode_sentence(backend, sentence))(0);
}

Checkpoint EvidenceClassifier::to_checkpoint() const {
  Checkpoint c = head_checkpoint("evidence", encoder_, head_, {"other", "evidence"});
  std::ostringstream t;
  t.precision(17);
  t << threshold_;
  c.config["threshold"] = t.str();
  return c;
}

EvidenceClassifier EvidenceClassifier::from_checkpoint(const Checkpoint& ckpt) {
  return EvidenceClassifier(ckpt.encoder, head_from_checkpoint(ckpt, "evidence", 2),
                            ckpt.number("threshold"));
}

EvidenceTrainResult train_evidence_classifier(std::span<const EvidenceSample> samples,
                                              const EncoderBackend& backend,
                                              const EvidenceConfig& config) {
  std::size_t positives = 0;
  for (const auto& s : samples) positives += s.positive;
  if (positives == 0 || positives == samples.size()) {
    throw InvalidArgument("evidence training data must contain both positive and negative sentences");
  }
  std::vector<Vector> x;
  std::vector<std::size_t> y;
  for (const auto& s : samples) {
    x.push_back(encode_sentence(backend, s.sentence));
    y.push_back(s.positive ? 1 : 0);
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
      const bool pos = head.probabilities(x[i])(0) >= config.threshold;
      correct += pos == (y[i] == 1);
    }
    return static_cast<double>(correct) / static_cast<double>(held.size());
  };
  const double scale = std::sqrt(static_cast<double>(backend.dim()));
  HeadTrainResult r = train_linear_head(tx, ty, 1, scale, config.train, accuracy);
  EvidenceTrainResult out;
  out.classifier = EvidenceClassifier(backend.config(), r.head, config.threshold);
  out.dev_accuracy = r.best_dev_score;
  out.best_epoch = r.best_epoch;
  return out;
}

std::vector<EvidenceSentence> score_sentences(const EvidenceClassifier& clf,
                                              const EncoderBackend& backend, const Document& doc) {
  std::vector<EvidenceSentence> out;
  for (std::size_t s = 0; s < doc.num_sentences(); ++s) {
    const auto tokens = doc.span_tokens(doc.sentences()[s]);
    out.push_back(EvidenceSentence{doc.doc_id(), s, clf.score(backend, tokens)});
  }
  return out;
}

std::vector<EvidenceSentence> classify_sentences(const EvidenceClassifier& clf,
                                                 const EncoderBackend& backend,
                                                 const Document& doc) {
  std::vector<EvidenceSentence> out;
  for (auto& s : score_sentences(clf, backend, doc)) {
    if (s.score >= clf.threshold()) out.push_back(std::move(s));
  }
  return out;
}

}  // namespace eli
