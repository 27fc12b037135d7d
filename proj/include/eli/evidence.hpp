#pragma once

#include <span>
#include <string>
#include <vector>

#include "eli/checkpoint.hpp"
#include "eli/corpus.hpp"
#include "eli/encoder.hpp"
#include "eli/nn.hpp"

namespace eli {

struct EvidenceSample {
  std::vector<std::string> sentence;
  bool positive = false;
};

struct EvidenceConfig {
  HeadTrainConfig train;
  double dev_fraction = 0.1;
  double threshold = 0.5;
};

/// Logistic layer over the pooled sentence encoding.
class EvidenceClassifier {
 public:
  EvidenceClassifier() = default;
  EvidenceClassifier(EncoderConfig encoder, LinearHead head, double threshold);

  /// Probability in [0, 1] that the sentence reports a finding.
  double score(const EncoderBackend& backend, std::span<const std::string> sentence) const;

  double threshold() const { return threshold_; }
  void set_threshold(double t) { threshold_ = t; }
  const EncoderConfig& encoder() const { return encoder_; }
  const LinearHead& head() const { return head_; }

  Checkpoint to_checkpoint() const;
  static EvidenceClassifier from_checkpoint(const Checkpoint& ckpt);

 private:
  EncoderConfig encoder_;
  LinearHead head_;
  double threshold_ = 0.5;
};

struct EvidenceTrainResult {
  EvidenceClassifier classifier;
  double dev_accuracy = 0.0;
  std::size_t best_epoch = 0;
};

/// Holds out `dev_fraction` of the samples and keeps the epoch with the
/// best dev accuracy. Throws InvalidArgument unless both labels occur.
EvidenceTrainResult train_evidence_classifier(std::span<const EvidenceSample> samples,
                                              const EncoderBackend& backend,
                                              const EvidenceConfig& config);

/// Scores of every sentence, in order.
std::vector<EvidenceSentence> score_sentences(const EvidenceClassifier& clf,
                                              const EncoderBackend& backend, const Document& doc);

/// Sentences scoring at or above the threshold, by index.
std::vector<EvidenceSentence> classify_sentences(const EvidenceClassifier& clf,
                                                 const EncoderBackend& backend,
                                                 const Document& doc);

}  // namespace eli
