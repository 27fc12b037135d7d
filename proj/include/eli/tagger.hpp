#pragma once

#include <span>
#include <vector>

#include "eli/checkpoint.hpp"
#include "eli/corpus.hpp"
#include "eli/crf.hpp"
#include "eli/encoder.hpp"
#include "eli/nn.hpp"

namespace eli {

struct TaggerConfig {
  std::size_t hidden = 32;
  std::size_t epochs = 20;
  double learning_rate = 1e-3;
  std::size_t batch_size = 8;
  std::size_t patience = 5;
  std::uint64_t seed = 7;
};

/// BiLSTM-CRF over frozen encoder token vectors, tagging one sentence at a
/// time with the joint intervention/outcome BIO set.
class TaggerModel {
 public:
  TaggerModel() = default;
  TaggerModel(EncoderConfig encoder, std::size_t input_dim, std::size_t hidden);

  void init(Rng& rng);

  /// T x 5 emission scores for one sentence of token vectors (T x D).
  Matrix emissions(const Matrix& token_vectors) const;
  /// Learned transitions with masked-off entries set to -infinity.
  Matrix decoding_transitions() const;
  std::vector<std::size_t> decode(const Matrix& token_vectors) const;

  /// Adds the gradient of the sentence's CRF negative log-likelihood;
  /// returns the loss.
  double accumulate(const Matrix& token_vectors, const std::vector<std::size_t>& gold);
  /// Loss only, for gradient checks.
  double loss(const Matrix& token_vectors, const std::vector<std::size_t>& gold) const;

  std::vector<ParamRef> params();

  Checkpoint to_checkpoint() const;
  static TaggerModel from_checkpoint(const Checkpoint& ckpt);

  const EncoderConfig& encoder() const { return encoder_; }
  const TagSet& tags() const { return tags_; }

  BiLstm lstm;
  Matrix emission_weights;  // 5 x 2H
  Matrix emission_bias;     // 5 x 1
  Matrix transitions;       // 7 x 7
  Matrix grad_emission_weights;
  Matrix grad_emission_bias;
  Matrix grad_transitions;

 private:
  EncoderConfig encoder_;
  TagSet tags_ = TagSet::bio();
  std::size_t input_dim_ = 0;
  std::size_t hidden_ = 0;
};

/// Encoder inputs and gold BIO labels for every sentence of a corpus.
/// Mentions crossing a sentence boundary are clipped to each sentence;
/// where an intervention and an outcome overlap, the earlier span wins.
struct TaggedSentence {
  Matrix inputs;
  std::vector<std::size_t> labels;
};
std::vector<TaggedSentence> tagged_sentences(const EncoderBackend& backend,
                                             std::span<const AnnotatedDocument> docs);

struct TaggerTrainResult {
  TaggerModel model;
  double best_dev_f1 = 0.0;
  std::size_t best_epoch = 0;
  std::vector<double> dev_f1_per_epoch;
};

/// Adam on the sentence-level CRF objective; keeps the epoch with the best
/// dev token F1 and stops after `patience` epochs without improvement.
/// Throws InvalidArgument on an empty training set.
TaggerTrainResult train_tagger(std::span<const AnnotatedDocument> train,
                               std::span<const AnnotatedDocument> dev,
                               const EncoderBackend& backend, const TaggerConfig& config);

/// Viterbi-decoded mentions, sentence by sentence, numbered m1, m2, ...
std::vector<Mention> predict_mentions(const TaggerModel& model, const EncoderBackend& backend,
                                      const Document& doc);

}  // namespace eli
