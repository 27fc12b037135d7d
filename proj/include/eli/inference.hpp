#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eli/checkpoint.hpp"
#include "eli/corpus.hpp"
#include "eli/encoder.hpp"
#include "eli/nn.hpp"

namespace eli {

struct InferenceSample {
  std::vector<std::string> intervention;
  std::vector<std::string> comparator;  // empty when absent
  std::vector<std::string> outcome;
  std::vector<std::string> evidence;
  Direction label = Direction::NoDifference;
};

struct InferenceConfig {
  HeadTrainConfig train;
  double dev_fraction = 0.1;
  /// Adds the comparator as a segment between intervention and outcome.
  bool include_comparator = false;
};

/// Softmax head over the joint encoding of
/// (intervention, [comparator,] outcome, evidence sentence).
class InferenceModel {
 public:
  InferenceModel() = default;
  InferenceModel(EncoderConfig encoder, LinearHead head, bool include_comparator);

  /// Probabilities in Direction order.
  Vector probabilities(const EncoderBackend& backend, const InferenceSample& candidate) const;

  bool include_comparator() const { return include_comparator_; }
  const EncoderConfig& encoder() const { return encoder_; }
  const LinearHead& head() const { return head_; }
  Checkpoint to_checkpoint() const;
  static InferenceModel from_checkpoint(const Checkpoint& ckpt);

 private:
  EncoderConfig encoder_;
  LinearHead head_;
  bool include_comparator_ = false;
};

/// Argmax direction and its probability. The label of `candidate` is
/// ignored. Throws InvalidArgument for empty evidence.
std::pair<Direction, double> predict_direction(const InferenceModel& model,
                                               const EncoderBackend& backend,
                                               const InferenceSample& candidate);
/// Free-text form; texts are tokenized with simple_tokens.
std::pair<Direction, double> predict_direction(const InferenceModel& model,
                                               const EncoderBackend& backend,
                                               const std::string& intervention,
                                               const std::string& outcome,
                                               const std::string& evidence,
                                               const std::string& comparator = "");

struct InferenceTrainResult {
  InferenceModel model;
  double dev_macro_f1 = 0.0;
  std::size_t best_epoch = 0;
};

/// Keeps the epoch with the best dev macro-F1. Throws InvalidArgument when
/// any direction is missing from the samples.
InferenceTrainResult train_inference(std::span<const InferenceSample> samples,
                                     const EncoderBackend& backend, const InferenceConfig& config);

}  // namespace eli
