#include "eli/inference.hpp"

#include <array>
#include <cmath>

#include "eli/error.hpp"
#include "eli/eval.hpp"

namespace eli {

namespace {

Vector encode_candidate(const EncoderBackend& backend, const InferenceSample& s, bool with_comparator) {
  std::vector<std::vector<std::string>> segments{s.intervention};
  if (with_comparator) segments.push_back(s.comparator);
  segments.push_back(s.outcome);
  segments.push_back(s.evidence);
  return backend.encode_segments(segments);
}

std::vector<std::string> direction_labels() {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < kNumDirections; ++c) out.emplace_back(to_string(direction_at(c)));
  return out;
}

}  // namespace

InferenceModel::InferenceModel(EncoderConfig encoder, LinearHead head, bool include_comparator)
    : encoder_(std::move(encoder)), head_(std::move(head)), include_comparator_(include_comparator) {
  if (head_.outputs() != kNumDirections) throw InvalidArgument("inference head must have three outputs");
}

Vector InferenceModel::probabilities(const EncoderBackend& backend, const InferenceSample& candidate) const {
  if (backend.dim() != head_.inputs()) throw InvalidArgument("encoder width does not match the inference model");
  return head_.probabilities(encode_candidate(backend, candidate, include_comparator_));
}

Checkpoint InferenceModel::to_checkpoint() const {
  Checkpoint c = head_checkpoint("inference", encoder_, head_, direction_labels());
  c.config["include_comparator"] = include_comparator_ ? "1" : "0";
  return c;
}

InferenceModel InferenceModel::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.labels != direction_labels()) throw ParseError("inference checkpoint has unknown labels");
  return InferenceModel(ckpt.encoder, head_from_checkpoint(ckpt, "inference", kNumDirections),
                        ckpt.number("include_comparator") != 0.0);
}

std::pair<Direction, double> predict_direction(const InferenceModel& model, const EncoderBackend& backend,
                                               const InferenceSample& candidate) {
  if (candidate.evidence.empty()) throw InvalidArgument("evidence text is empty");
  const Vector p = model.probabilities(backend, candidate);
  Eigen::Index best;
  const double prob = p.maxCoeff(&best);
  return {direction_at(static_cast<std::size_t>(best)), prob};
}

std::pair<Direction, double> predict_direction(const InferenceModel& model, const EncoderBackend& backend,
                                               const std::string& intervention, const std::string& outcome,
                                               const std::string& evidence, const std::string& comparator) {
  InferenceSample s;
  s.intervention = simple_tokens(intervention);
  s.comparator = simple_tokens(comparator);
  s.outcome = simple_tokens(outcome);
  s.evidence = simple_tokens(evidence);
  return predict_direction(model, backend, s);
}

InferenceTrainResult train_inference(std::span<const InferenceSample> samples,
                                     const EncoderBackend& backend, const InferenceConfig& config) {
  std::array<std::size_t, kNumDirections> counts{};
  for (const auto& s : samples) ++counts[index_of(s.label)];
  for (std::size_t c = 0; c < kNumDirections; ++c) {
    if (counts[c] == 0) {
      throw InvalidArgument("inference training data has no '" + std::string(to_string(direction_at(c))) +
                            "' samples");
    }
  }
  std::vector<Vector> x;
  std::vector<std::size_t> y;
  for (const auto& s : samples) {
    x.push_back(encode_candidate(backend, s, config.include_comparator));
    y.push_back(index_of(s.label));
  }
  const auto [train_idx, dev_idx] = train_dev_split(x.size(), config.dev_fraction, config.train.seed);
  std::vector<Vector> tx;
  std::vector<std::size_t> ty;
  for (auto i : train_idx) {
    tx.push_back(x[i]);
    ty.push_back(y[i]);
  }
  const std::vector<std::size_t>& held = dev_idx.empty() ? train_idx : dev_idx;
  auto macro_f1 = [&](const LinearHead& head) {
    std::vector<Direction> gold, pred;
    for (auto i : held) {
      Eigen::Index best;
      head.logits(x[i]).maxCoeff(&best);
      gold.push_back(direction_at(y[i]));
      pred.push_back(direction_at(static_cast<std::size_t>(best)));
    }
    return direction_prf(gold, pred).macro_f1;
  };
  const double scale = std::sqrt(static_cast<double>(backend.dim()));
  HeadTrainResult r = train_linear_head(tx, ty, kNumDirections, scale, config.train, macro_f1);
  return InferenceTrainResult{InferenceModel(backend.config(), r.head, config.include_comparator),
                              r.best_dev_score, r.best_epoch};
}

}  // namespace eli
