#include "eli/tagger.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "eli/error.hpp"
#include "eli/eval.hpp"
#include "eli/log.hpp"

namespace eli {

TaggerModel::TaggerModel(EncoderConfig encoder, std::size_t input_dim, std::size_t hidden)
    : lstm(input_dim, hidden),
      encoder_(std::move(encoder)),
      input_dim_(input_dim),
      hidden_(hidden) {
  if (input_dim == 0 || hidden == 0) throw InvalidArgument("tagger sizes must be positive");
  const auto L = static_cast<Eigen::Index>(kNumTags);
  emission_weights = Matrix::Zero(L, static_cast<Eigen::Index>(2 * hidden));
  emission_bias = Matrix::Zero(L, 1);
  transitions = Matrix::Zero(L + 2, L + 2);
  grad_emission_weights = Matrix::Zero(emission_weights.rows(), emission_weights.cols());
  grad_emission_bias = Matrix::Zero(L, 1);
  grad_transitions = Matrix::Zero(L + 2, L + 2);
}

void TaggerModel::init(Rng& rng) {
  lstm.init(rng);
  glorot_init(emission_weights, rng);
  emission_bias.setZero();
  transitions.setZero();
}

Matrix TaggerModel::emissions(const Matrix& token_vectors) const {
  const Matrix h = lstm.forward(token_vectors, nullptr);
  return (h * emission_weights.transpose()).rowwise() + emission_bias.col(0).transpose();
}

Matrix TaggerModel::decoding_transitions() const {
  Matrix t = transitions;
  const auto& mask = tags_.transition_mask();
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.cols(); ++c) {
      if (!mask(r, c)) t(r, c) = -std::numeric_limits<double>::infinity();
    }
  }
  return t;
}

std::vector<std::size_t> TaggerModel::decode(const Matrix& token_vectors) const {
  if (token_vectors.rows() == 0) return {};
  return viterbi_decode(emissions(token_vectors), transitions, tags_.transition_mask());
}

double TaggerModel::accumulate(const Matrix& token_vectors, const std::vector<std::size_t>& gold) {
  BiLstm::Cache cache;
  const Matrix h = lstm.forward(token_vectors, &cache);
  const Matrix e = (h * emission_weights.transpose()).rowwise() + emission_bias.col(0).transpose();
  const CrfLoss l = crf_nll_and_gradient(e, transitions, tags_.transition_mask(), gold);
  grad_transitions += l.d_transitions;
  grad_emission_weights.noalias() += l.d_emissions.transpose() * h;
  grad_emission_bias.col(0) += l.d_emissions.colwise().sum().transpose();
  lstm.backward(cache, l.d_emissions * emission_weights);
  return l.nll;
}

double TaggerModel::loss(const Matrix& token_vectors, const std::vector<std::size_t>& gold) const {
  return -crf_log_likelihood(emissions(token_vectors), transitions, tags_.transition_mask(), gold);
}

std::vector<ParamRef> TaggerModel::params() {
  auto p = lstm.params();
  p.push_back({"emission.weights", &emission_weights, &grad_emission_weights});
  p.push_back({"emission.bias", &emission_bias, &grad_emission_bias});
  p.push_back({"crf.transitions", &transitions, &grad_transitions});
  return p;
}

Checkpoint TaggerModel::to_checkpoint() const {
  Checkpoint c;
  c.kind = "tagger";
  c.encoder = encoder_;
  c.config["input_dim"] = std::to_string(input_dim_);
  c.config["hidden"] = std::to_string(hidden_);
  c.labels = tags_.labels();
  c.params["lstm_fwd.weights"] = lstm.forward_lstm().weights;
  c.params["lstm_fwd.bias"] = lstm.forward_lstm().bias;
  c.params["lstm_bwd.weights"] = lstm.backward_lstm().weights;
  c.params["lstm_bwd.bias"] = lstm.backward_lstm().bias;
  c.params["emission.weights"] = emission_weights;
  c.params["emission.bias"] = emission_bias;
  c.params["crf.transitions"] = transitions;
  return c;
}

TaggerModel TaggerModel::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "tagger") throw ParseError("checkpoint is not a tagger");
  if (ckpt.labels != TagSet::bio().labels()) throw ParseError("tagger checkpoint has unknown labels");
  TaggerModel m(ckpt.encoder, static_cast<std::size_t>(ckpt.number("input_dim")),
                static_cast<std::size_t>(ckpt.number("hidden")));
  auto assign = [&](Matrix& dst, const std::string& name) {
    const Matrix& src = ckpt.param(name);
    if (src.rows() != dst.rows() || src.cols() != dst.cols()) {
      throw ParseError("tagger parameter '" + name + "' has the wrong shape");
    }
    dst = src;
  };
  assign(m.lstm.forward_lstm().weights, "lstm_fwd.weights");
  assign(m.lstm.forward_lstm().bias, "lstm_fwd.bias");
  assign(m.lstm.backward_lstm().weights, "lstm_bwd.weights");
  assign(m.lstm.backward_lstm().bias, "lstm_bwd.bias");
  assign(m.emission_weights, "emission.weights");
  assign(m.emission_bias, "emission.bias");
  assign(m.transitions, "crf.transitions");
  return m;
}

namespace {

Matrix stack(const std::vector<Embedding>& vecs, std::size_t from, std::size_t to) {
  const auto D = vecs.empty() ? 0 : vecs.front().size();
  Matrix m(static_cast<Eigen::Index>(to - from), D);
  for (std::size_t t = from; t < to; ++t) m.row(static_cast<Eigen::Index>(t - from)) = vecs[t].transpose();
  return m;
}

std::vector<std::size_t> sentence_labels(const AnnotatedDocument& doc, TokenSpan sentence) {
  std::vector<LabeledSpan> spans;
  for (const auto& m : doc.mentions()) {
    const std::size_t s = std::max(m.span.start, sentence.start);
    const std::size_t e = std::min(m.span.end, sentence.end);
    if (s < e) spans.push_back(LabeledSpan{TokenSpan{s - sentence.start, e - sentence.start}, m.etype});
  }
  std::sort(spans.begin(), spans.end());
  std::vector<LabeledSpan> kept;
  for (const auto& s : spans) {
    if (kept.empty() || !kept.back().span.overlaps(s.span)) kept.push_back(s);
  }
  return encode_spans_to_bio(kept, sentence.size());
}

double dev_token_f1(const TaggerModel& model, const EncoderBackend& backend,
                    std::span<const AnnotatedDocument> dev) {
  std::vector<AnnotatedDocument> preds;
  preds.reserve(dev.size());
  for (const auto& d : dev) {
    preds.push_back(
        AnnotatedDocument::create(d.document(), predict_mentions(model, backend, d.document()), {}, {}, {}));
  }
  return token_prf(dev, preds).overall.f1;
}

}  // namespace

std::vector<TaggedSentence> tagged_sentences(const EncoderBackend& backend,
                                             std::span<const AnnotatedDocument> docs) {
  std::vector<TaggedSentence> out;
  for (const auto& d : docs) {
    const auto vecs = encode_tokens(backend, d.document());
    for (const auto& s : d.document().sentences()) {
      if (s.size() == 0) continue;
      out.push_back(TaggedSentence{stack(vecs, s.start, s.end), sentence_labels(d, s)});
    }
  }
  return out;
}

TaggerTrainResult train_tagger(std::span<const AnnotatedDocument> train,
                               std::span<const AnnotatedDocument> dev, const EncoderBackend& backend,
                               const TaggerConfig& config) {
  if (train.empty()) throw InvalidArgument("tagger training set is empty");
  std::size_t interventions = 0, outcomes = 0;
  for (const auto& d : train) {
    for (const auto& m : d.mentions()) (m.etype == EntityType::Intervention ? interventions : outcomes)++;
  }
  if (interventions == 0) warn("tagger training data has no intervention mentions");
  if (outcomes == 0) warn("tagger training data has no outcome mentions");

  const auto sentences = tagged_sentences(backend, train);
  if (sentences.empty()) throw InvalidArgument("tagger training set has no tokens");

  Rng rng(config.seed);
  TaggerTrainResult result;
  result.model = TaggerModel(backend.config(), backend.dim(), config.hidden);
  result.model.init(rng);
  TaggerModel model = result.model;
  Adam adam(config.learning_rate);
  const auto params = model.params();

  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::max<std::size_t>(1, config.batch_size);
  result.best_dev_f1 = -1.0;
  std::size_t stale = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::size_t end = std::min(order.size(), b + batch);
      for (std::size_t k = b; k < end; ++k) {
        total += model.accumulate(sentences[order[k]].inputs, sentences[order[k]].labels);
      }
      scale_grads(params, 1.0 / static_cast<double>(end - b));
      adam.step(params);
    }
    const double f1 = dev.empty() ? 0.0 : dev_token_f1(model, backend, dev);
    result.dev_f1_per_epoch.push_back(f1);
    info("tagger epoch " + std::to_string(epoch + 1) + " loss " +
         std::to_string(total / static_cast<double>(sentences.size())) + " dev F1 " + std::to_string(f1));
    if (f1 > result.best_dev_f1) {
      result.best_dev_f1 = f1;
      result.best_epoch = epoch + 1;
      result.model = model;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  return result;
}

std::vector<Mention> predict_mentions(const TaggerModel& model, const EncoderBackend& backend,
                                      const Document& doc) {
  if (backend.dim() != model.encoder().dim) {
    throw InvalidArgument("encoder width does not match the tagger");
  }
  std::vector<Mention> out;
  const auto vecs = encode_tokens(backend, doc);
  for (const auto& s : doc.sentences()) {
    if (s.size() == 0) continue;
    for (const auto& ls : decode_spans(model.decode(stack(vecs, s.start, s.end)))) {
      Mention m;
      m.mention_id = "m" + std::to_string(out.size() + 1);
      m.doc_id = doc.doc_id();
      m.span = TokenSpan{ls.span.start + s.start, ls.span.end + s.start};
      m.etype = ls.etype;
      out.push_back(std::move(m));
    }
  }
  return out;
}

}  // namespace eli
