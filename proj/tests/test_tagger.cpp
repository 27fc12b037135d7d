#include "doctest.h"
#include "eli/error.hpp"
#include "eli/eval.hpp"
#include "eli/log.hpp"
#include "eli/synth.hpp"
#include "eli/tagger.hpp"
#include "oracles.hpp"

using namespace eli;

namespace {

SynthCorpus small_corpus(std::size_t train, std::size_t dev) {
  SynthConfig c;
  c.train = train;
  c.dev = dev;
  c.test = 0;
  return synth_corpus(c);
}

// Copies of `docs` keeping only intervention annotations.
std::vector<AnnotatedDocument> interventions_only(const std::vector<AnnotatedDocument>& docs) {
  std::vector<AnnotatedDocument> out;
  for (const auto& d : docs) {
    std::vector<Mention> ms;
    for (const auto& m : d.mentions()) {
      if (m.etype == EntityType::Intervention) ms.push_back(m);
    }
    std::vector<Entity> es;
    for (const auto& e : d.entities()) {
      if (e.etype == EntityType::Intervention) es.push_back(e);
    }
    out.push_back(AnnotatedDocument::create(d.document(), ms, es, {}, {}));
  }
  return out;
}

}  // namespace

TEST_CASE("tagger reaches 0.90 dev token F1 on 200 synthetic abstracts within 20 epochs") {
  const SynthCorpus corpus = small_corpus(200, 40);
  const HashedBackend backend(64, 13);
  TaggerConfig cfg;
  cfg.epochs = 20;
  const TaggerTrainResult r = train_tagger(corpus.train.docs, corpus.dev.docs, backend, cfg);
  CHECK(r.best_dev_f1 >= 0.90);
  CHECK(r.best_epoch <= 20);
  CHECK(r.dev_f1_per_epoch.size() <= 20);

  // The returned model is the best-dev one.
  std::vector<AnnotatedDocument> preds;
  for (const auto& d : corpus.dev.docs) {
    const auto ms = predict_mentions(r.model, backend, d.document());
    preds.push_back(AnnotatedDocument::create(d.document(), ms, {}, {}, {}));
  }
  CHECK(token_prf(corpus.dev.docs, preds).overall.f1 == doctest::Approx(r.best_dev_f1).epsilon(1e-12));

  SUBCASE("checkpoint round-trip predicts identically") {
    const TaggerModel back = TaggerModel::from_checkpoint(r.model.to_checkpoint());
    for (const auto& d : corpus.dev.docs) {
      CHECK(predict_mentions(back, backend, d.document()) == predict_mentions(r.model, backend, d.document()));
    }
  }
}

TEST_CASE("tagger training is deterministic for a seed") {
  const SynthCorpus corpus = small_corpus(20, 5);
  const HashedBackend backend(32, 13);
  TaggerConfig cfg;
  cfg.epochs = 3;
  cfg.hidden = 8;
  const auto a = train_tagger(corpus.train.docs, corpus.dev.docs, backend, cfg);
  const auto b = train_tagger(corpus.train.docs, corpus.dev.docs, backend, cfg);
  CHECK(a.dev_f1_per_epoch == b.dev_f1_per_epoch);
  CHECK(a.model.transitions == b.model.transitions);
  CHECK(a.model.emission_weights == b.model.emission_weights);
}

TEST_CASE("tagger trains with a missing mention type and warns") {
  const SynthCorpus corpus = small_corpus(10, 0);
  const HashedBackend backend(32, 13);
  TaggerConfig cfg;
  cfg.epochs = 2;
  cfg.hidden = 4;
  WarningCapture capture;
  const auto r = train_tagger(interventions_only(corpus.train.docs), {}, backend, cfg);
  CHECK(capture.contains("no outcome mentions"));
  CHECK(r.dev_f1_per_epoch.size() == 2);
}

TEST_CASE("tagger rejects an empty training set") {
  const HashedBackend backend(32, 13);
  CHECK_THROWS_AS(train_tagger({}, {}, backend, TaggerConfig{}), InvalidArgument);
}

TEST_CASE("predicted mentions are Viterbi paths sentence by sentence") {
  const HashedBackend backend(16, 13);
  TaggerModel model(backend.config(), 16, 3);
  Rng rng(8);
  model.init(rng);
  for (Eigen::Index i = 0; i < model.emission_weights.size(); ++i) model.emission_weights.data()[i] *= 8.0;
  const Document doc = Document::from_text("d", "Metformin lowered glucose . Placebo did not .");
  const auto vecs = encode_tokens(backend, doc);
  std::vector<LabeledSpan> want;
  for (const auto& s : doc.sentences()) {
    Matrix x(static_cast<Eigen::Index>(s.size()), 16);
    for (std::size_t t = s.start; t < s.end; ++t) x.row(static_cast<Eigen::Index>(t - s.start)) = vecs[t].transpose();
    const auto path = oracle::brute_viterbi(model.emissions(x), model.transitions, TagSet::bio().transition_mask());
    for (const auto& ls : decode_spans(path)) want.push_back({{ls.span.start + s.start, ls.span.end + s.start}, ls.etype});
  }
  const auto got = predict_mentions(model, backend, doc);
  CHECK(labeled_spans(got) == want);
  for (std::size_t k = 0; k < got.size(); ++k) CHECK(got[k].mention_id == "m" + std::to_string(k + 1));

  CHECK(predict_mentions(model, backend, Document::from_text("empty", "")).empty());
}

TEST_CASE("decoding transitions are -inf exactly where the mask forbids") {
  const HashedBackend backend(8, 1);
  TaggerModel model(backend.config(), 8, 2);
  Rng rng(2);
  model.init(rng);
  const Matrix t = model.decoding_transitions();
  const TagSet bio = TagSet::bio();
  const auto& mask = bio.transition_mask();
  for (Eigen::Index r = 0; r < 7; ++r) {
    for (Eigen::Index c = 0; c < 7; ++c) {
      CHECK(std::isinf(t(r, c)) == !mask(r, c));
    }
  }
  CHECK(model.transitions.allFinite());
}
