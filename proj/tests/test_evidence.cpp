#include "doctest.h"
#include "eli/error.hpp"
#include "eli/evidence.hpp"

using namespace eli;

namespace {

// Findings use a reporting verb and a p-value; background sentences do not.
std::vector<EvidenceSample> separable_samples(std::size_t n, std::uint64_t seed) {
  const std::vector<std::string> subjects = {"pain", "nausea", "blood pressure", "mortality", "sleep quality",
                                             "fatigue", "glucose", "weight"};
  const std::vector<std::string> findings = {"{} was significantly reduced ( p < 0.01 ) .",
                                             "{} increased significantly compared with placebo ( p = 0.02 ) .",
                                             "There was no significant difference in {} ( p = 0.40 ) ."};
  const std::vector<std::string> background = {"{} is a common problem in older adults .",
                                               "We recruited patients with chronic {} from two clinics .",
                                               "The trial was registered before enrolment began ."};
  Rng rng(seed);
  std::vector<EvidenceSample> out;
  for (std::size_t k = 0; k < n; ++k) {
    const bool pos = k % 2 == 0;
    std::string t = rng.pick(pos ? findings : background);
    if (auto at = t.find("{}"); at != std::string::npos) t.replace(at, 2, rng.pick(subjects));
    out.push_back({simple_tokens(t), pos});
  }
  return out;
}

EvidenceTrainResult train_fixture(const HashedBackend& backend) {
  EvidenceConfig cfg;
  cfg.train.learning_rate = 0.01;
  return train_evidence_classifier(separable_samples(400, 3), backend, cfg);
}

}  // namespace

TEST_CASE("evidence classifier separates a separable fixture") {
  const HashedBackend backend(64, 13);
  const auto r = train_fixture(backend);
  CHECK(r.dev_accuracy >= 0.95);

  const auto held_out = separable_samples(200, 99);
  std::size_t hits = 0;
  for (const auto& s : held_out) {
    const double p = r.classifier.score(backend, s.sentence);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    hits += (p >= 0.5) == s.positive;
  }
  CHECK(static_cast<double>(hits) / 200.0 >= 0.95);

  SUBCASE("lowering the threshold never lowers recall") {
    std::vector<double> scores;
    for (const auto& s : held_out) scores.push_back(r.classifier.score(backend, s.sentence));
    double previous = -1.0;
    for (int k = 100; k >= 0; --k) {
      const double t = k / 100.0;
      std::size_t tp = 0, positives = 0;
      for (std::size_t i = 0; i < held_out.size(); ++i) {
        positives += held_out[i].positive;
        tp += held_out[i].positive && scores[i] >= t;
      }
      const double recall = static_cast<double>(tp) / static_cast<double>(positives);
      CHECK(recall >= previous);
      previous = recall;
    }
  }

  SUBCASE("checkpoint round-trip") {
    const auto back = EvidenceClassifier::from_checkpoint(r.classifier.to_checkpoint());
    CHECK(back.threshold() == r.classifier.threshold());
    CHECK(back.score(backend, held_out[0].sentence) == r.classifier.score(backend, held_out[0].sentence));
  }
}

TEST_CASE("evidence training is deterministic") {
  const HashedBackend backend(32, 13);
  const auto samples = separable_samples(60, 4);
  const auto a = train_evidence_classifier(samples, backend, EvidenceConfig{});
  const auto b = train_evidence_classifier(samples, backend, EvidenceConfig{});
  CHECK(a.classifier.head().weights == b.classifier.head().weights);
}

TEST_CASE("single-class evidence data is rejected") {
  const HashedBackend backend(32, 13);
  auto samples = separable_samples(20, 5);
  for (auto& s : samples) s.positive = true;
  CHECK_THROWS_AS(train_evidence_classifier(samples, backend, EvidenceConfig{}), InvalidArgument);
  CHECK_THROWS_AS(train_evidence_classifier({}, backend, EvidenceConfig{}), InvalidArgument);
}

TEST_CASE("sentence classification over a document") {
  const HashedBackend backend(64, 13);
  const auto r = train_fixture(backend);
  const Document doc = Document::from_text(
      "d",
      "Chronic pain is a common problem in older adults . We recruited patients with chronic pain from two "
      "clinics . Fatigue was significantly reduced ( p < 0.01 ) . The trial was registered before enrolment "
      "began .");
  const auto all = score_sentences(r.classifier, backend, doc);
  REQUIRE(all.size() == 4);
  const auto picked = classify_sentences(r.classifier, backend, doc);
  REQUIRE(picked.size() == 1);
  CHECK(picked[0].sentence_index == 2);
  CHECK(picked[0].doc_id == "d");
  CHECK(classify_sentences(r.classifier, backend, doc).size() == 1);
  CHECK(score_sentences(r.classifier, backend, Document::from_text("e", "")).empty());

  EvidenceClassifier everything = r.classifier;
  everything.set_threshold(0.0);
  CHECK(classify_sentences(everything, backend, doc).size() == 4);
}
