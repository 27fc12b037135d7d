#include <algorithm>
#include <filesystem>

#include "doctest.h"
#include "eli/clustering.hpp"
#include "eli/error.hpp"
#include "eli/eval.hpp"
#include "eli/log.hpp"
#include "eli/supervision.hpp"
#include "eli/synth.hpp"
#include "oracles.hpp"

using namespace eli;
namespace fs = std::filesystem;

namespace {

Embedding vec(std::initializer_list<double> xs) {
  Embedding e(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) e[i++] = x;
  return e;
}

std::vector<Embedding> vecs(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<Embedding> out;
  for (auto r : rows) out.push_back(vec(r));
  return out;
}

Mention mention(const std::string& id, std::size_t s, std::size_t e, EntityType t, const std::string& doc = "d") {
  return Mention{id, doc, TokenSpan{s, e}, t};
}

std::pair<std::size_t, std::size_t> chars_of(const Document& d, std::size_t sentence) {
  const TokenSpan s = d.sentences()[sentence];
  return {d.tokens()[s.start].char_start, d.tokens()[s.end - 1].char_end};
}

}  // namespace

TEST_CASE("prompt records round-trip") {
  const Prompt p{"d1", "aspirin", "placebo", "pain", Direction::Decreased, 10, 42};
  CHECK(parse_prompt_line(to_json_line(p)) == p);
  const fs::path path = fs::temp_directory_path() / "eli_unit_prompts.jsonl";
  write_prompts(std::vector<Prompt>{p, p}, path);
  CHECK(load_prompts(path) == std::vector<Prompt>{p, p});
  CHECK_THROWS(parse_prompt_line(R"({"doc_id":"d","i":"a","c":"","o":"b","label":"up","evidence":[0,1]})"));
}

TEST_CASE("mention assignment") {
  const auto seeds = vecs({{1, 0}, {0, 1}});
  SUBCASE("closest seed above threshold") {
    const auto a = assign_mentions_to_entities(vecs({{0.9, 0.1}}), seeds, 0.5);
    REQUIRE(a[0].has_value());
    CHECK(*a[0] == 0);
  }
  SUBCASE("equal to a seed joins it at any threshold up to 1") {
    const auto a = assign_mentions_to_entities(vecs({{0, 3}}), seeds, 1.0);
    REQUIRE(a[0].has_value());
    CHECK(*a[0] == 1);
  }
  SUBCASE("all below threshold become new entities") {
    const auto a = assign_mentions_to_entities(vecs({{1, 1}, {1, 1.1}}), seeds, 0.9);
    CHECK_FALSE(a[0].has_value());
    CHECK_FALSE(a[1].has_value());
  }
  SUBCASE("no seeds") {
    const auto a = assign_mentions_to_entities(vecs({{1, 0}}), std::vector<Embedding>{}, 0.0);
    CHECK_FALSE(a[0].has_value());
  }
  SUBCASE("ties go to the earliest seed") {
    const auto a = assign_mentions_to_entities(vecs({{1, 1}}), seeds, 0.5);
    REQUIRE(a[0].has_value());
    CHECK(*a[0] == 0);
  }
}

TEST_CASE("property: assignment ignores positive rescaling and only shrinks with the threshold") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Embedding> ms, ss;
    const std::size_t nm = 1 + rng.below(6), ns = rng.below(4);
    for (std::size_t k = 0; k < nm + ns; ++k) {
      Embedding e(3);
      e << rng.uniform(0.05, 1), rng.uniform(-1, 1), rng.uniform(-1, 1);
      (k < nm ? ms : ss).push_back(e);
    }
    const double t = rng.uniform(-1, 1);
    std::vector<Embedding> ms2 = ms, ss2 = ss;
    for (auto& e : ms2) e *= rng.uniform(0.1, 10);
    for (auto& e : ss2) e *= rng.uniform(0.1, 10);
    CHECK(assign_mentions_to_entities(ms, ss, t) == assign_mentions_to_entities(ms2, ss2, t));
    std::size_t previous = nm + 1;
    for (int k = -10; k <= 10; ++k) {
      std::size_t n = 0;
      for (const auto& a : assign_mentions_to_entities(ms, ss, k / 10.0)) n += a.has_value();
      CHECK(n <= previous);
      previous = n;
    }
  }
}

TEST_CASE("threshold tuning") {
  const HashedBackend backend(64, 13);
  // e1 = metformin (twice), e2 = placebo, e3 = glucose; "oral metformin
  // slow release" is a separate, unrelated intervention.
  const Document doc = Document::from_text(
      "t", "Metformin versus placebo lowered glucose . Patients took oral metformin slow release . metformin helped .");
  const auto I = EntityType::Intervention;
  std::vector<Mention> ms = {mention("m1", 0, 1, I, "t"), mention("m2", 2, 3, I, "t"),
                             mention("m3", 4, 5, EntityType::Outcome, "t"), mention("m4", 8, 12, I, "t"),
                             mention("m5", 13, 14, I, "t")};
  std::vector<Entity> es = {{"e1", "t", I, {"m1", "m5"}, ""},
                            {"e2", "t", I, {"m2"}, ""},
                            {"e3", "t", EntityType::Outcome, {"m3"}, ""},
                            {"e4", "t", I, {"m4"}, ""}};
  RelationTuple r{"t", "e1", "e2", "e3", Direction::Decreased, 0, 1.0, {}, {}, {}};
  const auto gold = AnnotatedDocument::create(doc, ms, es, {0}, {r});
  const std::vector<AnnotatedDocument> dev = {gold};

  // Preconditions that make the fixture meaningful.
  const double near = cosine_similarity(encode_span(backend, doc, {8, 12}), encode_span(backend, doc, {0, 1}));
  const double far = cosine_similarity(encode_span(backend, doc, {8, 12}), encode_span(backend, doc, {2, 3}));
  REQUIRE(near >= 0.3);
  REQUIRE(near < 0.7);
  REQUIRE(far < near);
  REQUIRE(cosine_similarity(encode_span(backend, doc, {13, 14}), encode_span(backend, doc, {0, 1})) >= 0.7);
  REQUIRE(cosine_similarity(encode_span(backend, doc, {2, 3}), encode_span(backend, doc, {0, 1})) < 0.3);

  const oracle::Clustering exact = {{"intervention|0:1", "intervention|13:14"}, {"intervention|2:3"}, {"outcome|4:5"}, {"intervention|8:12"}};
  const oracle::Clustering merged = {{"intervention|0:1", "intervention|13:14", "intervention|8:12"}, {"intervention|2:3"}, {"outcome|4:5"}};
  auto f1 = [](oracle::Scores s) { return 2 * s.p * s.r / (s.p + s.r); };
  CHECK(grouping_score(dev, backend, 0.7) == doctest::Approx(f1(oracle::b_cubed(exact, exact))));
  CHECK(grouping_score(dev, backend, 0.3) == doctest::Approx(f1(oracle::b_cubed(exact, merged))));
  CHECK(grouping_score(dev, backend, 0.3) < 1.0);

  const std::vector<double> grid = {0.3, 0.7};
  CHECK(tune_threshold(dev, backend, grid) == 0.7);
  const std::vector<double> single = {0.0};
  CHECK(tune_threshold(dev, backend, single) == 0.0);
  // 0.7 and 0.75 both recover the gold grouping; the smaller wins.
  const std::vector<double> tied = {0.75, 0.7};
  CHECK(tune_threshold(dev, backend, tied) == 0.7);
  CHECK_THROWS_AS(tune_threshold(dev, backend, std::vector<double>{}), InvalidArgument);
}

TEST_CASE("evidence sampling") {
  // Sentence token lengths: 6, 3, 5, 9.
  const Document doc = Document::from_text(
      "s", "a b c d e . f g . h i j k . l m n o p q r s .");
  REQUIRE(doc.num_sentences() == 4);
  SUBCASE("one positive draws the closest-length negative") {
    const std::vector<std::pair<std::size_t, std::size_t>> spans = {chars_of(doc, 2)};
    const auto s = sample_evidence_training(doc, spans);
    REQUIRE(s.size() == 2);
    CHECK(s[0] == std::make_pair<std::size_t, bool>(2, true));
    CHECK(s[1] == std::make_pair<std::size_t, bool>(0, false));
  }
  SUBCASE("a straddling span marks both sentences") {
    const std::vector<std::pair<std::size_t, std::size_t>> spans = {{chars_of(doc, 1).first + 2, chars_of(doc, 2).first + 1}};
    const auto s = sample_evidence_training(doc, spans);
    std::vector<std::size_t> pos;
    for (const auto& [idx, p] : s) {
      if (p) pos.push_back(idx);
    }
    CHECK(pos == std::vector<std::size_t>{1, 2});
    CHECK(s.size() == 4);
  }
  SUBCASE("all positive leaves no negatives and warns") {
    const std::vector<std::pair<std::size_t, std::size_t>> spans = {{0, doc.text_length()}};
    WarningCapture capture;
    const auto s = sample_evidence_training(doc, spans);
    CHECK(s.size() == 4);
    CHECK(std::all_of(s.begin(), s.end(), [](const auto& x) { return x.second; }));
    CHECK(capture.messages().size() == 1);
  }
}

TEST_CASE("linker negatives") {
  // Interventions: aspirin (0), placebo (2), vitamin D (7-9).
  const Document doc = Document::from_text("n", "Aspirin or placebo was given . Both got vitamin D daily . Pain fell .");
  const auto I = EntityType::Intervention;
  std::vector<Mention> ms = {mention("m1", 0, 1, I, "n"), mention("m2", 2, 3, I, "n"), mention("m3", 8, 10, I, "n"),
                             mention("m4", 12, 13, EntityType::Outcome, "n")};
  std::vector<Entity> es = {{"e1", "n", I, {"m1"}, ""}, {"e2", "n", I, {"m2"}, ""}, {"e3", "n", I, {"m3"}, ""},
                            {"e4", "n", EntityType::Outcome, {"m4"}, ""}};
  const auto ad = AnnotatedDocument::create(doc, ms, es, {}, {});
  Rng rng(3);
  const auto neg = synthesize_linker_negatives(ad, {0, 1}, TokenSpan{2, 3}, rng, 3);
  REQUIRE(neg.size() == 3);
  CHECK(neg[0] == TokenSpan{8, 10});  // the third intervention
  CHECK(neg[1] == TokenSpan{0, 3});   // "Aspirin or placebo"
  CHECK_FALSE(neg[2].overlaps({0, 1}));
  CHECK_FALSE(neg[2].overlaps({2, 3}));

  SUBCASE("other spans never touch the gold arms and stay in one sentence") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Rng r(seed);
      for (const auto& s : synthesize_linker_negatives(ad, {0, 1}, TokenSpan{2, 3}, r, 8)) {
        if (s == TokenSpan{0, 3}) continue;
        CHECK_FALSE(s.overlaps({0, 1}));
        CHECK_FALSE(s.overlaps({2, 3}));
        CHECK(doc.sentence_of(s.start) == doc.sentence_of(s.end - 1));
      }
    }
  }
}

TEST_CASE("training samples derived from an annotated document") {
  const AnnotatedDocument doc = erythromycin_example();
  const TrainingSamples s = derive_samples(doc, SupervisionConfig{});
  CHECK(s.infer.size() == 2);
  for (const auto& x : s.infer) CHECK(x.label == Direction::NoDifference);
  CHECK(std::count_if(s.evidence.begin(), s.evidence.end(), [](const auto& e) { return e.positive; }) == 1);
  CHECK(std::count_if(s.link.begin(), s.link.end(), [](const auto& l) { return l.label == LinkRole::Primary; }) >= 1);
  CHECK(std::count_if(s.link.begin(), s.link.end(), [](const auto& l) { return l.label == LinkRole::Comparator; }) >= 1);

  const fs::path path = fs::temp_directory_path() / "eli_unit_samples.jsonl";
  write_samples(s, path);
  const TrainingSamples back = load_samples(path);
  CHECK(back.evidence.size() == s.evidence.size());
  CHECK(back.link.size() == s.link.size());
  REQUIRE(back.infer.size() == s.infer.size());
  CHECK(back.infer[1].outcome == s.infer[1].outcome);
  CHECK(back.infer[1].comparator == s.infer[1].comparator);
}

TEST_CASE("prompt projection onto tagged documents") {
  SynthConfig cfg;
  cfg.train = 5;
  cfg.dev = 0;
  cfg.test = 0;
  cfg.multi_arm = 0.0;
  const SynthCorpus corpus = synth_corpus(cfg);
  const HashedBackend backend(64, 13);
  std::vector<Document> raw;
  for (const auto& d : corpus.train.docs) raw.push_back(d.document());
  const auto gold_mentions = [&](const Document& d) {
    for (const auto& g : corpus.train.docs) {
      if (g.doc_id() == d.doc_id()) return g.mentions();
    }
    return std::vector<Mention>{};
  };

  SUBCASE("prompts are recovered exactly from gold mentions") {
    const DistantCorpus out = build_training_corpus(raw, corpus.train.prompts, gold_mentions, backend, SupervisionConfig{});
    REQUIRE(out.docs.size() == 5);
    CHECK(out.skipped_prompts == 0);
    CHECK(out.unprojected_prompts == 0);
    const PRF p = relation_prf(corpus.train.docs, out.docs, RelationMode::Triplet);
    CHECK(p.precision == 1.0);
    CHECK(p.recall == 1.0);
    const DistantCorpus again = build_training_corpus(raw, corpus.train.prompts, gold_mentions, backend, SupervisionConfig{});
    CHECK(again.docs == out.docs);
  }
  SUBCASE("no prompts gives entities without relations") {
    const DistantCorpus out = build_training_corpus(raw, std::vector<Prompt>{}, gold_mentions, backend, SupervisionConfig{});
    for (const auto& d : out.docs) {
      CHECK(d.relations().empty());
      CHECK_FALSE(d.entities().empty());
    }
  }
  SUBCASE("prompts for unknown documents are skipped and counted") {
    std::vector<Prompt> prompts = corpus.train.prompts;
    prompts.push_back(Prompt{"missing", "a", "b", "c", Direction::Increased, 0, 1});
    WarningCapture capture;
    const DistantCorpus out = build_training_corpus(raw, prompts, gold_mentions, backend, SupervisionConfig{});
    CHECK(out.skipped_prompts == 1);
    CHECK(capture.contains("missing"));
  }
}
