#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "eli/error.hpp"
#include "eli/linking.hpp"
#include "eli/supervision.hpp"
#include "eli/synth.hpp"

using namespace eli;

namespace {

Vector dist(double primary, double comparator) {
  Vector v(3);
  v << primary, comparator, 1.0 - primary - comparator;
  return v;
}

LinkCandidate cand(const std::string& m, const std::string& e, std::size_t start) {
  return LinkCandidate{m, e, TokenSpan{start, start + 1}};
}

struct Trained {
  HashedBackend backend{128, 13};
  SynthCorpus corpus;
  LinkerModel model;
};

const Trained& trained() {
  static const Trained t = [] {
    Trained out;
    SynthConfig cfg;
    cfg.train = 80;
    cfg.dev = 20;
    cfg.test = 0;
    cfg.multi_arm = 0.0;
    out.corpus = synth_corpus(cfg);
    TrainingSamples samples;
    for (const auto& d : out.corpus.train.docs) samples.append(derive_samples(d, SupervisionConfig{}));
    out.model = train_linker(samples.link, out.backend, LinkerConfig{}).model;
    return out;
  }();
  return t;
}

}  // namespace

TEST_CASE("link roles parse") {
  for (auto r : {LinkRole::Primary, LinkRole::Comparator, LinkRole::Unrelated}) {
    CHECK(parse_link_role(to_string(r)) == r);
  }
  CHECK_THROWS_AS(parse_link_role("OTHER"), ParseError);
}

TEST_CASE("link selection") {
  const std::vector<LinkCandidate> cs = {cand("m1", "e1", 0), cand("m2", "e2", 3)};
  SUBCASE("primary and comparator") {
    const std::vector<Vector> probs = {dist(0.9, 0.05), dist(0.2, 0.7)};
    const LinkChoice c = select_links(cs, probs);
    CHECK(c.primary == 0);
    REQUIRE(c.comparator.has_value());
    CHECK(*c.comparator == 1);
  }
  SUBCASE("comparator must beat its unrelated probability") {
    const std::vector<Vector> probs = {dist(0.9, 0.05), dist(0.2, 0.3)};
    CHECK_FALSE(select_links(cs, probs).comparator.has_value());
  }
  SUBCASE("comparator never shares the primary entity") {
    const std::vector<LinkCandidate> same = {cand("m1", "e1", 0), cand("m2", "e1", 3)};
    const std::vector<Vector> probs = {dist(0.9, 0.05), dist(0.2, 0.7)};
    CHECK_FALSE(select_links(same, probs).comparator.has_value());
  }
  SUBCASE("ties go to the earliest span") {
    const std::vector<LinkCandidate> rev = {cand("m2", "e2", 3), cand("m1", "e1", 0)};
    const std::vector<Vector> probs = {dist(0.5, 0.1), dist(0.5, 0.1)};
    CHECK(select_links(rev, probs).primary == 1);
  }
  SUBCASE("bad input") {
    CHECK_THROWS_AS(select_links(std::vector<LinkCandidate>{}, std::vector<Vector>{}), InvalidArgument);
    const std::vector<Vector> one = {dist(0.5, 0.1)};
    CHECK_THROWS_AS(select_links(cs, one), InvalidArgument);
  }
}

TEST_CASE("property: link selection is invariant to candidate order") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(5);
    std::vector<LinkCandidate> cs;
    std::vector<Vector> probs;
    for (std::size_t k = 0; k < n; ++k) {
      cs.push_back(cand("m" + std::to_string(k), "e" + std::to_string(rng.below(3)), 2 * k));
      const double p = rng.uniform(0, 1);
      probs.push_back(dist(p, rng.uniform(0, 1 - p)));
    }
    const LinkChoice base = select_links(cs, probs);
    CHECK(cs[base.primary].entity_id != (base.comparator ? cs[*base.comparator].entity_id : ""));

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<LinkCandidate> cs2;
    std::vector<Vector> probs2;
    for (auto i : perm) {
      cs2.push_back(cs[i]);
      probs2.push_back(probs[i]);
    }
    const LinkChoice moved = select_links(cs2, probs2);
    CHECK(cs2[moved.primary].mention_id == cs[base.primary].mention_id);
    CHECK(moved.comparator.has_value() == base.comparator.has_value());
    if (moved.comparator && base.comparator) {
      CHECK(cs2[*moved.comparator].mention_id == cs[*base.comparator].mention_id);
    }
  }
}

TEST_CASE("trained linker finds the primary arm") {
  const Trained& t = trained();
  std::size_t cases = 0, hits = 0;
  for (const auto& d : t.corpus.dev.docs) {
    for (const auto& r : d.relations()) {
      const std::vector<std::size_t> evidence = {r.evidence_sentence};
      const LinkResult lr = link_evidence(t.model, t.backend, d, evidence);
      REQUIRE(lr.links.size() == 1);
      for (const auto& p : score_candidates(t.model, t.backend, d.document(), r.evidence_sentence,
                                            std::vector<LinkCandidate>{{"m", "e", d.entity_spans(*d.find_entity(r.intervention)).front()}})) {
        CHECK(p.sum() == doctest::Approx(1.0));
      }
      ++cases;
      hits += lr.links[0].intervention == r.intervention;
    }
  }
  REQUIRE(cases > 0);
  CHECK(static_cast<double>(hits) / static_cast<double>(cases) >= 0.9);

  SUBCASE("checkpoint round-trip") {
    const LinkerModel back = LinkerModel::from_checkpoint(t.model.to_checkpoint());
    const auto tokens = simple_tokens("aspirin");
    const auto sentence = simple_tokens("aspirin reduced pain .");
    CHECK(back.probabilities(t.backend, tokens, sentence) == t.model.probabilities(t.backend, tokens, sentence));
  }
}

TEST_CASE("evidence sentences without outcomes or interventions") {
  const Trained& t = trained();
  const Document doc = Document::from_text("x", "Aspirin was given . Pain fell .");
  const std::vector<Mention> ms = {{"m1", "x", {0, 1}, EntityType::Intervention}, {"m2", "x", {4, 5}, EntityType::Outcome}};
  const std::vector<Entity> es = {{"e1", "x", EntityType::Intervention, {"m1"}, ""},
                                  {"e2", "x", EntityType::Outcome, {"m2"}, ""}};
  const auto ad = AnnotatedDocument::create(doc, ms, es, {}, {});
  const std::vector<std::size_t> first = {0};
  CHECK(link_evidence(t.model, t.backend, ad, first).links.empty());
  const std::vector<std::size_t> second = {1};
  const LinkResult lr = link_evidence(t.model, t.backend, ad, second);
  REQUIRE(lr.links.size() == 1);
  CHECK(lr.links[0].intervention == "e1");
  CHECK(lr.links[0].outcomes == std::vector<std::pair<std::string, TokenSpan>>{{"e2", {4, 5}}});

  const auto no_arms = AnnotatedDocument::create(doc, {ms[1]}, {es[1]}, {}, {});
  const LinkResult skipped = link_evidence(t.model, t.backend, no_arms, second);
  CHECK(skipped.links.empty());
  CHECK(skipped.skipped_sentences == 1);
  const std::vector<std::size_t> bad = {9};
  CHECK_THROWS_AS(link_evidence(t.model, t.backend, ad, bad), InvalidArgument);
}

TEST_CASE("linker rejects an empty training set") {
  const HashedBackend backend(16, 1);
  CHECK_THROWS_AS(train_linker(std::vector<LinkSample>{}, backend, LinkerConfig{}), InvalidArgument);
}
