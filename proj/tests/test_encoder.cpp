#include <cmath>
#include <thread>

#include "doctest.h"
#include "eli/encoder.hpp"
#include "eli/error.hpp"
#include "eli/rng.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace eli;

namespace {

// Independent re-derivation of the hashed token vector for lower-case
// alphabetic tokens that do not open a sentence.
namespace ref {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
  return h;
}

void feature(Eigen::VectorXd& v, const std::string& f, double w, std::uint64_t seed) {
  std::uint64_t h = mix(fnv(f) ^ mix(seed));
  for (int k = 0; k < 2; ++k) {
    v[static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(v.size()))] += ((h >> 63) ? -1.0 : 1.0) * w / std::sqrt(2.0);
    h = mix(h);
  }
}

Eigen::VectorXd token(const std::string& w, std::size_t dim, std::uint64_t seed) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  feature(v, "w|" + w, 1.0, seed);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  const std::string p = "^" + w + "$";
  for (std::size_t n = 3; n <= 4; ++n) {
    for (std::size_t i = 0; i + n <= p.size(); ++i) feature(g, "g|" + p.substr(i, n), 1.0, seed);
  }
  v += 0.6 * g / g.norm();
  feature(v, "s|x", 0.25, seed);
  return v / v.norm();
}

}  // namespace ref

std::vector<std::string> words(const std::string& s) { return simple_tokens(s); }

}  // namespace

TEST_CASE("token vectors have the right shape and are deterministic") {
  const HashedBackend b(64, 13);
  const auto toks = words("Aspirin reduced pain in adults");
  REQUIRE(toks.size() == 5);
  const auto v1 = b.encode_sequence(toks);
  const auto v2 = b.encode_sequence(toks);
  REQUIRE(v1.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(v1[i].size() == 64);
    CHECK(v1[i].allFinite());
    CHECK(v1[i] == v2[i]);
    CHECK(v1[i].norm() == doctest::Approx(1.0));
  }
}

TEST_CASE("hashed token vectors match an independent derivation") {
  const HashedBackend b(64, 13);
  for (const char* w : {"reduced", "pain", "placebo", "nausea"}) {
    const Eigen::VectorXd want = ref::token(w, 64, 13);
    const Eigen::VectorXd got = b.token_vector(w, false);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK((b.token_vector("pain", false) - b.token_vector("gain", false)).cwiseAbs().maxCoeff() > 0.0);
  CHECK(b.token_vector("pain", false) != b.token_vector("pain", true));
}

TEST_CASE("encode_tokens covers the document sentence by sentence") {
  const HashedBackend b(32, 1);
  const Document d = Document::from_text("d", "Pain fell . Nausea rose sharply .");
  CHECK(encode_tokens(b, d).size() == d.num_tokens());
  CHECK(encode_tokens(b, d, std::make_pair<std::size_t, std::size_t>(1, 2)).size() == 4);
  CHECK_THROWS_AS(encode_tokens(b, d, std::make_pair<std::size_t, std::size_t>(1, 3)), InvalidArgument);

  const HashedBackend small(32, 1, 3);
  try {
    encode_tokens(small, d);
    FAIL("expected a length error");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
}

TEST_CASE("span embeddings are token means") {
  const HashedBackend b(64, 13);
  const Document d = Document::from_text("d", "Low dose aspirin . Then low dose again .");
  const auto vecs = encode_tokens(b, d);
  CHECK(encode_span(b, d, {2, 3}) == vecs[2]);
  CHECK((encode_span(b, d, {1, 3}) - (vecs[1] + vecs[2]) / 2.0).norm() < 1e-15);
  CHECK(encode_span(b, d, {2, 3}) == b.token_vector("aspirin", false));
  // "dose" at positions 1 and 6, neither sentence-initial.
  CHECK(encode_span(b, d, {1, 2}) == encode_span(b, d, {6, 7}));
  CHECK_THROWS_AS(encode_span(b, d, {2, 2}), InvalidArgument);
}

TEST_CASE("identical text spans embed identically under the context-free backend") {
  const HashedBackend b(64, 13);
  const Document d = Document::from_text("d", "We gave low dose aspirin . Patients on low dose aspirin improved .");
  CHECK(encode_span(b, d, {2, 5}) == encode_span(b, d, {8, 11}));
}

TEST_CASE("cosine similarity") {
  auto v = [](std::initializer_list<double> xs) {
    Eigen::VectorXd e(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) e[i++] = x;
    return e;
  };
  CHECK(cosine_similarity(v({1, 0}), v({1, 0})) == 1.0);
  CHECK(cosine_similarity(v({1, 0}), v({0, 1})) == 0.0);
  CHECK(std::abs(cosine_similarity(v({1, 1}), v({1, 0})) - 0.70710678) < 1e-8);
  CHECK_THROWS_AS(cosine_similarity(v({0, 0}), v({1, 0})), InvalidArgument);
  CHECK_THROWS_AS(cosine_similarity(v({1, 0, 0}), v({1, 0})), InvalidArgument);
}

TEST_CASE("property: cosine is reflexive, symmetric and scale invariant") {
  Rng rng(5);
  for (int k = 0; k < 200; ++k) {
    const auto n = static_cast<Eigen::Index>(1 + rng.below(8));
    Eigen::VectorXd a(n), b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      a[i] = rng.uniform(-1, 1);
      b[i] = rng.uniform(-1, 1);
    }
    const double s = rng.uniform(0.01, 100.0);
    CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine_similarity(a, b) == doctest::Approx(cosine_similarity(b, a)).epsilon(1e-12));
    CHECK(cosine_similarity(s * a, b) == doctest::Approx(cosine_similarity(a, b)).epsilon(1e-12));
    CHECK(std::abs(cosine_similarity(a, b)) <= 1.0 + 1e-12);
  }
}

TEST_CASE("segment encodings") {
  const HashedBackend b(64, 13);
  const std::vector<std::vector<std::string>> one = {words("aspirin")};
  const std::vector<std::vector<std::string>> pair = {words("aspirin"), words("aspirin reduced pain")};
  const std::vector<std::vector<std::string>> absent = {words("placebo"), words("aspirin reduced pain")};
  CHECK(b.encode_segments(pair).norm() == doctest::Approx(1.0));
  CHECK(b.encode_segments(pair) == b.encode_segments(pair));
  CHECK(b.encode_segments(pair) != b.encode_segments(absent));
  CHECK(b.encode_segments(one).size() == 64);
  CHECK_THROWS_AS(b.encode_segments(std::vector<std::vector<std::string>>{}), InvalidArgument);
}

TEST_CASE("make_encoder") {
  EncoderConfig c;
  c.dim = 16;
  c.seed = 3;
  const auto b = make_encoder(c);
  CHECK(b->name() == "hashed");
  CHECK(b->dim() == 16);
  CHECK(b->config() == c);
  c.name = "nonsense";
  CHECK_THROWS_AS(make_encoder(c), InvalidArgument);
  c.name = "pretrained";
  CHECK_THROWS_AS(make_encoder(c), InvalidArgument);  // no url
}

TEST_CASE("pretrained backend talks to an encoding service") {
  httplib::Server server;
  std::size_t calls = 0;
  server.Post("/v1/encode", [&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    const auto body = nlohmann::json::parse(req.body);
    nlohmann::json vectors = nlohmann::json::array();
    if (body.at("mode") == "tokens") {
      for (const auto& tok : body.at("segments").at(0)) {
        const double len = static_cast<double>(tok.get<std::string>().size());
        vectors.push_back({len, 1.0, 0.0});
      }
    } else {
      vectors.push_back({0.0, 0.0, static_cast<double>(body.at("segments").size())});
    }
    res.set_content(nlohmann::json{{"vectors", vectors}}.dump(), "application/json");
  });
  server.Post("/bad/encode", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"vectors": [[1.0]]})", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const std::string base = "http://127.0.0.1:" + std::to_string(port);
  EncoderConfig c;
  c.name = "pretrained";
  c.dim = 3;
  c.url = base + "/v1";
  const auto b = make_encoder(c);
  CHECK(b->config().url == c.url);
  const auto toks = words("pain fell");
  const auto vecs = b->encode_sequence(toks);
  REQUIRE(vecs.size() == 2);
  CHECK(vecs[0][0] == 4.0);
  CHECK(vecs[1][0] == 4.0);
  const std::vector<std::vector<std::string>> segs = {words("a"), words("b c")};
  CHECK(b->encode_segments(segs)[2] == 2.0);
  CHECK(calls == 2);

  c.url = base + "/bad";
  CHECK_THROWS_AS(make_encoder(c)->encode_sequence(toks), ParseError);
  c.url = "http://127.0.0.1:1";
  CHECK_THROWS_AS(make_encoder(c)->encode_sequence(toks), IoError);

  server.stop();
  worker.join();
}
