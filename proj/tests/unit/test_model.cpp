#include <cmath>
#include <random>
#include <sstream>

#include "claimgraph/model.hpp"
#include "doctest.h"
#include "../support/generators.hpp"

using namespace claimgraph;

namespace {

ModelShape small_shape(std::size_t dim, std::vector<std::string> vocab = {}) {
  ModelShape s;
  s.dim = dim;
  s.entity_labels = plain_entity_labels();
  s.vocabulary = std::move(vocab);
  return s;
}

std::vector<std::string> words(std::initializer_list<const char*> w) {
  return {w.begin(), w.end()};
}

}  // namespace

TEST_CASE("sigmoid and argmax") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(sigmoid(-2.0) == doctest::Approx(1.0 / (1.0 + std::exp(2.0))));
  const std::vector<double> tie{1.0, 3.0, 3.0, 2.0};
  CHECK(argmax_first(tie) == 1);
}

TEST_CASE("attribute thresholds are strict") {
  Matrix zero(3, kNumAttributeTypes);
  for (const auto& set : assign_attributes(zero, 0.55)) CHECK(set.empty());
  // sigmoid(0) equals 0.5 exactly; a threshold of 0.5 must not admit it
  for (const auto& set : assign_attributes(zero, 0.5)) CHECK(set.empty());

  Matrix one_hot(1, kNumAttributeTypes);
  one_hot(0, 3) = 9.0;
  CHECK(assign_attributes(one_hot, 0.55)[0] == std::vector<AttributeType>{AttributeType::sign_plus});
}

TEST_CASE("zero relation logits emit every ordered pair and type") {
  ModelParams p = make_params(small_shape(4));
  Matrix h(5, 4, 0.25);
  const std::vector<ScoredEntity> ents = {{{0, 1}, 0, 1.0}, {{2, 3}, 0, 1.0}, {{3, 5}, 1, 1.0}};
  InferenceConfig cfg;
  const auto rels = classify_relations(ents, h, p, cfg);
  CHECK(rels.size() == 3 * 2 * kNumRelationTypes);
  for (const auto& r : rels) {
    CHECK(r.head != r.tail);
    CHECK(r.confidence == 0.5);
  }
  CHECK(classify_relations({ents[0]}, h, p, cfg).empty());
  CHECK(classify_relations({}, h, p, cfg).empty());
}

TEST_CASE("entity ties go to the first real class") {
  ModelParams p = make_params(small_shape(4));
  Matrix h(3, 4, 1.0);
  InferenceConfig cfg;
  const auto ents = classify_entities(h, p, cfg);
  CHECK(ents.size() == 6);
  for (const auto& e : ents) {
    CHECK(e.label == 0);
    CHECK(e.confidence == doctest::Approx(1.0 / 7.0));
  }
  p.ent_b(0, p.none_class()) = 5.0;
  CHECK(classify_entities(h, p, cfg).empty());
}

TEST_CASE("prediction") {
  const auto vocab = words({"<unk>", "a", "b", "c", "d"});
  ModelParams p = init_params(small_shape(6, vocab), 3);
  // make spans likely so relations appear
  p.ent_b(0, 0) = 2.0;
  LookupProvider provider(vocab, 6);
  const std::vector<std::string> tokens = words({"a", "b", "zzz", "d"});
  InferenceConfig cfg;

  SUBCASE("empty sentence gives an empty graph") {
    const auto out = predict({"e", {}}, provider, p, cfg);
    CHECK(out.graph.tokens.empty());
    CHECK(out.graph.entities.empty());
  }
  SUBCASE("deterministic and structurally valid") {
    const auto a = predict({"x", tokens}, provider, p, cfg);
    const auto b = predict({"x", tokens}, provider, p, cfg);
    CHECK(a.graph == b.graph);
    CHECK(a.scores.entities == b.scores.entities);
    CHECK(a.scores.relations == b.scores.relations);
    CHECK(validate_structural(a.graph).ok());
    CHECK(a.scores.entities.size() == a.graph.entities.size());
    CHECK(a.scores.relations.size() == a.graph.relations.size());
    CHECK(a.scores.attributes.size() == a.graph.attributes.size());
    CHECK_FALSE(a.graph.entities.empty());
  }
  SUBCASE("raising thresholds never adds output") {
    const auto base = predict({"x", tokens}, provider, p, cfg);
    InferenceConfig strict = cfg;
    strict.attr_threshold = 0.9;
    strict.rel_threshold = 0.9;
    const auto tight = predict({"x", tokens}, provider, p, strict);
    CHECK(tight.graph.entities == base.graph.entities);
    for (const auto& r : tight.graph.relations) {
      CHECK(std::find(base.graph.relations.begin(), base.graph.relations.end(), r) !=
            base.graph.relations.end());
    }
    for (const auto& a : tight.graph.attributes) {
      const auto loose = base.graph.attributes_of(a.entity);
      for (auto t : a.types) CHECK(std::find(loose.begin(), loose.end(), t) != loose.end());
    }
  }
  SUBCASE("unfiltered attribute scoring agrees with cascaded at inference") {
    InferenceConfig unf = cfg;
    unf.attribute_filtering = AttributeFiltering::unfiltered;
    p.attr_b(0, 2) = 0.4;
    const auto a = predict({"x", tokens}, provider, p, cfg);
    const auto b = predict({"x", tokens}, provider, p, unf);
    CHECK(a.graph == b.graph);
  }
  SUBCASE("random parameters always give valid graphs") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
      ModelParams q = init_params(small_shape(6, vocab), rng());
      q.rel_b(0, 1) = 1.0;
      for (auto mode : {SpanReprMode::attention, SpanReprMode::maxpool}) {
        InferenceConfig c2;
        c2.span_repr_mode = mode;
        c2.max_span_size = 3;
        const auto out = predict({"x", tokens}, provider, q, c2);
        CHECK(validate_structural(out.graph).ok());
        for (const auto& e : out.graph.entities) CHECK(e.span.length() <= 3);
      }
    }
  }
}

TEST_CASE("inference config bounds") {
  InferenceConfig c;
  CHECK_NOTHROW(c.check());
  c.attr_threshold = 1.0;
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
  c = {};
  c.rel_threshold = 0.0;
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
  c = {};
  c.max_span_size = 0;
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
  CHECK(parse_span_repr_mode("maxpool") == SpanReprMode::maxpool);
  CHECK(parse_attribute_filtering("unfiltered") == AttributeFiltering::unfiltered);
  CHECK_FALSE(parse_span_repr_mode("mean").has_value());
}

TEST_CASE("lookup provider") {
  Corpus c(1);
  c[0].graph.tokens = words({"b", "a", "b"});
  const auto vocab = build_vocabulary(c);
  CHECK(vocab == words({"<unk>", "b", "a"}));
  ModelParams p = init_params(small_shape(3, vocab), 1);
  LookupProvider provider(vocab, 3);
  const std::vector<std::string> toks = words({"a", "nope"});
  const Matrix h = provider.embed({"id", toks}, p);
  REQUIRE(h.rows == 2);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(h(0, k) == p.token_emb(2, k));
    CHECK(h(1, k) == p.token_emb(0, k));
  }
}

TEST_CASE("embedding files") {
  std::map<std::string, Matrix> table;
  table["s1"] = Matrix(2, 3, 0.5);
  table["s1"](1, 2) = -1.25;
  table["s2"] = Matrix(0, 3);
  std::stringstream buf;
  write_embedding_file(buf, table, 3);
  std::size_t dim = 0;
  const auto back = read_embedding_file(buf, &dim);
  CHECK(dim == 3);
  CHECK(back == table);
  CHECK(buf.str().substr(0, 6) == "CGEMB1");

  FileProvider provider(table, 3);
  ModelParams p = make_params(small_shape(3));
  const std::vector<std::string> two = words({"x", "y"});
  CHECK(provider.embed({"s1", two}, p) == table["s1"]);
  CHECK_THROWS_AS(provider.embed({"missing", two}, p), ProviderError);
  const std::vector<std::string> three = words({"x", "y", "z"});
  CHECK_THROWS_AS(provider.embed({"s1", three}, p), ProviderError);

  std::stringstream garbage("CGEMBX");
  CHECK_THROWS(read_embedding_file(garbage));
}
