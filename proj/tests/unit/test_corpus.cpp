#include <algorithm>
#include <sstream>

#include "claimgraph/corpus.hpp"
#include "doctest.h"
#include "../support/generators.hpp"

using namespace claimgraph;

namespace {

const char* kFactorLine =
    R"({"id":"a","source":"pubmed","split":"train","tokens":["Smoking","kills"],)"
    R"("entities":[{"type":"factor","start":0,"end":1}],"relations":[],"attributes":[]})";

}  // namespace

TEST_CASE("one factor record parses") {
  const Corpus c = parse_corpus_string(kFactorLine);
  REQUIRE(c.size() == 1);
  CHECK(c[0].meta.id == "a");
  CHECK(c[0].meta.source == Source::pubmed);
  CHECK(c[0].meta.split == Split::train);
  CHECK(corpus_stats(c).entities() == 1);
  CHECK(serialize_corpus_string(c) == std::string(kFactorLine) + "\n");
}

TEST_CASE("out-of-bounds span names the rule and line") {
  const std::string line =
      R"({"id":"a","tokens":["x"],"entities":[{"type":"factor","start":0,"end":3}]})";
  try {
    parse_corpus_string(line);
    FAIL("expected a parse error");
  } catch (const CorpusError& e) {
    CHECK(e.line() == 1);
    CHECK(std::string(e.what()).find("span-bounds") != std::string::npos);
  }
}

TEST_CASE("parse errors carry the line number") {
  const std::string text = std::string(kFactorLine) + "\n\n{\"id\": \"b\", \"tokens\": [1]}\n";
  try {
    parse_corpus_string(text);
    FAIL("expected a parse error");
  } catch (const CorpusError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_corpus_string(R"({"id":"a","tokens":[],"bogus":1})"), CorpusError);
  CHECK_THROWS_AS(
      parse_corpus_string(R"({"id":"a","tokens":["x"],"entities":[{"type":"gene","start":0,"end":1}]})"),
      CorpusError);
  CHECK_THROWS_AS(parse_corpus_string(std::string(kFactorLine) + "\n" + kFactorLine), CorpusError);
  CHECK_THROWS_AS(parse_corpus_string("{not json"), CorpusError);
}

TEST_CASE("empty and two-sentence corpora") {
  CHECK(serialize_corpus_string({}).empty());
  CHECK(parse_corpus_string("").empty());
  testgen::Rng rng(3);
  Corpus c{testgen::random_sentence(rng, 0), testgen::random_sentence(rng, 1)};
  const std::string text = serialize_corpus_string(c);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  CHECK(parse_corpus_string(text) == c);
}

TEST_CASE("serialize and parse are mutual inverses on generated corpora") {
  testgen::Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    Corpus c;
    const std::size_t n = testgen::uniform(rng, 0, 6);
    for (std::size_t i = 0; i < n; ++i) c.push_back(testgen::random_sentence(rng, i));
    const std::string bytes = serialize_corpus_string(c);
    const Corpus back = parse_corpus_string(bytes);
    CHECK(back == c);
    CHECK(serialize_corpus_string(back) == bytes);
  }
}

TEST_CASE("non-canonical input reserializes canonically") {
  const std::string messy =
      "{ \"tokens\": [\"A\", \"raises\", \"B\"], \"id\": \"x\",\n"
      "  \"attributes\": [{\"types\": [\"sign+\", \"causation\"], \"entity\": 1}, {\"entity\": 0, \"types\": []}],\n"
      "  \"entities\": [{\"end\": 1, \"start\": 0, \"type\": \"factor\"}, {\"start\": 1, \"end\": 2, \"type\": \"association\"}]}";
  // one record must sit on one line
  std::string one_line = messy;
  std::replace(one_line.begin(), one_line.end(), '\n', ' ');
  const Corpus c = parse_corpus_string(one_line);
  const std::string canonical = serialize_corpus_string(c);
  CHECK(canonical ==
        R"({"id":"x","source":"other","split":"unlabeled","tokens":["A","raises","B"],)"
        R"("entities":[{"type":"factor","start":0,"end":1},{"type":"association","start":1,"end":2}],)"
        R"("relations":[],"attributes":[{"entity":1,"types":["causation","sign+"]}]})"
        "\n");
  CHECK(parse_corpus_string(canonical) == c);
}

TEST_CASE("serializing an invalid graph fails") {
  AnnotatedSentence s;
  s.meta.id = "bad";
  s.graph.tokens = {"a"};
  s.graph.entities = {{{0, 2}, EntityType::factor}};
  CHECK_THROWS_AS(serialize_record(s), CorpusError);
}

TEST_CASE("corpus statistics") {
  SUBCASE("empty corpus") {
    const CorpusStats st = corpus_stats({});
    CHECK(st.words == 0);
    CHECK(st.total_labels() == 0);
    CHECK(CorpusStats::density(0, 0) == 0.0);
  }
  SUBCASE("attributes count entity-attribute pairs") {
    Corpus c = parse_corpus_string(
        R"({"id":"x","tokens":["A","raises","B"],"entities":[{"type":"factor","start":0,"end":1},)"
        R"({"type":"association","start":1,"end":2},{"type":"factor","start":2,"end":3}],)"
        R"("relations":[{"type":"arg0","head":1,"tail":0},{"type":"arg1","head":1,"tail":2}],)"
        R"("attributes":[{"entity":1,"types":["causation","sign+"]}]})");
    const CorpusStats st = corpus_stats(c);
    CHECK(st.words == 3);
    CHECK(st.entities() == 3);
    CHECK(st.relations() == 2);
    CHECK(st.attributes() == 2);
    CHECK(st.total_labels() == 7);
    CHECK(st.entity_counts[static_cast<std::size_t>(EntityType::factor)] == 2);
    const std::string table = format_stats_table(st);
    CHECK(table.find("entities 3 / relations 2 / attributes 2") != std::string::npos);
    CHECK(table.find("66.67%") != std::string::npos);
    CHECK(stats_from_json(stats_to_json(st)) == st);
  }
  SUBCASE("additive over concatenation") {
    testgen::Rng rng(8);
    Corpus a, b;
    for (std::size_t i = 0; i < 20; ++i) a.push_back(testgen::random_sentence(rng, i));
    for (std::size_t i = 20; i < 35; ++i) b.push_back(testgen::random_sentence(rng, i));
    Corpus ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    CorpusStats sum = corpus_stats(a);
    sum += corpus_stats(b);
    CHECK(corpus_stats(ab) == sum);
  }
}

TEST_CASE("keyword filter") {
  const std::vector<std::vector<std::string>> sentences = {
      simple_tokenize("Smoking leads to cancer"),
      simple_tokenize("The sky is blue"),
      simple_tokenize("REDUCE the dose."),
      simple_tokenize("Coffee is associated with sleep loss, and more."),
  };
  const auto matches = keyword_filter(sentences, default_claim_keywords());
  REQUIRE(matches.size() == 3);
  CHECK(matches[0].sentence == 0);
  CHECK(matches[0].keywords == std::vector<std::string>{"leads to"});
  CHECK(matches[1].sentence == 2);
  CHECK(matches[1].keywords == std::vector<std::string>{"reduce"});
  CHECK(matches[2].keywords == std::vector<std::string>{"associated with", "more"});
  CHECK(default_claim_keywords().size() == 13);

  SUBCASE("no stemming and whole tokens only") {
    const auto m = keyword_filter({simple_tokenize("It reduces risk"), simple_tokenize("lessons")},
                                  default_claim_keywords());
    CHECK(m.empty());
  }
  SUBCASE("keyword order does not matter") {
    auto shuffled = default_claim_keywords();
    std::reverse(shuffled.begin(), shuffled.end());
    const auto m2 = keyword_filter(sentences, shuffled);
    REQUIRE(m2.size() == matches.size());
    for (std::size_t i = 0; i < m2.size(); ++i) {
      CHECK(m2[i].sentence == matches[i].sentence);
      CHECK(m2[i].keywords == matches[i].keywords);
    }
  }
}

TEST_CASE("tokenizer detaches punctuation") {
  CHECK(simple_tokenize("  Hello, (world)! ") ==
        std::vector<std::string>{"Hello", ",", "(", "world", ")", "!"});
  CHECK(simple_tokenize("").empty());
}

TEST_CASE("split assignment") {
  Corpus c;
  for (int i = 0; i < 10; ++i) {
    AnnotatedSentence s;
    s.meta.id = "u" + std::to_string(i);
    s.graph.tokens = {"t"};
    c.push_back(s);
  }
  const auto a = split_corpus(c, 42, {});
  CHECK(a.train.size() == 8);
  CHECK(a.val.size() == 1);
  CHECK(a.test.size() == 1);
  const auto b = split_corpus(c, 42, {});
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
  for (const auto& s : a.train) CHECK(s.meta.split == Split::train);

  SUBCASE("explicit splits are kept verbatim") {
    Corpus labeled = c;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
      labeled[i].meta.split = i < 2 ? Split::test : Split::train;
    }
    const auto s = split_corpus(labeled, 1, {});
    CHECK(s.test.size() == 2);
    CHECK(s.train.size() == 8);
    CHECK(s.val.empty());
  }
}

TEST_CASE("span-annotation import") {
  std::istringstream in(R"([
    {"orig_id": 7, "tokens": ["A", "raises", "B"],
     "entities": [{"type": "Factor", "start": 0, "end": 1},
                  {"type": "Association|Causation|Sign+", "start": 1, "end": 2},
                  {"type": "factor", "start": 2, "end": 3}],
     "relations": [{"type": "ARG0", "head": 1, "tail": 0}, {"type": "Q+", "head": 0, "tail": 2}]},
    {"tokens": ["x"], "entities": [{"type": "association", "attributes": ["Test"], "start": 0, "end": 1}]}
  ])");
  const Corpus c = import_span_json(in);
  REQUIRE(c.size() == 2);
  CHECK(c[0].meta.id == "7");
  CHECK(c[1].meta.id == "doc-1");
  CHECK(c[0].graph.entities[1].type == EntityType::association);
  CHECK(c[0].graph.attributes_of(1) ==
        std::vector<AttributeType>{AttributeType::causation, AttributeType::sign_plus});
  CHECK(c[0].graph.relations[1].type == RelationType::q_plus);
  CHECK(c[1].graph.attributes_of(0) == std::vector<AttributeType>{AttributeType::test});

  std::istringstream bad(R"({"tokens": ["x"], "entities": [{"type": "association|bogus", "start": 0, "end": 1}]})");
  try {
    import_span_json(bad);
    FAIL("expected an error");
  } catch (const CorpusError& e) {
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
}
