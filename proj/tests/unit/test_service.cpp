#include <filesystem>
#include <fstream>
#include <thread>

#include "claimgraph/checkpoint.hpp"
#include "claimgraph/diff.hpp"
#include "claimgraph/service.hpp"
#include "doctest.h"
#include "httplib.h"
#include "json.hpp"

using namespace claimgraph;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& n) const { return (path / n).string(); }
};

Corpus toy() { return load_corpus(std::string(CLAIMGRAPH_DATA) + "/toy_corpus.jsonl"); }

std::size_t line_count(const std::string& path) {
  if (!fs::exists(path)) return 0;
  std::ifstream in(path);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_corpus(const std::string& path, const Corpus& c) {
  std::ofstream out(path);
  serialize_corpus(c, out);
}

// Queue of the first `n` toy sentences with their annotations stripped.
Corpus unlabeled_queue(std::size_t n) {
  Corpus q = toy();
  q.resize(n);
  for (auto& s : q) {
    s.graph.entities.clear();
    s.graph.relations.clear();
    s.graph.attributes.clear();
  }
  return q;
}

ServiceConfig base_config(const TempDir& dir) {
  ServiceConfig c;
  c.port = 0;
  c.store_path = dir.file("store.jsonl");
  c.checkpoint_path = dir.file("model.ckpt");
  c.fresh_dim = 16;
  c.retrain_epochs = 2;
  c.train.learning_rate = 1e-2;
  c.train.dropout = 0.0;
  c.train.warmup_fraction = 0.0;
  return c;
}

httplib::Result post(httplib::Client& cli, const std::string& path, const std::string& body) {
  return cli.Post(path, body, "application/json");
}

}  // namespace

TEST_CASE("service without a model") {
  TempDir dir("claimgraph_svc_empty");
  auto cfg = base_config(dir);
  SuggestService svc(cfg);
  const int port = svc.start();
  httplib::Client cli("127.0.0.1", port);

  auto h = cli.Get("/health");
  REQUIRE(h);
  CHECK(h->status == 503);
  CHECK(post(cli, "/suggest", R"({"tokens":["a"]})")->status == 503);
  CHECK(cli.Get("/next")->status == 204);
  CHECK(post(cli, "/retrain", "{}")->status == 422);
  CHECK(svc.model_version().empty());
  svc.stop();
}

TEST_CASE("queue, suggestions and annotations") {
  TempDir dir("claimgraph_svc_flow");
  auto cfg = base_config(dir);
  Corpus q = unlabeled_queue(3);
  q[2].meta.split = Split::test;
  write_corpus(dir.file("queue.jsonl"), q);
  cfg.queue_paths = {dir.file("queue.jsonl")};
  cfg.no_suggest_splits = parse_split_list("test");

  // Start from a small random lookup model.
  const Corpus gold = toy();
  const ModelShape shape = shape_for_training(gold, 8, true, cfg.train);
  save_checkpoint(cfg.checkpoint_path, {init_params(shape, 5), {}});

  SuggestService svc(cfg);
  const int port = svc.start();
  httplib::Client cli("127.0.0.1", port);

  auto h = cli.Get("/health");
  REQUIRE(h);
  CHECK(h->status == 200);
  const auto hj = json::parse(h->body);
  CHECK(hj["model_version"] == svc.model_version());
  CHECK(svc.model_version().size() == 64);

  SUBCASE("next walks the queue in order and skips accepted sentences") {
    auto n = cli.Get("/next");
    REQUIRE(n->status == 200);
    CHECK(json::parse(n->body)["id"] == "toy-00");
    CHECK(json::parse(n->body)["suggestions"] == true);
    CHECK(post(cli, "/annotations", serialize_record(gold[0]))->status == 201);
    CHECK(json::parse(cli.Get("/next")->body)["id"] == "toy-01");
    CHECK(post(cli, "/annotations", serialize_record(gold[1]))->status == 201);
    auto last = json::parse(cli.Get("/next")->body);
    CHECK(last["id"] == "toy-02");
    CHECK(last["suggestions"] == false);
    AnnotatedSentence third = gold[2];
    third.meta.split = Split::test;
    CHECK(post(cli, "/annotations", serialize_record(third))->status == 201);
    CHECK(cli.Get("/next")->status == 204);
  }

  SUBCASE("suggest") {
    CHECK(post(cli, "/suggest", R"({"id":"nope"})")->status == 404);
    CHECK(post(cli, "/suggest", R"({"id":"toy-02"})")->status == 403);
    CHECK(post(cli, "/suggest", "not json")->status == 400);
    CHECK(post(cli, "/suggest", R"({"tokens":[1,2]})")->status == 422);
    CHECK(post(cli, "/suggest", R"({"tokens":["ok",""]})")->status == 422);
    CHECK(post(cli, "/suggest", R"({})")->status == 422);

    auto a = post(cli, "/suggest", R"({"id":"toy-00"})");
    auto b = post(cli, "/suggest", R"({"id":"toy-00"})");
    REQUIRE(a->status == 200);
    CHECK(a->body == b->body);
    const auto j = json::parse(a->body);
    CHECK(j["tokens"] == json(q[0].graph.tokens));
    CHECK(j["scores"]["entities"].size() == j["entities"].size());
    CHECK(j["scores"]["relations"].size() == j["relations"].size());

    auto e = post(cli, "/suggest", R"({"tokens":[]})");
    REQUIRE(e->status == 200);
    const auto ej = json::parse(e->body);
    CHECK(ej["entities"].empty());
    CHECK(ej["relations"].empty());
  }

  SUBCASE("annotations are validated and stored") {
    const std::string store = cfg.store_path;
    auto r = post(cli, "/annotations", serialize_record(gold[0]));
    REQUIRE(r->status == 201);
    CHECK(json::parse(r->body)["store_line"] == 1);
    CHECK(line_count(store) == 1);

    // Attribute on a factor.
    json bad = json::parse(serialize_record(gold[1]));
    bad["attributes"] = json::array({{{"entity", 0}, {"types", {"causation"}}}});
    auto v = post(cli, "/annotations", bad.dump());
    REQUIRE(v->status == 422);
    CHECK(v->body.find("attribute-on-non-association") != std::string::npos);
    CHECK(line_count(store) == 1);

    json dangling = json::parse(serialize_record(gold[1]));
    dangling["relations"].push_back({{"head", 0}, {"tail", 99}, {"type", "arg0"}});
    CHECK(post(cli, "/annotations", dangling.dump())->status == 422);
    CHECK(post(cli, "/annotations", R"({"id":"x"})")->status == 422);

    auto dup = post(cli, "/annotations", serialize_record(gold[0]));
    REQUIRE(dup->status == 409);
    CHECK(json::parse(dup->body)["store_line"] == 1);
    CHECK(line_count(store) == 1);

    CHECK(post(cli, "/annotations", serialize_record(gold[1]))->status == 201);
    CHECK(line_count(store) == 2);
    const Corpus stored = load_corpus(store);
    REQUIRE(stored.size() == 2);
    CHECK(stored[0] == gold[0]);
    CHECK(stored[1] == gold[1]);
  }

  SUBCASE("retrain swaps the model") {
    CHECK(post(cli, "/annotations", serialize_record(gold[0]))->status == 201);
    const std::string before = svc.model_version();
    auto r = post(cli, "/retrain", "{}");
    REQUIRE(r->status == 202);
    svc.wait_for_retrain();
    CHECK(svc.model_version() != before);
    CHECK(json::parse(cli.Get("/health")->body)["model_version"] == svc.model_version());
    CHECK(content_hash(read_file(cfg.checkpoint_path)) == svc.model_version());
  }
  svc.stop();
}

TEST_CASE("state survives a restart") {
  TempDir dir("claimgraph_svc_restart");
  auto cfg = base_config(dir);
  const Corpus gold = toy();
  write_corpus(dir.file("queue.jsonl"), unlabeled_queue(2));
  cfg.queue_paths = {dir.file("queue.jsonl")};
  {
    SuggestService svc(cfg);
    httplib::Client cli("127.0.0.1", svc.start());
    CHECK(post(cli, "/annotations", serialize_record(gold[0]))->status == 201);
    svc.stop();
  }
  SuggestService svc(cfg);
  httplib::Client cli("127.0.0.1", svc.start());
  CHECK(json::parse(cli.Get("/next")->body)["id"] == "toy-01");
  CHECK(post(cli, "/annotations", serialize_record(gold[0]))->status == 409);
  svc.stop();
}

TEST_CASE("retrained suggestions reproduce accepted annotations") {
  TempDir dir("claimgraph_svc_overfit");
  auto cfg = base_config(dir);
  cfg.retrain_epochs = 200;
  cfg.train.batch_size = 2;
  Corpus gold = toy();
  gold.resize(4);
  SuggestService svc(cfg);
  httplib::Client cli("127.0.0.1", svc.start());
  for (const auto& s : gold) REQUIRE(post(cli, "/annotations", serialize_record(s))->status == 201);
  REQUIRE(post(cli, "/retrain", "{}")->status == 202);
  svc.wait_for_retrain();
  REQUIRE_FALSE(svc.model_version().empty());
  for (const auto& s : gold) {
    auto r = post(cli, "/suggest", json{{"id", s.meta.id}}.dump());
    REQUIRE(r->status == 200);
    json j = json::parse(r->body);
    j.erase("scores");
    // Relation order is not significant, so compare as sets.
    const GraphDiff d = graph_diff(s.graph, parse_record(j.dump()).graph);
    CHECK(d.entities.missing.size() + d.entities.spurious.size() == 0);
    CHECK(d.attributes.missing.size() + d.attributes.spurious.size() == 0);
    CHECK(d.relations.missing.size() + d.relations.spurious.size() == 0);
  }
  svc.stop();
}

TEST_CASE("a second retrain is refused while one runs") {
  TempDir dir("claimgraph_svc_busy");
  auto cfg = base_config(dir);
  cfg.retrain_epochs = 400;  // long enough that the second request lands mid-run
  SuggestService svc(cfg);
  httplib::Client cli("127.0.0.1", svc.start());
  for (const auto& s : toy()) REQUIRE(post(cli, "/annotations", serialize_record(s))->status == 201);
  REQUIRE(post(cli, "/retrain", "{}")->status == 202);
  CHECK(post(cli, "/retrain", "{}")->status == 409);
  svc.wait_for_retrain();
  // With a model loaded, /health reports the running retrain.
  REQUIRE(post(cli, "/retrain", "{}")->status == 202);
  CHECK(json::parse(cli.Get("/health")->body)["retraining"] == true);
  CHECK(post(cli, "/retrain", "{}")->status == 409);
  svc.wait_for_retrain();
  CHECK(json::parse(cli.Get("/health")->body)["retraining"] == false);
  svc.stop();
}

TEST_CASE("service config helpers") {
  CHECK(parse_split_list("val,test") == std::set<Split>{Split::val, Split::test});
  CHECK(parse_split_list("").empty());
  CHECK_THROWS_AS(parse_split_list("dev"), std::invalid_argument);
  ServiceConfig c;
  ::setenv("CLAIMGRAPH_STORE", "/tmp/s.jsonl", 1);
  apply_service_env(c);
  CHECK(c.store_path == "/tmp/s.jsonl");
  ::unsetenv("CLAIMGRAPH_STORE");
}
