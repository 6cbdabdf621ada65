#include "claimgraph/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "claimgraph/checkpoint.hpp"
#include "httplib.h"
#include "json.hpp"

namespace claimgraph {

using nlohmann::json;
using nlohmann::ordered_json;

void apply_service_env(ServiceConfig& config) {
  if (config.store_path.empty()) {
    if (const char* v = std::getenv("CLAIMGRAPH_STORE")) config.store_path = v;
  }
  if (config.checkpoint_path.empty()) {
    if (const char* v = std::getenv("CLAIMGRAPH_CKPT")) config.checkpoint_path = v;
  }
}

std::set<Split> parse_split_list(const std::string& text) {
  std::set<Split> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    auto s = parse_split(item);
    if (!s) throw std::invalid_argument("unknown split \"" + item + "\"");
    out.insert(*s);
  }
  return out;
}

namespace {

struct Snapshot {
  Checkpoint ckpt;
  std::unique_ptr<EmbeddingProvider> provider;
  std::string version;
};

enum class Status { unlabeled, suggested, accepted };

void reply(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, ordered_json{{"error", message}}.dump());
}

// One write(2) per record on an O_APPEND descriptor, then fsync.
void append_line(const std::string& path, const std::string& line) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw std::runtime_error("cannot open store " + path);
  const std::string data = line + "\n";
  const ssize_t n = ::write(fd, data.data(), data.size());
  const bool ok = n == static_cast<ssize_t>(data.size()) && ::fsync(fd) == 0;
  ::close(fd);
  if (!ok) throw std::runtime_error("short write to store " + path);
}

}  // namespace

struct SuggestService::Impl {
  ServiceConfig config;
  httplib::Server server;
  std::thread server_thread;

  mutable std::mutex snap_mu;
  std::shared_ptr<const Snapshot> snap;

  std::mutex store_mu;
  Corpus queue;
  std::map<std::string, Status, std::less<>> status;
  std::map<std::string, std::size_t, std::less<>> accepted_line;  // 1-based line in the store
  Corpus accepted;

  std::mutex retrain_mu;
  std::condition_variable retrain_cv;
  bool retraining = false;
  std::string retrain_error;
  std::thread retrain_thread;

  explicit Impl(ServiceConfig c) : config(std::move(c)) {
    if (!config.store_path.empty() && std::filesystem::exists(config.store_path)) {
      accepted = load_corpus(config.store_path);
      for (std::size_t i = 0; i < accepted.size(); ++i) {
        accepted_line[accepted[i].meta.id] = i + 1;
        status[accepted[i].meta.id] = Status::accepted;
      }
    }
    for (const auto& path : config.queue_paths) {
      for (auto& s : load_corpus(path)) {
        if (status.count(s.meta.id) && status[s.meta.id] != Status::accepted) {
          throw std::runtime_error(path + ": duplicate queued id \"" + s.meta.id + "\"");
        }
        status.emplace(s.meta.id, Status::unlabeled);
        queue.push_back(std::move(s));
      }
    }
    if (!config.checkpoint_path.empty() && std::filesystem::exists(config.checkpoint_path)) {
      std::ifstream in(config.checkpoint_path, std::ios::binary);
      std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      install(bytes);
    }
    routes();
  }

  std::shared_ptr<const Snapshot> current() const {
    std::lock_guard lock(snap_mu);
    return snap;
  }

  void install(const std::string& bytes) {
    auto s = std::make_shared<Snapshot>();
    s->ckpt = decode_checkpoint(bytes);
    s->provider = make_provider(s->ckpt.params, config.embedding_file);
    s->version = content_hash(bytes);
    std::lock_guard lock(snap_mu);
    snap = std::move(s);
  }

  void routes() {
    server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      auto s = current();
      if (!s) return reply_error(res, 503, "no model loaded");
      ordered_json j{{"status", "ok"}, {"model_version", s->version}};
      std::lock_guard lock(retrain_mu);
      j["retraining"] = retraining;
      if (!retrain_error.empty()) j["last_retrain_error"] = retrain_error;
      reply(res, 200, j.dump());
    });

    server.Get("/next", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(store_mu);
      for (const auto& s : queue) {
        if (status.at(s.meta.id) == Status::accepted) continue;
        ordered_json j{{"id", s.meta.id},
                       {"source", to_string(s.meta.source)},
                       {"split", to_string(s.meta.split)},
                       {"tokens", s.graph.tokens},
                       {"suggestions", config.no_suggest_splits.count(s.meta.split) == 0}};
        return reply(res, 200, j.dump());
      }
      res.status = 204;
    });

    server.Post("/suggest", [this](const httplib::Request& req, httplib::Response& res) {
      suggest(req, res);
    });
    server.Post("/annotations", [this](const httplib::Request& req, httplib::Response& res) {
      annotate(req, res);
    });
    server.Post("/retrain", [this](const httplib::Request&, httplib::Response& res) {
      retrain(res);
    });
  }

  void suggest(const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      return reply_error(res, 400, "request body is not JSON");
    }
    if (!body.is_object()) return reply_error(res, 400, "request body must be an object");

    AnnotatedSentence target;
    if (body.contains("id")) {
      if (!body["id"].is_string()) return reply_error(res, 422, "id must be a string");
      const auto id = body["id"].get<std::string>();
      std::lock_guard lock(store_mu);
      const AnnotatedSentence* found = nullptr;
      for (const auto* c : {&queue, &accepted}) {
        for (const auto& s : *c) {
          if (s.meta.id == id) found = &s;
        }
        if (found) break;
      }
      if (!found) return reply_error(res, 404, "unknown sentence \"" + id + "\"");
      if (config.no_suggest_splits.count(found->meta.split)) {
        return reply_error(res, 403, "suggestions are disabled for split \"" +
                                         std::string(to_string(found->meta.split)) + "\"");
      }
      target.meta = found->meta;
      target.graph.tokens = found->graph.tokens;
      auto it = status.find(id);
      if (it->second == Status::unlabeled) it->second = Status::suggested;
    } else if (body.contains("tokens")) {
      const auto& toks = body["tokens"];
      if (!toks.is_array()) return reply_error(res, 422, "tokens must be an array of strings");
      for (const auto& t : toks) {
        if (!t.is_string() || t.get<std::string>().empty()) {
          return reply_error(res, 422, "tokens must be non-empty strings");
        }
        target.graph.tokens.push_back(t.get<std::string>());
      }
    } else {
      return reply_error(res, 422, "request needs \"id\" or \"tokens\"");
    }

    auto s = current();
    if (!s) return reply_error(res, 503, "no model loaded");
    Prediction p;
    try {
      p = predict({target.meta.id, target.graph.tokens}, *s->provider, s->ckpt.params,
                  s->ckpt.inference);
    } catch (const ProviderError& e) {
      return reply_error(res, 422, e.what());
    }
    target.graph = std::move(p.graph);
    auto out = ordered_json::parse(serialize_record(target));
    out["scores"] = {{"entities", p.scores.entities},
                     {"relations", p.scores.relations},
                     {"attributes", p.scores.attributes}};
    reply(res, 200, out.dump());
  }

  void annotate(const httplib::Request& req, httplib::Response& res) {
    AnnotatedSentence record;
    try {
      record = parse_record(req.body, 0, {.validate = false});
    } catch (const CorpusError& e) {
      return reply_error(res, 422, e.detail());
    }
    ValidationReport report = validate_structural(record.graph);
    if (report.ok()) report.merge(validate_schema(record.graph));
    if (!report.ok()) return reply(res, 422, report_to_json(report));
    record = parse_record(req.body, 0, {.validate = true});

    std::lock_guard lock(store_mu);
    if (auto it = accepted_line.find(record.meta.id); it != accepted_line.end()) {
      return reply(res, 409,
                   ordered_json{{"error", "sentence already annotated"},
                                {"id", record.meta.id},
                                {"store_line", it->second}}
                       .dump());
    }
    if (config.store_path.empty()) return reply_error(res, 500, "no store configured");
    try {
      append_line(config.store_path, serialize_record(record));
    } catch (const std::exception& e) {
      return reply_error(res, 500, e.what());
    }
    accepted.push_back(record);
    accepted_line[record.meta.id] = accepted.size();
    status[record.meta.id] = Status::accepted;
    ordered_json j{{"id", record.meta.id}, {"store_line", accepted.size()}};
    j["warnings"] = json::parse(report_to_json(report))["warnings"];
    reply(res, 201, j.dump());
  }

  void retrain(httplib::Response& res) {
    Corpus train_set;
    {
      std::lock_guard lock(store_mu);
      for (const auto& s : accepted) {
        if (s.meta.split == Split::train || s.meta.split == Split::unlabeled) train_set.push_back(s);
      }
    }
    if (train_set.empty()) return reply_error(res, 422, "no accepted training annotations");

    std::lock_guard lock(retrain_mu);
    if (retraining) return reply_error(res, 409, "a retrain is already running");
    retraining = true;
    if (retrain_thread.joinable()) retrain_thread.join();
    const std::size_t n = train_set.size();
    retrain_thread = std::thread([this, data = std::move(train_set)] { run_retrain(data); });
    reply(res, 202, ordered_json{{"status", "retraining"}, {"sentences", n}}.dump());
  }

  void run_retrain(const Corpus& data) {
    std::string error;
    try {
      auto s = current();
      TrainConfig cfg = config.train;
      cfg.epochs = config.retrain_epochs;
      ModelParams init;
      std::unique_ptr<EmbeddingProvider> fresh;
      const EmbeddingProvider* provider = nullptr;
      if (s) {
        init = s->ckpt.params;
        cfg.inference = s->ckpt.inference;
        cfg.attrs_as_ents = init.shape.attrs_as_ents;
        provider = s->provider.get();
      } else {
        init = init_params(shape_for_training(data, config.fresh_dim, true, cfg), cfg.seed);
        fresh = make_provider(init);
        provider = fresh.get();
      }
      TrainResult result = train(data, {}, *provider, std::move(init), cfg);
      const std::string bytes = encode_checkpoint({std::move(result.best), cfg.inference});
      if (!config.checkpoint_path.empty()) {
        const std::string tmp = config.checkpoint_path + ".tmp";
        {
          std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
          out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
          if (!out.flush()) throw std::runtime_error("cannot write " + tmp);
        }
        std::filesystem::rename(tmp, config.checkpoint_path);
      }
      install(bytes);
    } catch (const std::exception& e) {
      error = e.what();
      std::cerr << "retrain failed: " << error << "\n";
    }
    std::lock_guard lock(retrain_mu);
    retraining = false;
    retrain_error = error;
    retrain_cv.notify_all();
  }

  void wait_for_retrain() {
    std::unique_lock lock(retrain_mu);
    retrain_cv.wait(lock, [this] { return !retraining; });
  }
};

SuggestService::SuggestService(ServiceConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

SuggestService::~SuggestService() {
  stop();
  wait_for_retrain();
  if (impl_->retrain_thread.joinable()) impl_->retrain_thread.join();
}

int SuggestService::start() {
  auto& srv = impl_->server;
  int port = impl_->config.port;
  if (port == 0) {
    port = srv.bind_to_any_port(impl_->config.host);
  } else if (!srv.bind_to_port(impl_->config.host, port)) {
    port = -1;
  }
  if (port < 0) {
    throw std::runtime_error("cannot bind " + impl_->config.host + ":" +
                             std::to_string(impl_->config.port));
  }
  impl_->server_thread = std::thread([&srv] { srv.listen_after_bind(); });
  return port;
}

bool SuggestService::run() {
  return impl_->server.listen(impl_->config.host, impl_->config.port);
}

void SuggestService::stop() {
  impl_->server.stop();
  if (impl_->server_thread.joinable()) impl_->server_thread.join();
}

void SuggestService::wait_for_retrain() { impl_->wait_for_retrain(); }

std::string SuggestService::model_version() const {
  auto s = impl_->current();
  return s ? s->version : std::string();
}

}  // namespace claimgraph
