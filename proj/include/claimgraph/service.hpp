#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "claimgraph/corpus.hpp"
#include "claimgraph/training.hpp"

namespace claimgraph {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks an ephemeral port
  std::string checkpoint_path;
  std::string embedding_file;  // empty: lookup provider from the checkpoint
  std::string store_path;      // append-only file of accepted annotations
  std::vector<std::string> queue_paths;  // sentences to annotate, served in file order
  std::set<Split> no_suggest_splits;
  std::size_t retrain_epochs = 5;
  // Embedding size of a fresh lookup model when /retrain runs with no checkpoint loaded.
  std::size_t fresh_dim = 32;
  TrainConfig train;
};

// Fills store and checkpoint paths from CLAIMGRAPH_STORE / CLAIMGRAPH_CKPT when unset.
void apply_service_env(ServiceConfig& config);

// Parses a comma-separated split list such as "test" or "val,test".
std::set<Split> parse_split_list(const std::string& text);

// Suggestion-assisted annotation service.
//   GET  /health       200 {status, model_version} | 503
//   GET  /next         200 next queued sentence | 204
//   POST /suggest      {id} or {tokens}: graph JSON plus "scores" | 403 | 404 | 422
//   POST /annotations  record: 201 | 409 duplicate id | 422 validation report
//   POST /retrain      202 | 409 running | 422 empty store
class SuggestService {
 public:
  // Loads the store, queue and (when present) checkpoint. Throws on malformed files.
  explicit SuggestService(ServiceConfig config);
  ~SuggestService();
  SuggestService(const SuggestService&) = delete;
  SuggestService& operator=(const SuggestService&) = delete;

  // Binds and serves on a background thread; returns the bound port.
  int start();
  // Binds and serves on the calling thread until stop().
  bool run();
  void stop();

  // Blocks until no retrain is running.
  void wait_for_retrain();
  std::string model_version() const;  // empty before a model is loaded

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace claimgraph
