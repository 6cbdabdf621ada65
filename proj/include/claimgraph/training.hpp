#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "claimgraph/corpus.hpp"
#include "claimgraph/metrics.hpp"
#include "claimgraph/model.hpp"

namespace claimgraph {

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 8;
  double learning_rate = 5e-5;
  double warmup_fraction = 0.1;
  double weight_decay = 0.01;
  double max_grad_norm = 1.0;
  double dropout = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  std::size_t neg_entities = 100;
  std::size_t neg_relations = 100;
  InferenceConfig inference;
  bool attrs_as_ents = false;
  // Tensors excluded from weight decay.
  std::vector<std::string> no_decay = {"attn_b", "ent_b", "rel_b", "attr_b", "width_emb"};
  bool parallel = true;

  // Throws std::invalid_argument on out-of-range settings.
  void check() const;
  LossConfig loss_config(std::uint64_t step_seed) const;
};

// Linear warmup from 0 to the peak, then linear decay to 0 at total_steps.
double lr_at_step(std::size_t step, std::size_t total_steps, const TrainConfig& config);

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamState {
  ModelParams m;
  ModelParams v;
  std::size_t step = 0;  // updates applied so far
};

AdamState make_adam_state(const ModelParams& params);

// Global-norm clipping, bias-corrected Adam moments, decoupled weight decay.
// Returns the gradient norm before clipping. `grads` is clipped in place.
double optimizer_step(ModelParams& params, ModelParams& grads, AdamState& state, double lr,
                      const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;
  LossParts loss;  // mean over batches
  double learning_rate = 0.0;
  std::optional<MetricsReport> validation;
  double selection_score = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_score = -1.0;
  std::string selection_split;  // "val" or "train"
};

std::string train_report_to_json(const TrainReport& report);

struct TrainResult {
  ModelParams best;
  ModelParams last;
  TrainReport report;
};

using ProgressFn = std::function<void(const EpochRecord&)>;

// Model shape for training on `corpus` (entity label inventory, and a vocabulary
// when `lookup_dim` is non-zero).
ModelShape shape_for_training(const Corpus& train, std::size_t dim, bool lookup_vocabulary,
                              const TrainConfig& config);

// Trains from `init`. Each epoch is scored on `validation` (or on `train` when
// `validation` is empty); the best epoch by average micro-F1 is retained.
TrainResult train(const Corpus& train, const Corpus& validation, const EmbeddingProvider& provider,
                  ModelParams init, const TrainConfig& config, const ProgressFn& progress = {});

// ---- gradient verification ----

struct GradCheckGroup {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckOptions {
  double epsilon = 1e-4;
  // Elements whose gradient magnitudes are both below this are compared absolutely.
  double rel_floor = 1e-6;
  std::size_t neg_entities = 100;
  std::size_t neg_relations = 100;
  std::uint64_t seed = 7;
  SpanReprMode span_repr_mode = SpanReprMode::attention;
  AttributeFiltering attribute_filtering = AttributeFiltering::cascaded;
  // Optional hook applied to the analytic gradient (test fixtures corrupt it).
  std::function<void(ModelParams&)> tamper;
};

// Central differences of the dropout-free joint loss against the analytic gradient.
std::vector<GradCheckGroup> grad_check(const ModelParams& params,
                                       std::span<const AnnotatedSentence> batch,
                                       const EmbeddingProvider& provider,
                                       const GradCheckOptions& options);

struct GradCheckFixture {
  ModelParams params;
  Corpus batch;
};

// Random small lookup model over random sentences. Token table coordinates are
// well separated so max-pooling has no near-ties within epsilon.
GradCheckFixture make_gradcheck_fixture(std::size_t dim, std::size_t sentences, std::uint64_t seed);

}  // namespace claimgraph
