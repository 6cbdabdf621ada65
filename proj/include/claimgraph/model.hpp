#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "claimgraph/attrs_as_ents.hpp"
#include "claimgraph/corpus.hpp"
#include "claimgraph/schema.hpp"
#include "claimgraph/tensor.hpp"

namespace claimgraph {

inline constexpr std::size_t kWidthDim = 25;

enum class SpanReprMode { attention, maxpool };
enum class AttributeFiltering { cascaded, unfiltered };

std::string_view to_string(SpanReprMode m);
std::string_view to_string(AttributeFiltering f);
std::optional<SpanReprMode> parse_span_repr_mode(std::string_view s);
std::optional<AttributeFiltering> parse_attribute_filtering(std::string_view s);

struct InferenceConfig {
  double attr_threshold = 0.55;
  double rel_threshold = 0.4;
  std::size_t max_span_size = 20;
  SpanReprMode span_repr_mode = SpanReprMode::attention;
  AttributeFiltering attribute_filtering = AttributeFiltering::cascaded;

  // Throws std::invalid_argument unless thresholds lie in (0, 1) and max_span_size > 0.
  void check() const;
  friend bool operator==(const InferenceConfig&, const InferenceConfig&) = default;
};

// Shape of a model: embedding dimension, entity class inventory and the
// optional toy vocabulary.
struct ModelShape {
  std::size_t dim = 0;
  std::size_t max_span_size = 20;
  // Entity classes; the "none" class is appended after them. Plain entity
  // types in the default model, collapsed labels under attrs-as-ents.
  std::vector<CollapsedLabel> entity_labels;
  bool attrs_as_ents = false;
  // Rows of the trainable token table; empty when embeddings come from a file.
  std::vector<std::string> vocabulary;

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

std::vector<CollapsedLabel> plain_entity_labels();

struct ModelParams {
  ModelShape shape;
  Matrix attn_w;     // 1 x d
  Matrix attn_b;     // 1 x 1
  Matrix width_emb;  // max_span_size x 25, row = span length - 1
  Matrix ent_w;      // (classes + 1) x (2d + 25): [span ; width ; context]
  Matrix ent_b;      // 1 x (classes + 1)
  Matrix rel_w;      // 7 x (3d + 50): [head ; head width ; between ; tail width ; tail]
  Matrix rel_b;      // 1 x 7
  Matrix attr_w;     // 7 x d
  Matrix attr_b;     // 1 x 7
  Matrix token_emb;  // |vocabulary| x d, 0 x d without a vocabulary

  std::size_t num_entity_classes() const { return shape.entity_labels.size() + 1; }
  std::size_t none_class() const { return shape.entity_labels.size(); }

  // Fixed-order named view of every tensor.
  std::vector<std::pair<std::string_view, Matrix*>> tensors();
  std::vector<std::pair<std::string_view, const Matrix*>> tensors() const;

  ModelParams zeros_like() const;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Zero tensors of the right shapes.
ModelParams make_params(const ModelShape& shape);
// Small random initialisation (uniform +-1/sqrt(fan_in) for dense layers,
// normal for embeddings).
ModelParams init_params(const ModelShape& shape, std::uint64_t seed);

struct SentenceView {
  std::string_view id;
  std::span<const std::string> tokens;
};

class ProviderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Supplies one d-dimensional vector per token.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual bool trainable() const = 0;
  virtual Matrix embed(const SentenceView& s, const ModelParams& params) const = 0;
  // Adds dL/dθ for provider-owned parameters given dL/dH.
  virtual void accumulate_gradient(const SentenceView&, const Matrix& /*d_h*/,
                                   ModelParams& /*grad*/) const {}
};

// Trainable lookup table stored in ModelParams::token_emb; unknown tokens use row 0.
class LookupProvider final : public EmbeddingProvider {
 public:
  LookupProvider(std::vector<std::string> vocabulary, std::size_t dim);
  std::size_t dim() const override { return dim_; }
  bool trainable() const override { return true; }
  Matrix embed(const SentenceView& s, const ModelParams& params) const override;
  void accumulate_gradient(const SentenceView& s, const Matrix& d_h,
                           ModelParams& grad) const override;

  std::size_t index_of(const std::string& token) const;

 private:
  std::size_t dim_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr std::string_view kUnknownToken = "<unk>";

// "<unk>" followed by the distinct tokens of the corpus in first-seen order.
std::vector<std::string> build_vocabulary(const Corpus& corpus);

// Precomputed contextual embeddings keyed by sentence id.
class FileProvider final : public EmbeddingProvider {
 public:
  explicit FileProvider(std::map<std::string, Matrix> table, std::size_t dim);
  static FileProvider load(const std::string& path);

  std::size_t dim() const override { return dim_; }
  bool trainable() const override { return false; }
  Matrix embed(const SentenceView& s, const ModelParams& params) const override;

 private:
  std::map<std::string, Matrix> table_;
  std::size_t dim_;
};

// CGEMB1 embedding file: magic, d, count, then {id, n, n x d float32} records.
void write_embedding_file(std::ostream& out, const std::map<std::string, Matrix>& table,
                          std::size_t dim);
std::map<std::string, Matrix> read_embedding_file(std::istream& in, std::size_t* dim = nullptr);

std::unique_ptr<EmbeddingProvider> make_provider(const ModelParams& params,
                                                 const std::string& embedding_file = {});

// ---- extraction heads ----

std::vector<Span> enumerate_spans(std::size_t n, std::size_t max_span_size);

std::vector<double> span_repr_attention(const Matrix& h, Span span, const ModelParams& params);
std::vector<double> span_repr_maxpool(const Matrix& h, Span span);
// Maxpool over the whole sentence.
std::vector<double> entity_context(const Matrix& h);
// Maxpool over tokens strictly between the spans; zero vector when none.
std::vector<double> between_context(const Matrix& h, Span a, Span b);
Span between_region(Span a, Span b);

std::size_t width_index(Span span, std::size_t max_span_size);

struct ScoredEntity {
  Span span;
  std::size_t label = 0;  // index into ModelShape::entity_labels
  double confidence = 0.0;
};

struct ScoredRelation {
  std::size_t head = 0;
  std::size_t tail = 0;
  RelationType type = RelationType::arg0;
  double confidence = 0.0;
};

// Index of the largest value; the first one wins ties.
std::size_t argmax_first(std::span<const double> values);
double sigmoid(double x);

std::vector<ScoredEntity> classify_entities(const Matrix& h, const ModelParams& params,
                                            const InferenceConfig& config);

// Per-row attribute sets from raw logits: type t kept iff sigmoid(logit) > threshold.
std::vector<std::vector<AttributeType>> assign_attributes(const Matrix& logits, double threshold);
// Attribute logits for the given span representations (rows of x).
Matrix attribute_logits(const Matrix& span_reprs, const ModelParams& params);
std::vector<std::vector<AttributeType>> classify_attributes(const Matrix& span_reprs,
                                                            const ModelParams& params,
                                                            const InferenceConfig& config);

std::vector<ScoredRelation> classify_relations(const std::vector<ScoredEntity>& entities,
                                               const Matrix& h, const ModelParams& params,
                                               const InferenceConfig& config);

struct PredictionScores {
  std::vector<double> entities;
  std::vector<double> relations;
  // Per entity: sigmoid score of each assigned attribute, aligned with the graph's attribute record.
  std::vector<std::vector<double>> attributes;
};

struct Prediction {
  ClaimGraph graph;
  PredictionScores scores;
};

Prediction predict(const SentenceView& sentence, const EmbeddingProvider& provider,
                   const ModelParams& params, const InferenceConfig& config);

// Predicts every sentence (ids and metadata preserved) in parallel.
Corpus predict_corpus(const Corpus& corpus, const EmbeddingProvider& provider,
                      const ModelParams& params, const InferenceConfig& config,
                      std::vector<PredictionScores>* scores = nullptr);

// ---- training objective ----

struct LossConfig {
  std::size_t neg_entities = 100;
  std::size_t neg_relations = 100;
  double dropout = 0.1;  // 0 disables
  std::uint64_t seed = 0;
  std::size_t max_span_size = 20;
  SpanReprMode span_repr_mode = SpanReprMode::attention;
  AttributeFiltering attribute_filtering = AttributeFiltering::cascaded;
};

struct LossParts {
  double total = 0.0;
  double entity = 0.0;
  double relation = 0.0;
  double attribute = 0.0;
};

struct LossResult {
  LossParts loss;
  ModelParams grad;
};

// L = L_e + L_r + L_a, each a mean over the batch's samples, with exact
// gradients for every tensor. Negative samples and dropout masks are seeded
// by (config.seed, sentence id), so the result does not depend on batch order
// beyond floating-point summation.
LossResult joint_loss(std::span<const AnnotatedSentence> batch, const EmbeddingProvider& provider,
                      const ModelParams& params, const LossConfig& config, bool parallel = true);

// Loss only (no gradient), same sampling.
LossParts joint_loss_value(std::span<const AnnotatedSentence> batch,
                           const EmbeddingProvider& provider, const ModelParams& params,
                           const LossConfig& config);

// Gold entity class of a sentence's entity i under the model's label inventory;
// throws std::invalid_argument when the label is not in the inventory.
std::size_t gold_entity_class(const ClaimGraph& g, std::size_t entity, const ModelShape& shape);

}  // namespace claimgraph
