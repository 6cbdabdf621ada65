#include <cmath>
#include <random>
#include <stdexcept>

#include "claimgraph/model.hpp"

namespace claimgraph {

std::string_view to_string(SpanReprMode m) {
  return m == SpanReprMode::attention ? "attention" : "maxpool";
}

std::string_view to_string(AttributeFiltering f) {
  return f == AttributeFiltering::cascaded ? "cascaded" : "unfiltered";
}

std::optional<SpanReprMode> parse_span_repr_mode(std::string_view s) {
  if (s == "attention") return SpanReprMode::attention;
  if (s == "maxpool") return SpanReprMode::maxpool;
  return std::nullopt;
}

std::optional<AttributeFiltering> parse_attribute_filtering(std::string_view s) {
  if (s == "cascaded") return AttributeFiltering::cascaded;
  if (s == "unfiltered") return AttributeFiltering::unfiltered;
  return std::nullopt;
}

void InferenceConfig::check() const {
  if (!(attr_threshold > 0.0 && attr_threshold < 1.0))
    throw std::invalid_argument("attribute threshold must lie in (0, 1)");
  if (!(rel_threshold > 0.0 && rel_threshold < 1.0))
    throw std::invalid_argument("relation threshold must lie in (0, 1)");
  if (max_span_size == 0) throw std::invalid_argument("max span size must be positive");
}

std::vector<CollapsedLabel> plain_entity_labels() {
  std::vector<CollapsedLabel> labels;
  for (auto t : kEntityTypes) labels.push_back({t, {}});
  return labels;
}

std::vector<std::pair<std::string_view, Matrix*>> ModelParams::tensors() {
  return {{"attn_w", &attn_w}, {"attn_b", &attn_b}, {"width_emb", &width_emb},
          {"ent_w", &ent_w},   {"ent_b", &ent_b},   {"rel_w", &rel_w},
          {"rel_b", &rel_b},   {"attr_w", &attr_w}, {"attr_b", &attr_b},
          {"token_emb", &token_emb}};
}

std::vector<std::pair<std::string_view, const Matrix*>> ModelParams::tensors() const {
  return {{"attn_w", &attn_w}, {"attn_b", &attn_b}, {"width_emb", &width_emb},
          {"ent_w", &ent_w},   {"ent_b", &ent_b},   {"rel_w", &rel_w},
          {"rel_b", &rel_b},   {"attr_w", &attr_w}, {"attr_b", &attr_b},
          {"token_emb", &token_emb}};
}

ModelParams make_params(const ModelShape& shape) {
  if (shape.dim == 0) throw std::invalid_argument("model dimension must be positive");
  if (shape.entity_labels.empty()) throw std::invalid_argument("model needs entity labels");
  const std::size_t d = shape.dim;
  const std::size_t classes = shape.entity_labels.size() + 1;
  ModelParams p;
  p.shape = shape;
  p.attn_w = Matrix(1, d);
  p.attn_b = Matrix(1, 1);
  p.width_emb = Matrix(shape.max_span_size, kWidthDim);
  p.ent_w = Matrix(classes, 2 * d + kWidthDim);
  p.ent_b = Matrix(1, classes);
  p.rel_w = Matrix(kNumRelationTypes, 3 * d + 2 * kWidthDim);
  p.rel_b = Matrix(1, kNumRelationTypes);
  p.attr_w = Matrix(kNumAttributeTypes, d);
  p.attr_b = Matrix(1, kNumAttributeTypes);
  p.token_emb = Matrix(shape.vocabulary.size(), d);
  return p;
}

ModelParams ModelParams::zeros_like() const { return make_params(shape); }

ModelParams init_params(const ModelShape& shape, std::uint64_t seed) {
  ModelParams p = make_params(shape);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto uniform_fill = [&](Matrix& m, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& v : m.data) v = u(rng);
  };
  uniform_fill(p.attn_w, shape.dim);
  uniform_fill(p.ent_w, p.ent_w.cols);
  uniform_fill(p.ent_b, p.ent_w.cols);
  uniform_fill(p.rel_w, p.rel_w.cols);
  uniform_fill(p.rel_b, p.rel_w.cols);
  uniform_fill(p.attr_w, p.attr_w.cols);
  uniform_fill(p.attr_b, p.attr_w.cols);
  for (auto& v : p.width_emb.data) v = normal(rng);
  for (auto& v : p.token_emb.data) v = normal(rng);
  return p;
}

}  // namespace claimgraph
