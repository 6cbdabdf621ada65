#include <algorithm>
#include <cmath>

#include "claimgraph/kernels.hpp"
#include "claimgraph/model.hpp"

namespace claimgraph {

std::vector<Span> enumerate_spans(std::size_t n, std::size_t max_span_size) {
  std::vector<Span> spans;
  for (std::size_t start = 0; start < n; ++start) {
    const std::size_t last = std::min(n, start + max_span_size);
    for (std::size_t end = start + 1; end <= last; ++end) spans.push_back({start, end});
  }
  return spans;
}

std::vector<double> span_repr_attention(const Matrix& h, Span span, const ModelParams& params) {
  const Span spans[] = {span};
  auto pooled = kernels::serial::attention_pool(h, spans, params.attn_w.row(0), params.attn_b(0, 0));
  return {pooled.repr.data.begin(), pooled.repr.data.end()};
}

std::vector<double> span_repr_maxpool(const Matrix& h, Span span) {
  const Span spans[] = {span};
  auto pooled = kernels::serial::max_pool(h, spans);
  return {pooled.repr.data.begin(), pooled.repr.data.end()};
}

std::vector<double> entity_context(const Matrix& h) { return span_repr_maxpool(h, {0, h.rows}); }

Span between_region(Span a, Span b) {
  const std::size_t start = std::min(a.end, b.end);
  const std::size_t end = std::max(a.start, b.start);
  return start < end ? Span{start, end} : Span{start, start};
}

std::vector<double> between_context(const Matrix& h, Span a, Span b) {
  return span_repr_maxpool(h, between_region(a, b));
}

std::size_t width_index(Span span, std::size_t max_span_size) {
  return std::min(span.length(), max_span_size) - 1;
}

std::size_t argmax_first(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

Matrix pooled_reprs(const Matrix& h, std::span<const Span> spans, const ModelParams& params,
                    SpanReprMode mode) {
  if (mode == SpanReprMode::attention) {
    return kernels::omp::attention_pool(h, spans, params.attn_w.row(0), params.attn_b(0, 0)).repr;
  }
  return kernels::omp::max_pool(h, spans).repr;
}

void put(std::span<double> dst, std::size_t& at, std::span<const double> src) {
  std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(at));
  at += src.size();
}

struct EntityPass {
  std::vector<Span> spans;
  Matrix reprs;
  std::vector<ScoredEntity> entities;
  std::vector<std::size_t> entity_rows;  // row in `spans` of each entity
};

EntityPass run_entity_pass(const Matrix& h, const ModelParams& params,
                           const InferenceConfig& config) {
  EntityPass pass;
  const std::size_t d = params.shape.dim;
  pass.spans = enumerate_spans(h.rows, config.max_span_size);
  if (pass.spans.empty()) return pass;
  pass.reprs = pooled_reprs(h, pass.spans, params, config.span_repr_mode);
  const auto ctx = entity_context(h);

  Matrix x(pass.spans.size(), 2 * d + kWidthDim);
  for (std::size_t i = 0; i < pass.spans.size(); ++i) {
    auto row = x.row(i);
    std::size_t at = 0;
    put(row, at, pass.reprs.row(i));
    put(row, at, params.width_emb.row(width_index(pass.spans[i], params.width_emb.rows)));
    put(row, at, ctx);
  }
  Matrix logits = kernels::omp::linear(x, params.ent_w, params.ent_b.row(0));

  const std::size_t none = params.none_class();
  for (std::size_t i = 0; i < pass.spans.size(); ++i) {
    auto z = logits.row(i);
    const std::size_t cls = argmax_first(z);
    if (cls == none) continue;
    double norm = 0.0;
    for (double v : z) norm += std::exp(v - z[cls]);
    pass.entities.push_back({pass.spans[i], cls, 1.0 / norm});
    pass.entity_rows.push_back(i);
  }
  return pass;
}

Matrix rows_of(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), m.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
  }
  return out;
}

std::vector<ScoredRelation> relations_from_reprs(const std::vector<ScoredEntity>& entities,
                                                 const Matrix& entity_reprs, const Matrix& h,
                                                 const ModelParams& params,
                                                 const InferenceConfig& config) {
  std::vector<ScoredRelation> out;
  const std::size_t m = entities.size();
  if (m < 2) return out;
  const std::size_t d = params.shape.dim;

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j) pairs.emplace_back(i, j);

  std::vector<Span> regions;
  regions.reserve(pairs.size());
  for (auto [i, j] : pairs) regions.push_back(between_region(entities[i].span, entities[j].span));
  const auto between = kernels::omp::max_pool(h, regions);

  Matrix x(pairs.size(), 3 * d + 2 * kWidthDim);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    auto [i, j] = pairs[p];
    auto row = x.row(p);
    std::size_t at = 0;
    put(row, at, entity_reprs.row(i));
    put(row, at, params.width_emb.row(width_index(entities[i].span, params.width_emb.rows)));
    put(row, at, between.repr.row(p));
    put(row, at, params.width_emb.row(width_index(entities[j].span, params.width_emb.rows)));
    put(row, at, entity_reprs.row(j));
  }
  Matrix logits = kernels::omp::linear(x, params.rel_w, params.rel_b.row(0));
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    for (std::size_t t = 0; t < kNumRelationTypes; ++t) {
      const double score = sigmoid(logits(p, t));
      if (score > config.rel_threshold) {
        out.push_back({pairs[p].first, pairs[p].second, kRelationTypes[t], score});
      }
    }
  }
  return out;
}

}  // namespace

std::vector<ScoredEntity> classify_entities(const Matrix& h, const ModelParams& params,
                                            const InferenceConfig& config) {
  return run_entity_pass(h, params, config).entities;
}

Matrix attribute_logits(const Matrix& span_reprs, const ModelParams& params) {
  return kernels::omp::linear(span_reprs, params.attr_w, params.attr_b.row(0));
}

std::vector<std::vector<AttributeType>> assign_attributes(const Matrix& logits, double threshold) {
  std::vector<std::vector<AttributeType>> out(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    for (std::size_t t = 0; t < kNumAttributeTypes; ++t) {
      if (sigmoid(logits(i, t)) > threshold) out[i].push_back(kAttributeTypes[t]);
    }
  }
  return out;
}

std::vector<std::vector<AttributeType>> classify_attributes(const Matrix& span_reprs,
                                                            const ModelParams& params,
                                                            const InferenceConfig& config) {
  return assign_attributes(attribute_logits(span_reprs, params), config.attr_threshold);
}

std::vector<ScoredRelation> classify_relations(const std::vector<ScoredEntity>& entities,
                                               const Matrix& h, const ModelParams& params,
                                               const InferenceConfig& config) {
  if (entities.size() < 2) return {};
  std::vector<Span> spans;
  for (const auto& e : entities) spans.push_back(e.span);
  const Matrix reprs = pooled_reprs(h, spans, params, config.span_repr_mode);
  return relations_from_reprs(entities, reprs, h, params, config);
}

Prediction predict(const SentenceView& sentence, const EmbeddingProvider& provider,
                   const ModelParams& params, const InferenceConfig& config) {
  Prediction out;
  out.graph.tokens.assign(sentence.tokens.begin(), sentence.tokens.end());
  if (sentence.tokens.empty()) return out;

  const Matrix h = provider.embed(sentence, params);
  EntityPass pass = run_entity_pass(h, params, config);
  const Matrix entity_reprs = rows_of(pass.reprs, pass.entity_rows);

  std::vector<std::vector<AttributeType>> attrs(pass.entities.size());
  std::vector<std::vector<double>> attr_scores(pass.entities.size());
  if (params.shape.attrs_as_ents) {
    for (std::size_t i = 0; i < pass.entities.size(); ++i) {
      attrs[i] = params.shape.entity_labels[pass.entities[i].label].attrs;
      attr_scores[i].assign(attrs[i].size(), pass.entities[i].confidence);
    }
  } else if (!pass.entities.empty()) {
    Matrix logits;
    if (config.attribute_filtering == AttributeFiltering::cascaded) {
      logits = attribute_logits(entity_reprs, params);
    } else {
      logits = rows_of(attribute_logits(pass.reprs, params), pass.entity_rows);
    }
    attrs = assign_attributes(logits, config.attr_threshold);
    for (std::size_t i = 0; i < attrs.size(); ++i) {
      for (auto a : attrs[i]) attr_scores[i].push_back(sigmoid(logits(i, static_cast<std::size_t>(a))));
    }
  }

  for (std::size_t i = 0; i < pass.entities.size(); ++i) {
    const auto& e = pass.entities[i];
    out.graph.entities.push_back({e.span, params.shape.entity_labels[e.label].type});
    out.scores.entities.push_back(e.confidence);
    if (!attrs[i].empty()) {
      out.graph.attributes.push_back({i, attrs[i]});
      out.scores.attributes.push_back(attr_scores[i]);
    }
  }

  for (const auto& r : relations_from_reprs(pass.entities, entity_reprs, h, params, config)) {
    out.graph.relations.push_back({r.head, r.tail, r.type});
    out.scores.relations.push_back(r.confidence);
  }
  return out;
}

Corpus predict_corpus(const Corpus& corpus, const EmbeddingProvider& provider,
                      const ModelParams& params, const InferenceConfig& config,
                      std::vector<PredictionScores>* scores) {
  Corpus out(corpus.size());
  std::vector<PredictionScores> all(corpus.size());
  const auto n = static_cast<std::ptrdiff_t>(corpus.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto& s = corpus[i];
      auto p = predict({s.meta.id, s.graph.tokens}, provider, params, config);
      out[i].meta = s.meta;
      out[i].graph = std::move(p.graph);
      all[i] = std::move(p.scores);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  if (scores) *scores = std::move(all);
  return out;
}

}  // namespace claimgraph
