#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

#include "claimgraph/kernels.hpp"
#include "claimgraph/model.hpp"

namespace claimgraph {

std::size_t gold_entity_class(const ClaimGraph& g, std::size_t entity, const ModelShape& shape) {
  const auto label = shape.attrs_as_ents
                         ? make_collapsed_label(g.entities[entity].type, g.attributes_of(entity))
                         : CollapsedLabel{g.entities[entity].type, {}};
  auto it = std::find(shape.entity_labels.begin(), shape.entity_labels.end(), label);
  if (it == shape.entity_labels.end()) {
    throw std::invalid_argument("entity label \"" + label.str() + "\" is not a model class");
  }
  return static_cast<std::size_t>(it - shape.entity_labels.begin());
}

namespace {

using Targets = std::array<double, kNumRelationTypes>;
static_assert(kNumRelationTypes == kNumAttributeTypes);

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Samples drawn for one sentence. Entity row i < #gold is gold entity i.
struct SentencePlan {
  std::vector<Span> spans;
  std::vector<std::size_t> classes;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // rows into spans
  std::vector<Targets> rel_targets;
  std::vector<std::size_t> attr_rows;
  std::vector<Targets> attr_targets;
  std::uint64_t seed = 0;
};

template <typename T>
void sample_prefix(std::vector<T>& items, std::size_t k, std::mt19937_64& rng) {
  k = std::min(k, items.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, items.size() - 1);
    std::swap(items[i], items[pick(rng)]);
  }
  items.resize(k);
}

SentencePlan plan_sentence(const AnnotatedSentence& s, const ModelShape& shape,
                           const LossConfig& config) {
  const ClaimGraph& g = s.graph;
  SentencePlan plan;
  plan.seed = config.seed ^ fnv1a(s.meta.id);
  std::mt19937_64 rng(plan.seed);

  const std::size_t m = g.entities.size();
  std::set<Span> gold_spans;
  for (std::size_t i = 0; i < m; ++i) {
    plan.spans.push_back(g.entities[i].span);
    plan.classes.push_back(gold_entity_class(g, i, shape));
    gold_spans.insert(g.entities[i].span);
  }
  std::vector<Span> negatives;
  for (Span sp : enumerate_spans(g.tokens.size(), config.max_span_size)) {
    if (!gold_spans.count(sp)) negatives.push_back(sp);
  }
  sample_prefix(negatives, config.neg_entities, rng);
  for (Span sp : negatives) {
    plan.spans.push_back(sp);
    plan.classes.push_back(shape.entity_labels.size());
  }

  std::map<std::pair<std::size_t, std::size_t>, Targets> gold_pairs;
  std::vector<std::pair<std::size_t, std::size_t>> pair_order;
  for (const auto& r : g.relations) {
    auto key = std::make_pair(r.head, r.tail);
    auto [it, inserted] = gold_pairs.try_emplace(key, Targets{});
    if (inserted) pair_order.push_back(key);
    it->second[static_cast<std::size_t>(r.type)] = 1.0;
  }
  for (auto key : pair_order) {
    plan.pairs.push_back(key);
    plan.rel_targets.push_back(gold_pairs[key]);
  }
  std::vector<std::pair<std::size_t, std::size_t>> neg_pairs;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j && !gold_pairs.count({i, j})) neg_pairs.emplace_back(i, j);
  sample_prefix(neg_pairs, config.neg_relations, rng);
  for (auto key : neg_pairs) {
    plan.pairs.push_back(key);
    plan.rel_targets.push_back(Targets{});
  }

  if (!shape.attrs_as_ents) {
    const std::size_t rows =
        config.attribute_filtering == AttributeFiltering::cascaded ? m : plan.spans.size();
    for (std::size_t i = 0; i < rows; ++i) {
      Targets t{};
      if (i < m) {
        for (auto a : g.attributes_of(i)) t[static_cast<std::size_t>(a)] = 1.0;
      }
      plan.attr_rows.push_back(i);
      plan.attr_targets.push_back(t);
    }
  }
  return plan;
}

struct Normalizers {
  double entity = 0, relation = 0, attribute = 0;
};

class DropoutMasks {
 public:
  DropoutMasks(double p, std::uint64_t seed) : p_(p), rng_(seed ^ 0x9E3779B97F4A7C15ull) {}

  // Empty when dropout is disabled.
  std::vector<double> next(std::size_t n) {
    if (p_ <= 0.0) return {};
    std::vector<double> mask(n);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double keep = 1.0 / (1.0 - p_);
    for (auto& v : mask) v = u(rng_) < p_ ? 0.0 : keep;
    return mask;
  }

 private:
  double p_;
  std::mt19937_64 rng_;
};

void apply_mask(std::span<double> x, const std::vector<double>& mask) {
  if (mask.empty()) return;
  for (std::size_t k = 0; k < x.size(); ++k) x[k] *= mask[k];
}

double bce(double z, double y) { return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))); }

void add_outer(Matrix& w, std::span<const double> dz, std::span<const double> x) {
  for (std::size_t o = 0; o < dz.size(); ++o) {
    if (dz[o] == 0.0) continue;
    auto row = w.row(o);
    for (std::size_t k = 0; k < x.size(); ++k) row[k] += dz[o] * x[k];
  }
}

// dx = W^T dz
void back_linear(const Matrix& w, std::span<const double> dz, std::span<double> dx) {
  std::fill(dx.begin(), dx.end(), 0.0);
  for (std::size_t o = 0; o < dz.size(); ++o) {
    auto row = w.row(o);
    for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += row[k] * dz[o];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

void add_to(std::span<double> dst, std::span<const double> src) {
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
}

struct SentenceResult {
  LossParts loss;
  ModelParams grad;
};

SentenceResult sentence_loss(const AnnotatedSentence& s, const SentencePlan& plan,
                             const EmbeddingProvider& provider, const ModelParams& params,
                             const LossConfig& config, const Normalizers& norm, bool want_grad) {
  SentenceResult res;
  if (want_grad) res.grad = params.zeros_like();
  if (plan.spans.empty()) return res;

  const SentenceView view{s.meta.id, s.graph.tokens};
  const Matrix h = provider.embed(view, params);
  const std::size_t n = h.rows;
  const std::size_t d = params.shape.dim;
  const std::size_t width_rows = params.width_emb.rows;
  const bool attention = config.span_repr_mode == SpanReprMode::attention;

  kernels::AttentionPool att;
  kernels::MaxPool mp;
  const Matrix* reprs;
  if (attention) {
    att = kernels::serial::attention_pool(h, plan.spans, params.attn_w.row(0), params.attn_b(0, 0));
    reprs = &att.repr;
  } else {
    mp = kernels::serial::max_pool(h, plan.spans);
    reprs = &mp.repr;
  }
  const Span whole[] = {{0, n}};
  const auto ctx = kernels::serial::max_pool(h, whole);

  DropoutMasks dropout(config.dropout, plan.seed);
  Matrix d_reprs(plan.spans.size(), d);
  std::vector<double> d_ctx(d, 0.0);
  Matrix d_h(n, d);
  ModelParams& g = res.grad;

  // Entities: softmax cross-entropy over classes + none.
  const std::size_t classes = params.num_entity_classes();
  const std::size_t ent_in = 2 * d + kWidthDim;
  std::vector<double> x(ent_in), dx(ent_in), z(classes), dz(classes);
  for (std::size_t i = 0; i < plan.spans.size(); ++i) {
    const std::size_t w_row = width_index(plan.spans[i], width_rows);
    std::size_t at = 0;
    for (double v : reprs->row(i)) x[at++] = v;
    for (double v : params.width_emb.row(w_row)) x[at++] = v;
    for (double v : ctx.repr.row(0)) x[at++] = v;
    const auto mask = dropout.next(ent_in);
    apply_mask(x, mask);

    double zmax = -INFINITY;
    for (std::size_t c = 0; c < classes; ++c) {
      z[c] = dot(params.ent_w.row(c), x) + params.ent_b(0, c);
      zmax = std::max(zmax, z[c]);
    }
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    const double lse = zmax + std::log(sum);
    res.loss.entity += (lse - z[plan.classes[i]]) / norm.entity;
    if (!want_grad) continue;

    for (std::size_t c = 0; c < classes; ++c) {
      dz[c] = (std::exp(z[c] - lse) - (c == plan.classes[i] ? 1.0 : 0.0)) / norm.entity;
    }
    add_outer(g.ent_w, dz, x);
    add_to(g.ent_b.row(0), dz);
    back_linear(params.ent_w, dz, dx);
    apply_mask(dx, mask);
    add_to(d_reprs.row(i), std::span<const double>(dx).subspan(0, d));
    add_to(g.width_emb.row(w_row), std::span<const double>(dx).subspan(d, kWidthDim));
    add_to(d_ctx, std::span<const double>(dx).subspan(d + kWidthDim, d));
  }

  // Relations: per-type binary cross-entropy over sampled ordered pairs.
  if (!plan.pairs.empty()) {
    std::vector<Span> regions;
    for (auto [a, b] : plan.pairs) regions.push_back(between_region(plan.spans[a], plan.spans[b]));
    const auto between = kernels::serial::max_pool(h, regions);
    const std::size_t rel_in = 3 * d + 2 * kWidthDim;
    std::vector<double> rx(rel_in), rdx(rel_in), rdz(kNumRelationTypes);
    for (std::size_t p = 0; p < plan.pairs.size(); ++p) {
      const auto [a, b] = plan.pairs[p];
      const std::size_t wa = width_index(plan.spans[a], width_rows);
      const std::size_t wb = width_index(plan.spans[b], width_rows);
      std::size_t at = 0;
      for (double v : reprs->row(a)) rx[at++] = v;
      for (double v : params.width_emb.row(wa)) rx[at++] = v;
      for (double v : between.repr.row(p)) rx[at++] = v;
      for (double v : params.width_emb.row(wb)) rx[at++] = v;
      for (double v : reprs->row(b)) rx[at++] = v;
      const auto mask = dropout.next(rel_in);
      apply_mask(rx, mask);

      for (std::size_t t = 0; t < kNumRelationTypes; ++t) {
        const double zt = dot(params.rel_w.row(t), rx) + params.rel_b(0, t);
        res.loss.relation += bce(zt, plan.rel_targets[p][t]) / norm.relation;
        rdz[t] = (sigmoid(zt) - plan.rel_targets[p][t]) / norm.relation;
      }
      if (!want_grad) continue;

      add_outer(g.rel_w, rdz, rx);
      add_to(g.rel_b.row(0), rdz);
      back_linear(params.rel_w, rdz, rdx);
      apply_mask(rdx, mask);
      std::span<const double> parts(rdx);
      add_to(d_reprs.row(a), parts.subspan(0, d));
      add_to(g.width_emb.row(wa), parts.subspan(d, kWidthDim));
      for (std::size_t k = 0; k < d; ++k) {
        const std::size_t tok = between.argmax[p * d + k];
        if (tok != kernels::kNoToken) d_h(tok, k) += parts[d + kWidthDim + k];
      }
      add_to(g.width_emb.row(wb), parts.subspan(2 * d + kWidthDim, kWidthDim));
      add_to(d_reprs.row(b), parts.subspan(2 * d + 2 * kWidthDim, d));
    }
  }

  // Attributes: per-type binary cross-entropy on span representations.
  std::vector<double> ax(d), adx(d), adz(kNumAttributeTypes);
  for (std::size_t r = 0; r < plan.attr_rows.size(); ++r) {
    const std::size_t row = plan.attr_rows[r];
    std::copy(reprs->row(row).begin(), reprs->row(row).end(), ax.begin());
    const auto mask = dropout.next(d);
    apply_mask(ax, mask);
    for (std::size_t t = 0; t < kNumAttributeTypes; ++t) {
      const double zt = dot(params.attr_w.row(t), ax) + params.attr_b(0, t);
      res.loss.attribute += bce(zt, plan.attr_targets[r][t]) / norm.attribute;
      adz[t] = (sigmoid(zt) - plan.attr_targets[r][t]) / norm.attribute;
    }
    if (!want_grad) continue;
    add_outer(g.attr_w, adz, ax);
    add_to(g.attr_b.row(0), adz);
    back_linear(params.attr_w, adz, adx);
    apply_mask(adx, mask);
    add_to(d_reprs.row(row), adx);
  }

  res.loss.total = res.loss.entity + res.loss.relation + res.loss.attribute;
  if (!want_grad) return res;

  // Sentence context.
  for (std::size_t k = 0; k < d; ++k) d_h(ctx.argmax[k], k) += d_ctx[k];

  // Span representations.
  for (std::size_t i = 0; i < plan.spans.size(); ++i) {
    const Span sp = plan.spans[i];
    const auto dr = d_reprs.row(i);
    if (attention) {
      const double* alpha = att.alpha.data() + att.offset[i];
      std::vector<double> dalpha(sp.length());
      double mean = 0.0;
      for (std::size_t j = 0; j < sp.length(); ++j) {
        dalpha[j] = dot(dr, h.row(sp.start + j));
        mean += alpha[j] * dalpha[j];
      }
      for (std::size_t j = 0; j < sp.length(); ++j) {
        const std::size_t t = sp.start + j;
        const double ds = alpha[j] * (dalpha[j] - mean);
        auto dht = d_h.row(t);
        const auto ht = h.row(t);
        for (std::size_t k = 0; k < d; ++k) {
          dht[k] += alpha[j] * dr[k] + ds * params.attn_w(0, k);
          g.attn_w(0, k) += ds * ht[k];
        }
        g.attn_b(0, 0) += ds;
      }
    } else {
      for (std::size_t k = 0; k < d; ++k) d_h(mp.argmax[i * d + k], k) += dr[k];
    }
  }

  if (provider.trainable()) provider.accumulate_gradient(view, d_h, g);
  return res;
}

LossResult run(std::span<const AnnotatedSentence> batch, const EmbeddingProvider& provider,
               const ModelParams& params, const LossConfig& config, bool parallel,
               bool want_grad) {
  if (batch.empty()) throw std::invalid_argument("joint loss needs a non-empty batch");

  std::vector<SentencePlan> plans;
  plans.reserve(batch.size());
  Normalizers norm;
  for (const auto& s : batch) {
    plans.push_back(plan_sentence(s, params.shape, config));
    norm.entity += static_cast<double>(plans.back().spans.size());
    norm.relation += static_cast<double>(plans.back().pairs.size());
    norm.attribute += static_cast<double>(plans.back().attr_rows.size());
  }

  std::vector<SentenceResult> parts(batch.size());
  std::exception_ptr error;
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      parts[i] = sentence_loss(batch[i], plans[i], provider, params, config, norm, want_grad);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  // Fixed-order reduction.
  LossResult out;
  if (want_grad) out.grad = params.zeros_like();
  for (auto& p : parts) {
    out.loss.entity += p.loss.entity;
    out.loss.relation += p.loss.relation;
    out.loss.attribute += p.loss.attribute;
    if (!want_grad) continue;
    auto dst = out.grad.tensors();
    auto src = p.grad.tensors();
    for (std::size_t t = 0; t < dst.size(); ++t) {
      auto& a = dst[t].second->data;
      const auto& b = src[t].second->data;
      for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
    }
  }
  out.loss.total = out.loss.entity + out.loss.relation + out.loss.attribute;
  return out;
}

}  // namespace

LossResult joint_loss(std::span<const AnnotatedSentence> batch, const EmbeddingProvider& provider,
                      const ModelParams& params, const LossConfig& config, bool parallel) {
  return run(batch, provider, params, config, parallel, true);
}

LossParts joint_loss_value(std::span<const AnnotatedSentence> batch,
                           const EmbeddingProvider& provider, const ModelParams& params,
                           const LossConfig& config) {
  return run(batch, provider, params, config, true, false).loss;
}

}  // namespace claimgraph
