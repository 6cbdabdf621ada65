#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "claimgraph/training.hpp"

namespace claimgraph {

std::vector<GradCheckGroup> grad_check(const ModelParams& params,
                                       std::span<const AnnotatedSentence> batch,
                                       const EmbeddingProvider& provider,
                                       const GradCheckOptions& options) {
  LossConfig lc;
  lc.neg_entities = options.neg_entities;
  lc.neg_relations = options.neg_relations;
  lc.dropout = 0.0;
  lc.seed = options.seed;
  lc.max_span_size = params.shape.max_span_size;
  lc.span_repr_mode = options.span_repr_mode;
  lc.attribute_filtering = options.attribute_filtering;

  LossResult analytic = joint_loss(batch, provider, params, lc, false);
  if (options.tamper) options.tamper(analytic.grad);

  ModelParams probe = params;
  auto probe_tensors = probe.tensors();
  const auto grad_tensors = std::as_const(analytic.grad).tensors();
  std::vector<GradCheckGroup> out;
  for (std::size_t k = 0; k < probe_tensors.size(); ++k) {
    GradCheckGroup group;
    group.name = std::string(probe_tensors[k].first);
    auto& theta = probe_tensors[k].second->data;
    const auto& g = grad_tensors[k].second->data;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + options.epsilon;
      const double up = joint_loss_value(batch, provider, probe, lc).total;
      theta[i] = saved - options.epsilon;
      const double down = joint_loss_value(batch, provider, probe, lc).total;
      theta[i] = saved;

      const double numeric = (up - down) / (2 * options.epsilon);
      const double abs_err = std::abs(g[i] - numeric);
      const double scale = std::max({std::abs(g[i]), std::abs(numeric), options.rel_floor});
      group.max_abs_error = std::max(group.max_abs_error, abs_err);
      group.max_rel_error = std::max(group.max_rel_error, abs_err / scale);
      ++group.checked;
    }
    out.push_back(std::move(group));
  }
  return out;
}

GradCheckFixture make_gradcheck_fixture(std::size_t dim, std::size_t sentences, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  constexpr std::size_t kLength = 7;
  const std::size_t words = kLength * sentences;

  std::vector<std::string> vocab{std::string(kUnknownToken)};
  for (std::size_t w = 0; w < words; ++w) vocab.push_back("w" + std::to_string(w));

  Corpus batch;
  for (std::size_t s = 0; s < sentences; ++s) {
    AnnotatedSentence sent;
    sent.meta.id = "gc-" + std::to_string(s);
    sent.meta.split = Split::train;
    auto& g = sent.graph;
    for (std::size_t t = 0; t < kLength; ++t) g.tokens.push_back(vocab[1 + s * kLength + t]);
    // factor [0,2) association [2,3) factor [3,5) magnitude [5,6)
    g.entities = {{{0, 2}, EntityType::factor},
                  {{2, 3}, EntityType::association},
                  {{3, 5}, EntityType::factor},
                  {{5, 6}, EntityType::magnitude}};
    g.relations = {{1, 0, RelationType::arg0},
                   {1, 2, RelationType::arg1},
                   {2, 3, RelationType::modifier},
                   {0, 2, s % 2 == 0 ? RelationType::q_plus : RelationType::q_minus}};
    g.attributes = {{1, {AttributeType::causation,
                         s % 2 == 0 ? AttributeType::sign_plus : AttributeType::sign_minus}}};
    batch.push_back(std::move(sent));
  }

  ModelShape shape;
  shape.dim = dim;
  shape.max_span_size = 4;
  shape.entity_labels = plain_entity_labels();
  shape.vocabulary = vocab;
  ModelParams params = init_params(shape, seed + 1);

  // Each column holds a permutation of an evenly spaced grid, so distinct
  // tokens differ by at least 1/|V| in every coordinate.
  std::vector<std::size_t> perm(vocab.size());
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  const double step = 2.0 / static_cast<double>(vocab.size());
  for (std::size_t c = 0; c < dim; ++c) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t r = 0; r < vocab.size(); ++r) {
      params.token_emb(r, c) = -1.0 + step * (static_cast<double>(perm[r]) + 0.5 + jitter(rng));
    }
  }
  return {std::move(params), std::move(batch)};
}

}  // namespace claimgraph
