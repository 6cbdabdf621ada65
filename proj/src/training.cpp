#include "claimgraph/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"

namespace claimgraph {

void TrainConfig::check() const {
  if (epochs == 0) throw std::invalid_argument("epochs must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
  if (!(warmup_fraction >= 0 && warmup_fraction < 1))
    throw std::invalid_argument("warmup fraction must lie in [0, 1)");
  if (weight_decay < 0) throw std::invalid_argument("weight decay must be non-negative");
  if (!(max_grad_norm > 0)) throw std::invalid_argument("max gradient norm must be positive");
  if (!(dropout >= 0 && dropout < 1)) throw std::invalid_argument("dropout must lie in [0, 1)");
  inference.check();
}

LossConfig TrainConfig::loss_config(std::uint64_t step_seed) const {
  LossConfig c;
  c.neg_entities = neg_entities;
  c.neg_relations = neg_relations;
  c.dropout = dropout;
  c.seed = step_seed;
  c.max_span_size = inference.max_span_size;
  c.span_repr_mode = inference.span_repr_mode;
  c.attribute_filtering = inference.attribute_filtering;
  return c;
}

double lr_at_step(std::size_t step, std::size_t total_steps, const TrainConfig& config) {
  const auto warmup = static_cast<std::size_t>(
      std::llround(config.warmup_fraction * static_cast<double>(total_steps)));
  if (step < warmup) {
    return config.learning_rate * static_cast<double>(step) / static_cast<double>(warmup);
  }
  if (total_steps <= warmup) return config.learning_rate;
  const double remaining = static_cast<double>(total_steps - std::min(step, total_steps));
  return config.learning_rate * remaining / static_cast<double>(total_steps - warmup);
}

AdamState make_adam_state(const ModelParams& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

double optimizer_step(ModelParams& params, ModelParams& grads, AdamState& state, double lr,
                      const TrainConfig& config) {
  double sq = 0.0;
  for (auto [name, g] : grads.tensors()) {
    for (std::size_t i = 0; i < g->data.size(); ++i) {
      const double v = g->data[i];
      if (!std::isfinite(v)) {
        throw NonFiniteGradient("non-finite gradient in " + std::string(name) + "[" +
                                std::to_string(i) + "] at step " + std::to_string(state.step));
      }
      sq += v * v;
    }
  }
  const double norm = std::sqrt(sq);
  if (norm > config.max_grad_norm) {
    const double scale = config.max_grad_norm / norm;
    for (auto [name, g] : grads.tensors())
      for (auto& v : g->data) v *= scale;
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);

  auto p_list = params.tensors();
  auto g_list = grads.tensors();
  auto m_list = state.m.tensors();
  auto v_list = state.v.tensors();
  for (std::size_t k = 0; k < p_list.size(); ++k) {
    const auto name = p_list[k].first;
    const bool decay = std::find(config.no_decay.begin(), config.no_decay.end(), name) ==
                       config.no_decay.end();
    auto& p = p_list[k].second->data;
    const auto& g = g_list[k].second->data;
    auto& m = m_list[k].second->data;
    auto& v = v_list[k].second->data;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (decay) p[i] *= 1.0 - lr * config.weight_decay;
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config.adam_eps);
    }
  }
  return norm;
}

ModelShape shape_for_training(const Corpus& train, std::size_t dim, bool lookup_vocabulary,
                              const TrainConfig& config) {
  ModelShape shape;
  shape.dim = dim;
  shape.max_span_size = config.inference.max_span_size;
  shape.attrs_as_ents = config.attrs_as_ents;
  shape.entity_labels =
      config.attrs_as_ents ? collapsed_label_universe(true, &train) : plain_entity_labels();
  if (shape.entity_labels.empty()) shape.entity_labels = plain_entity_labels();
  if (lookup_vocabulary) shape.vocabulary = build_vocabulary(train);
  return shape;
}

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t step) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (step + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

TrainResult train(const Corpus& train_set, const Corpus& validation,
                  const EmbeddingProvider& provider, ModelParams init, const TrainConfig& config,
                  const ProgressFn& progress) {
  config.check();
  if (train_set.empty()) throw std::invalid_argument("training split is empty");
  if (provider.dim() != init.shape.dim) {
    throw std::invalid_argument("provider dimension " + std::to_string(provider.dim()) +
                                " does not match model dimension " +
                                std::to_string(init.shape.dim));
  }

  const Corpus& selection = validation.empty() ? train_set : validation;
  TrainResult result;
  result.report.selection_split = validation.empty() ? "train" : "val";

  const std::size_t n = train_set.size();
  const std::size_t batches = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = batches * config.epochs;

  ModelParams params = std::move(init);
  AdamState state = make_adam_state(params);
  std::mt19937_64 shuffle_rng(config.seed);
  std::vector<std::size_t> order(n);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t b = 0; b < batches; ++b) {
      Corpus batch;
      for (std::size_t i = b * config.batch_size; i < std::min(n, (b + 1) * config.batch_size); ++i) {
        batch.push_back(train_set[order[i]]);
      }
      const double lr = lr_at_step(state.step, total_steps, config);
      LossResult lr_result =
          joint_loss(batch, provider, params, config.loss_config(mix(config.seed, state.step)),
                     config.parallel);
      optimizer_step(params, lr_result.grad, state, lr, config);
      rec.loss.entity += lr_result.loss.entity / static_cast<double>(batches);
      rec.loss.relation += lr_result.loss.relation / static_cast<double>(batches);
      rec.loss.attribute += lr_result.loss.attribute / static_cast<double>(batches);
      rec.learning_rate = lr;
    }
    rec.loss.total = rec.loss.entity + rec.loss.relation + rec.loss.attribute;

    const Corpus predicted = predict_corpus(selection, provider, params, config.inference);
    rec.validation = score_corpus(selection, predicted);
    rec.selection_score = rec.validation->average_micro_f1();
    if (rec.selection_score > result.report.best_score) {
      result.report.best_score = rec.selection_score;
      result.report.best_epoch = epoch;
      result.best = params;
    }
    if (progress) progress(rec);
    result.report.epochs.push_back(std::move(rec));
  }
  result.last = std::move(params);
  return result;
}

std::string train_report_to_json(const TrainReport& report) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["selection_split"] = report.selection_split;
  j["best_epoch"] = report.best_epoch;
  j["best_average_micro_f1"] = report.best_score;
  j["epochs"] = ordered_json::array();
  for (const auto& e : report.epochs) {
    ordered_json row;
    row["epoch"] = e.epoch;
    row["learning_rate"] = e.learning_rate;
    row["loss"] = e.loss.total;
    row["entity_loss"] = e.loss.entity;
    row["relation_loss"] = e.loss.relation;
    row["attribute_loss"] = e.loss.attribute;
    if (e.validation) {
      row["entity_f1"] = e.validation->entities.micro.f1;
      row["attribute_f1"] = e.validation->attributes.micro.f1;
      row["relation_f1"] = e.validation->relations.micro.f1;
      row["average_micro_f1"] = e.selection_score;
    }
    j["epochs"].push_back(std::move(row));
  }
  return j.dump(2);
}

}  // namespace claimgraph
