#include <cmath>
#include <random>

#include "claimgraph/model.hpp"
#include "claimgraph/training.hpp"
#include "doctest.h"

using namespace claimgraph;

namespace {

double worst(const std::vector<GradCheckGroup>& groups) {
  double w = 0.0;
  for (const auto& g : groups) w = std::max(w, g.max_rel_error);
  return w;
}

}  // namespace

TEST_CASE("zero parameters give closed-form losses") {
  auto fx = make_gradcheck_fixture(8, 2, 3);
  const ModelParams zero = fx.params.zeros_like();
  LookupProvider provider(zero.shape.vocabulary, 8);
  LossConfig cfg;
  cfg.dropout = 0.0;
  cfg.max_span_size = zero.shape.max_span_size;
  const auto parts = joint_loss_value(fx.batch, provider, zero, cfg);
  CHECK(parts.entity == doctest::Approx(std::log(7.0)).epsilon(1e-12));
  CHECK(parts.relation == doctest::Approx(7.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(parts.attribute == doctest::Approx(7.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(parts.total == doctest::Approx(parts.entity + parts.relation + parts.attribute));
}

TEST_CASE("analytic gradients match finite differences") {
  auto fx = make_gradcheck_fixture(6, 2, 11);
  LookupProvider provider(fx.params.shape.vocabulary, 6);
  for (auto mode : {SpanReprMode::attention, SpanReprMode::maxpool}) {
    for (auto filt : {AttributeFiltering::cascaded, AttributeFiltering::unfiltered}) {
      GradCheckOptions o;
      o.span_repr_mode = mode;
      o.attribute_filtering = filt;
      o.neg_entities = 6;
      o.neg_relations = 6;
      const auto groups = grad_check(fx.params, fx.batch, provider, o);
      CAPTURE(to_string(mode));
      CAPTURE(to_string(filt));
      for (const auto& g : groups) {
        CAPTURE(g.name);
        CHECK(g.max_rel_error < 1e-4);
      }
      CHECK(groups.size() == fx.params.tensors().size());
    }
  }
}

TEST_CASE("gradient check catches a corrupted gradient") {
  auto fx = make_gradcheck_fixture(6, 2, 11);
  LookupProvider provider(fx.params.shape.vocabulary, 6);
  GradCheckOptions o;
  o.neg_entities = 4;
  o.neg_relations = 4;
  o.tamper = [](ModelParams& g) { g.rel_w.data[5] *= 1.5; };
  const auto groups = grad_check(fx.params, fx.batch, provider, o);
  CHECK(worst(groups) > 1e-2);

  o.tamper = [](ModelParams& g) { g.attr_b(0, 0) += 1.0; };
  CHECK(worst(grad_check(fx.params, fx.batch, provider, o)) > 1e-2);
}

TEST_CASE("linear head gradients are accurate to rounding") {
  auto fx = make_gradcheck_fixture(6, 1, 5);
  LookupProvider provider(fx.params.shape.vocabulary, 6);
  GradCheckOptions o;
  const auto groups = grad_check(fx.params, fx.batch, provider, o);
  for (const auto& g : groups) {
    if (g.name == "attr_b") CHECK(g.max_rel_error < 1e-8);
  }
}

TEST_CASE("loss is invariant to batch order") {
  auto fx = make_gradcheck_fixture(6, 3, 17);
  LookupProvider provider(fx.params.shape.vocabulary, 6);
  LossConfig cfg;
  cfg.seed = 42;
  cfg.max_span_size = fx.params.shape.max_span_size;
  const auto a = joint_loss(fx.batch, provider, fx.params, cfg);
  Corpus rev(fx.batch.rbegin(), fx.batch.rend());
  const auto b = joint_loss(rev, provider, fx.params, cfg);
  CHECK(a.loss.total == doctest::Approx(b.loss.total).epsilon(1e-12));
  for (std::size_t k = 0; k < a.grad.rel_w.size(); ++k)
    CHECK(a.grad.rel_w.data[k] == doctest::Approx(b.grad.rel_w.data[k]).epsilon(1e-10));
}

TEST_CASE("parallel and serial loss agree exactly") {
  auto fx = make_gradcheck_fixture(6, 4, 23);
  LookupProvider provider(fx.params.shape.vocabulary, 6);
  LossConfig cfg;
  cfg.seed = 9;
  cfg.max_span_size = fx.params.shape.max_span_size;
  const auto a = joint_loss(fx.batch, provider, fx.params, cfg, true);
  const auto b = joint_loss(fx.batch, provider, fx.params, cfg, false);
  CHECK(a.loss.total == b.loss.total);
  CHECK(a.grad == b.grad);
}

TEST_CASE("dropout and sampling follow the seed") {
  auto fx = make_gradcheck_fixture(6, 2, 29);
  LookupProvider provider(fx.params.shape.vocabulary, 6);
  LossConfig cfg;
  cfg.dropout = 0.3;
  cfg.max_span_size = fx.params.shape.max_span_size;
  cfg.seed = 1;
  const auto a = joint_loss_value(fx.batch, provider, fx.params, cfg);
  const auto b = joint_loss_value(fx.batch, provider, fx.params, cfg);
  CHECK(a.total == b.total);
  cfg.seed = 2;
  CHECK(joint_loss_value(fx.batch, provider, fx.params, cfg).total != a.total);
}

TEST_CASE("joint loss rejects an empty batch") {
  auto fx = make_gradcheck_fixture(4, 1, 1);
  LookupProvider provider(fx.params.shape.vocabulary, 4);
  CHECK_THROWS_AS(joint_loss({}, provider, fx.params, LossConfig{}), std::invalid_argument);
}
