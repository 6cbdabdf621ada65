#include <omp.h>

#include <cmath>
#include <random>

#include "claimgraph/kernels.hpp"
#include "claimgraph/model.hpp"
#include "doctest.h"

using namespace claimgraph;

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::normal_distribution<double> normal;
  Matrix m(r, c);
  for (auto& v : m.data) v = normal(rng);
  return m;
}

ModelParams attention_params(std::mt19937_64& rng, std::size_t d) {
  ModelShape shape;
  shape.dim = d;
  shape.entity_labels = plain_entity_labels();
  ModelParams p = make_params(shape);
  p.attn_w = random_matrix(rng, 1, d);
  p.attn_b(0, 0) = 0.3;
  return p;
}

// Direct softmax-weighted sum, written without the kernels.
std::vector<double> attention_oracle(const Matrix& h, Span s, const ModelParams& p) {
  std::vector<double> scores;
  for (std::size_t t = s.start; t < s.end; ++t) {
    double z = p.attn_b(0, 0);
    for (std::size_t k = 0; k < h.cols; ++k) z += p.attn_w(0, k) * h(t, k);
    scores.push_back(z);
  }
  double denom = 0;
  for (double z : scores) denom += std::exp(z);
  std::vector<double> out(h.cols, 0.0);
  for (std::size_t t = s.start; t < s.end; ++t) {
    const double a = std::exp(scores[t - s.start]) / denom;
    for (std::size_t k = 0; k < h.cols; ++k) out[k] += a * h(t, k);
  }
  return out;
}

}  // namespace

TEST_CASE("span enumeration") {
  CHECK(enumerate_spans(3, 20).size() == 6);
  CHECK(enumerate_spans(5, 2).size() == 9);
  CHECK(enumerate_spans(0, 20).empty());
  const auto spans = enumerate_spans(4, 3);
  CHECK(std::is_sorted(spans.begin(), spans.end()));
  for (const auto& s : spans) CHECK((s.length() >= 1 && s.length() <= 3 && s.end <= 4));
}

TEST_CASE("serial and parallel kernels agree bit for bit") {
  omp_set_num_threads(4);
  std::mt19937_64 rng(1);
  for (std::size_t n : {1u, 7u, 33u}) {
    const Matrix h = random_matrix(rng, n, 24);
    const auto spans = enumerate_spans(n, 20);
    const Matrix w = random_matrix(rng, 1, 24);
    const auto a = kernels::serial::attention_pool(h, spans, w.row(0), -0.2);
    const auto b = kernels::omp::attention_pool(h, spans, w.row(0), -0.2);
    CHECK(a.repr == b.repr);
    CHECK(a.alpha == b.alpha);
    CHECK(a.offset == b.offset);

    std::vector<Span> with_empty = spans;
    with_empty.push_back({2 % n, 2 % n});
    const auto m1 = kernels::serial::max_pool(h, with_empty);
    const auto m2 = kernels::omp::max_pool(h, with_empty);
    CHECK(m1.repr == m2.repr);
    CHECK(m1.argmax == m2.argmax);
    CHECK(m1.argmax.back() == kernels::kNoToken);

    const Matrix x = random_matrix(rng, spans.size(), 30);
    const Matrix W = random_matrix(rng, 7, 30);
    const Matrix bias = random_matrix(rng, 1, 7);
    CHECK(kernels::serial::linear(x, W, bias.row(0)) == kernels::omp::linear(x, W, bias.row(0)));
  }
}

TEST_CASE("linear kernel matches a loop") {
  std::mt19937_64 rng(2);
  const Matrix x = random_matrix(rng, 5, 6);
  const Matrix W = random_matrix(rng, 3, 6);
  const Matrix b = random_matrix(rng, 1, 3);
  const Matrix y = kernels::omp::linear(x, W, b.row(0));
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t o = 0; o < 3; ++o) {
      double acc = b(0, o);
      for (std::size_t k = 0; k < 6; ++k) acc += W(o, k) * x(r, k);
      CHECK(y(r, o) == doctest::Approx(acc).epsilon(1e-12));
    }
  }
}

TEST_CASE("attention pooling") {
  std::mt19937_64 rng(3);
  const ModelParams p = attention_params(rng, 8);
  const Matrix h = random_matrix(rng, 12, 8);

  SUBCASE("single token is the token itself") {
    for (std::size_t t = 0; t < 12; ++t) {
      const auto v = span_repr_attention(h, {t, t + 1}, p);
      for (std::size_t k = 0; k < 8; ++k) CHECK(v[k] == h(t, k));
      CHECK(v == span_repr_maxpool(h, {t, t + 1}));
    }
  }
  SUBCASE("equal scores give the mean") {
    Matrix g(2, 8);
    for (std::size_t k = 0; k < 8; ++k) {
      g(0, k) = static_cast<double>(k);
      g(1, k) = -static_cast<double>(k) * 0.5;
    }
    ModelParams flat = p;
    for (auto& v : flat.attn_w.data) v = 0.0;
    const auto v = span_repr_attention(g, {0, 2}, flat);
    for (std::size_t k = 0; k < 8; ++k) CHECK(v[k] == doctest::Approx(0.5 * (g(0, k) + g(1, k))));
  }
  SUBCASE("weights sum to one and the result stays in the hull") {
    const auto spans = enumerate_spans(12, 20);
    const auto pool = kernels::omp::attention_pool(h, spans, p.attn_w.row(0), p.attn_b(0, 0));
    for (std::size_t i = 0; i < spans.size(); ++i) {
      double sum = 0;
      for (std::size_t t = 0; t < spans[i].length(); ++t) {
        CHECK(pool.alpha[pool.offset[i] + t] >= 0.0);
        sum += pool.alpha[pool.offset[i] + t];
      }
      CHECK(std::abs(sum - 1.0) <= 1e-9);
      const auto oracle = attention_oracle(h, spans[i], p);
      for (std::size_t k = 0; k < 8; ++k) {
        double lo = h(spans[i].start, k), hi = lo;
        for (std::size_t t = spans[i].start; t < spans[i].end; ++t) {
          lo = std::min(lo, h(t, k));
          hi = std::max(hi, h(t, k));
        }
        CHECK(pool.repr(i, k) >= lo);
        CHECK(pool.repr(i, k) <= hi);
        CHECK(pool.repr(i, k) == doctest::Approx(oracle[k]).epsilon(1e-10));
      }
    }
  }
  SUBCASE("large scores do not overflow") {
    ModelParams big = p;
    for (auto& v : big.attn_w.data) v *= 1e4;
    const auto v = span_repr_attention(h, {0, 12}, big);
    for (double x : v) CHECK(std::isfinite(x));
  }
}

TEST_CASE("max pooling") {
  std::mt19937_64 rng(4);
  const Matrix h = random_matrix(rng, 9, 5);
  SUBCASE("vector and its negation give absolute values") {
    Matrix g(2, 5);
    for (std::size_t k = 0; k < 5; ++k) {
      g(0, k) = h(0, k);
      g(1, k) = -h(0, k);
    }
    const auto v = span_repr_maxpool(g, {0, 2});
    for (std::size_t k = 0; k < 5; ++k) CHECK(v[k] == std::abs(h(0, k)));
  }
  SUBCASE("matches a per-coordinate loop") {
    for (const auto& s : enumerate_spans(9, 20)) {
      const auto v = span_repr_maxpool(h, s);
      for (std::size_t k = 0; k < 5; ++k) {
        double m = h(s.start, k);
        for (std::size_t t = s.start; t < s.end; ++t) m = std::max(m, h(t, k));
        CHECK(v[k] == m);
      }
    }
  }
}

TEST_CASE("context representations") {
  std::mt19937_64 rng(5);
  const Matrix h = random_matrix(rng, 10, 4);
  SUBCASE("adjacent spans have a zero between-context") {
    CHECK(between_context(h, {0, 2}, {2, 4}) == std::vector<double>(4, 0.0));
    CHECK(between_context(h, {2, 4}, {0, 2}) == std::vector<double>(4, 0.0));
    CHECK(between_context(h, {0, 5}, {2, 3}) == std::vector<double>(4, 0.0));
  }
  SUBCASE("one-token sentence context is that token") {
    Matrix one(1, 4);
    for (std::size_t k = 0; k < 4; ++k) one(0, k) = h(3, k);
    CHECK(entity_context(one) == std::vector<double>(one.data));
  }
  SUBCASE("between-context matches a loop in either order") {
    const auto spans = enumerate_spans(10, 4);
    for (std::size_t i = 0; i < spans.size(); i += 3) {
      for (std::size_t j = 0; j < spans.size(); j += 5) {
        const Span a = spans[i], b = spans[j];
        const std::size_t lo = std::min(a.end, b.end), hi = std::max(a.start, b.start);
        std::vector<double> expect(4, 0.0);
        if (lo < hi) {
          for (std::size_t k = 0; k < 4; ++k) {
            double m = h(lo, k);
            for (std::size_t t = lo; t < hi; ++t) m = std::max(m, h(t, k));
            expect[k] = m;
          }
        }
        CHECK(between_context(h, a, b) == expect);
        CHECK(between_context(h, b, a) == expect);
      }
    }
  }
  SUBCASE("width index is clamped") {
    CHECK(width_index({0, 1}, 20) == 0);
    CHECK(width_index({0, 20}, 20) == 19);
    CHECK(width_index({0, 30}, 20) == 19);
  }
}
