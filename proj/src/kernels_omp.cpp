#include <algorithm>
#include <cmath>

#include <omp.h>

#include "claimgraph/kernels.hpp"

namespace claimgraph::kernels::omp {

AttentionPool attention_pool(const Matrix& h, std::span<const Span> spans,
                             std::span<const double> w, double b) {
  const std::size_t d = h.cols;
  const auto n_tokens = static_cast<std::ptrdiff_t>(h.rows);
  const auto n_spans = static_cast<std::ptrdiff_t>(spans.size());

  // Token scores are shared by every span covering the token.
  std::vector<double> scores(h.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < n_tokens; ++t) {
    double score = 0.0;
    for (std::size_t k = 0; k < d; ++k) score += w[k] * h(t, k);
    scores[t] = score + b;
  }

  AttentionPool out;
  out.repr = Matrix(spans.size(), d);
  out.offset = alpha_offsets(spans);
  out.alpha.assign(spans.empty() ? 0 : out.offset.back() + spans.back().length(), 0.0);

#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n_spans; ++i) {
    const Span s = spans[i];
    double* alpha = out.alpha.data() + out.offset[i];
    std::copy(scores.begin() + s.start, scores.begin() + s.end, alpha);
    const double m = *std::max_element(alpha, alpha + s.length());
    double z = 0.0;
    for (std::size_t j = 0; j < s.length(); ++j) {
      alpha[j] = std::exp(alpha[j] - m);
      z += alpha[j];
    }
    auto repr = out.repr.row(i);
    for (std::size_t j = 0; j < s.length(); ++j) {
      alpha[j] /= z;
      const auto ht = h.row(s.start + j);
      for (std::size_t k = 0; k < d; ++k) repr[k] += alpha[j] * ht[k];
    }
  }
  return out;
}

MaxPool max_pool(const Matrix& h, std::span<const Span> spans) {
  const std::size_t d = h.cols;
  const auto n_spans = static_cast<std::ptrdiff_t>(spans.size());
  MaxPool out;
  out.repr = Matrix(spans.size(), d);
  out.argmax.assign(spans.size() * d, kNoToken);
  const double* hd = h.data.data();
  double* rd = out.repr.data.data();
  std::size_t* ad = out.argmax.data();
#pragma omp parallel for schedule(dynamic, 16) firstprivate(d, hd, rd, ad)
  for (std::ptrdiff_t i = 0; i < n_spans; ++i) {
    const Span s = spans[i];
    if (s.start >= s.end) continue;
    // Raw locals: stores through `best` could otherwise alias the sizes read each iteration.
    std::size_t* best = ad + i * d;
    double* repr = rd + i * d;
    std::fill(best, best + d, s.start);
    std::copy_n(hd + s.start * d, d, repr);
    for (std::size_t t = s.start + 1; t < s.end; ++t) {
      const double* ht = hd + t * d;
      for (std::size_t k = 0; k < d; ++k) {
        if (ht[k] > repr[k]) {
          repr[k] = ht[k];
          best[k] = t;
        }
      }
    }
  }
  return out;
}

Matrix linear(const Matrix& x, const Matrix& weight, std::span<const double> bias) {
  Matrix out(x.rows, weight.rows);
  const auto rows = static_cast<std::ptrdiff_t>(x.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const auto xr = x.row(r);
    for (std::size_t o = 0; o < weight.rows; ++o) {
      const auto wo = weight.row(o);
      double acc = 0.0;
      for (std::size_t k = 0; k < x.cols; ++k) acc += wo[k] * xr[k];
      out(r, o) = acc + bias[o];
    }
  }
  return out;
}

}  // namespace claimgraph::kernels::omp
