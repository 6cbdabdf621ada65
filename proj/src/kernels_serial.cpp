#include <algorithm>
#include <cmath>

#include "claimgraph/kernels.hpp"

namespace claimgraph::kernels {

std::vector<std::size_t> alpha_offsets(std::span<const Span> spans) {
  std::vector<std::size_t> offset(spans.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    offset[i] = total;
    total += spans[i].length();
  }
  return offset;
}

namespace serial {

AttentionPool attention_pool(const Matrix& h, std::span<const Span> spans,
                             std::span<const double> w, double b) {
  const std::size_t d = h.cols;
  AttentionPool out;
  out.repr = Matrix(spans.size(), d);
  out.offset = alpha_offsets(spans);
  out.alpha.assign(spans.empty() ? 0 : out.offset.back() + spans.back().length(), 0.0);

  for (std::size_t i = 0; i < spans.size(); ++i) {
    const Span s = spans[i];
    double* alpha = out.alpha.data() + out.offset[i];
    for (std::size_t t = s.start; t < s.end; ++t) {
      double score = 0.0;
      for (std::size_t k = 0; k < d; ++k) score += w[k] * h(t, k);
      alpha[t - s.start] = score + b;
    }
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
  MaxPool out;
  out.repr = Matrix(spans.size(), d);
  out.argmax.assign(spans.size() * d, kNoToken);
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const Span s = spans[i];
    if (s.start >= s.end) continue;
    for (std::size_t k = 0; k < d; ++k) {
      std::size_t best = s.start;
      for (std::size_t t = s.start + 1; t < s.end; ++t) {
        if (h(t, k) > h(best, k)) best = t;
      }
      out.repr(i, k) = h(best, k);
      out.argmax[i * d + k] = best;
    }
  }
  return out;
}

Matrix linear(const Matrix& x, const Matrix& weight, std::span<const double> bias) {
  Matrix out(x.rows, weight.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
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

}  // namespace serial
}  // namespace claimgraph::kernels
