#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "claimgraph/schema.hpp"
#include "claimgraph/tensor.hpp"

// Span pooling and dense-layer kernels. `serial` is the reference
// implementation; `omp` parallelises over spans/rows and must agree with it
// bit for bit.
namespace claimgraph::kernels {

inline constexpr std::size_t kNoToken = std::numeric_limits<std::size_t>::max();

struct AttentionPool {
  Matrix repr;                       // spans x d
  std::vector<double> alpha;         // weights of span i at [offset[i], offset[i] + len_i)
  std::vector<std::size_t> offset;
};

struct MaxPool {
  Matrix repr;                       // spans x d; zero row for an empty span
  std::vector<std::size_t> argmax;   // spans x d token indices, kNoToken for empty spans
};

// Offsets of each span's weights in AttentionPool::alpha.
std::vector<std::size_t> alpha_offsets(std::span<const Span> spans);

namespace serial {

AttentionPool attention_pool(const Matrix& h, std::span<const Span> spans,
                             std::span<const double> w, double b);
MaxPool max_pool(const Matrix& h, std::span<const Span> spans);
// x (rows x in) times weight^T (weight is out x in) plus bias.
Matrix linear(const Matrix& x, const Matrix& weight, std::span<const double> bias);

}  // namespace serial

namespace omp {

AttentionPool attention_pool(const Matrix& h, std::span<const Span> spans,
                             std::span<const double> w, double b);
MaxPool max_pool(const Matrix& h, std::span<const Span> spans);
Matrix linear(const Matrix& x, const Matrix& weight, std::span<const double> bias);

}  // namespace omp

}  // namespace claimgraph::kernels
