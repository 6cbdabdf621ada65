#include <fstream>
#include <unordered_set>

#include "claimgraph/binary_io.hpp"
#include "claimgraph/model.hpp"

namespace claimgraph {

namespace {
constexpr const char* kEmbeddingMagic = "CGEMB1";
}

LookupProvider::LookupProvider(std::vector<std::string> vocabulary, std::size_t dim) : dim_(dim) {
  for (std::size_t i = 0; i < vocabulary.size(); ++i) index_.emplace(vocabulary[i], i);
}

std::size_t LookupProvider::index_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? 0 : it->second;
}

Matrix LookupProvider::embed(const SentenceView& s, const ModelParams& params) const {
  if (params.token_emb.cols != dim_ || params.token_emb.rows == 0) {
    throw ProviderError("lookup provider needs a token table of dimension " + std::to_string(dim_));
  }
  Matrix h(s.tokens.size(), dim_);
  for (std::size_t t = 0; t < s.tokens.size(); ++t) {
    auto src = params.token_emb.row(index_of(s.tokens[t]));
    std::copy(src.begin(), src.end(), h.row(t).begin());
  }
  return h;
}

void LookupProvider::accumulate_gradient(const SentenceView& s, const Matrix& d_h,
                                         ModelParams& grad) const {
  for (std::size_t t = 0; t < s.tokens.size(); ++t) {
    auto dst = grad.token_emb.row(index_of(s.tokens[t]));
    auto src = d_h.row(t);
    for (std::size_t k = 0; k < dim_; ++k) dst[k] += src[k];
  }
}

std::vector<std::string> build_vocabulary(const Corpus& corpus) {
  std::vector<std::string> vocab{std::string(kUnknownToken)};
  std::unordered_set<std::string> seen{std::string(kUnknownToken)};
  for (const auto& s : corpus) {
    for (const auto& t : s.graph.tokens) {
      if (seen.insert(t).second) vocab.push_back(t);
    }
  }
  return vocab;
}

FileProvider::FileProvider(std::map<std::string, Matrix> table, std::size_t dim)
    : table_(std::move(table)), dim_(dim) {}

FileProvider FileProvider::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ProviderError("cannot open embedding file " + path);
  std::size_t dim = 0;
  try {
    auto table = read_embedding_file(in, &dim);
    return FileProvider(std::move(table), dim);
  } catch (const binio::FormatError& e) {
    throw ProviderError(path + ": " + e.what());
  }
}

Matrix FileProvider::embed(const SentenceView& s, const ModelParams&) const {
  auto it = table_.find(std::string(s.id));
  if (it == table_.end()) {
    throw ProviderError("no precomputed embeddings for sentence \"" + std::string(s.id) + "\"");
  }
  if (it->second.rows != s.tokens.size()) {
    throw ProviderError("sentence \"" + std::string(s.id) + "\" has " +
                        std::to_string(s.tokens.size()) + " tokens but " +
                        std::to_string(it->second.rows) + " embedding rows");
  }
  return it->second;
}

void write_embedding_file(std::ostream& out, const std::map<std::string, Matrix>& table,
                          std::size_t dim) {
  out.write(kEmbeddingMagic, 6);
  binio::put_u32(out, static_cast<std::uint32_t>(dim));
  binio::put_u32(out, static_cast<std::uint32_t>(table.size()));
  for (const auto& [id, m] : table) {
    if (m.cols != dim) throw std::invalid_argument("embedding rows for " + id + " have wrong width");
    binio::put_string(out, id);
    binio::put_u32(out, static_cast<std::uint32_t>(m.rows));
    for (double v : m.data) binio::put_f32(out, static_cast<float>(v));
  }
}

std::map<std::string, Matrix> read_embedding_file(std::istream& in, std::size_t* dim_out) {
  binio::expect_magic(in, kEmbeddingMagic);
  const std::uint32_t dim = binio::get_u32(in);
  const std::uint32_t count = binio::get_u32(in);
  std::map<std::string, Matrix> table;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string id = binio::get_string(in);
    const std::uint32_t n = binio::get_u32(in);
    Matrix m(n, dim);
    for (auto& v : m.data) v = binio::get_f32(in);
    if (!table.emplace(std::move(id), std::move(m)).second) {
      throw binio::FormatError("duplicate sentence id in embedding file");
    }
  }
  if (dim_out) *dim_out = dim;
  return table;
}

std::unique_ptr<EmbeddingProvider> make_provider(const ModelParams& params,
                                                 const std::string& embedding_file) {
  if (!embedding_file.empty()) {
    auto p = std::make_unique<FileProvider>(FileProvider::load(embedding_file));
    if (p->dim() != params.shape.dim) {
      throw ProviderError("embedding file dimension " + std::to_string(p->dim()) +
                          " does not match model dimension " + std::to_string(params.shape.dim));
    }
    return p;
  }
  if (params.shape.vocabulary.empty()) {
    throw ProviderError("model has no token table; an embedding file is required");
  }
  return std::make_unique<LookupProvider>(params.shape.vocabulary, params.shape.dim);
}

}  // namespace claimgraph
