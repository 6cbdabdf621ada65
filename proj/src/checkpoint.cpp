#include "claimgraph/checkpoint.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "claimgraph/binary_io.hpp"
#include "json.hpp"

namespace claimgraph {

namespace {

constexpr const char* kMagic = "CGCKPT1";

nlohmann::ordered_json config_json(const Checkpoint& c) {
  nlohmann::ordered_json j;
  const ModelShape& s = c.params.shape;
  j["dim"] = s.dim;
  j["width_dim"] = kWidthDim;
  j["max_span_size"] = s.max_span_size;
  j["attrs_as_ents"] = s.attrs_as_ents;
  j["entity_labels"] = nlohmann::ordered_json::array();
  for (const auto& l : s.entity_labels) j["entity_labels"].push_back(l.str());
  j["vocabulary"] = s.vocabulary;
  j["inference"] = {{"attr_threshold", c.inference.attr_threshold},
                    {"rel_threshold", c.inference.rel_threshold},
                    {"max_span_size", c.inference.max_span_size},
                    {"span_repr_mode", to_string(c.inference.span_repr_mode)},
                    {"attribute_filtering", to_string(c.inference.attribute_filtering)}};
  return j;
}

Checkpoint from_config(const nlohmann::json& j) {
  Checkpoint c;
  ModelShape shape;
  shape.dim = j.at("dim").get<std::size_t>();
  if (j.at("width_dim").get<std::size_t>() != kWidthDim) {
    throw binio::FormatError("unsupported width embedding size");
  }
  shape.max_span_size = j.at("max_span_size").get<std::size_t>();
  shape.attrs_as_ents = j.at("attrs_as_ents").get<bool>();
  for (const auto& l : j.at("entity_labels")) {
    shape.entity_labels.push_back(parse_collapsed_label(l.get<std::string>()));
  }
  shape.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
  c.params = make_params(shape);

  const auto& inf = j.at("inference");
  c.inference.attr_threshold = inf.at("attr_threshold").get<double>();
  c.inference.rel_threshold = inf.at("rel_threshold").get<double>();
  c.inference.max_span_size = inf.at("max_span_size").get<std::size_t>();
  auto mode = parse_span_repr_mode(inf.at("span_repr_mode").get<std::string>());
  auto filtering = parse_attribute_filtering(inf.at("attribute_filtering").get<std::string>());
  if (!mode || !filtering) throw binio::FormatError("unknown inference mode in checkpoint");
  c.inference.span_repr_mode = *mode;
  c.inference.attribute_filtering = *filtering;
  return c;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::ostringstream out(std::ios::binary);
  out.write(kMagic, 7);
  binio::put_u32(out, kCheckpointVersion);
  binio::put_string(out, config_json(ckpt).dump());
  const auto tensors = ckpt.params.tensors();
  binio::put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    binio::put_string(out, std::string(name));
    binio::put_u32(out, 2);
    binio::put_u32(out, static_cast<std::uint32_t>(m->rows));
    binio::put_u32(out, static_cast<std::uint32_t>(m->cols));
    for (double v : m->data) binio::put_f32(out, static_cast<float>(v));
  }
  return out.str();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  binio::expect_magic(in, kMagic);
  const std::uint32_t version = binio::get_u32(in);
  if (version != kCheckpointVersion) {
    throw binio::FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  try {
    c = from_config(nlohmann::json::parse(binio::get_string(in)));
  } catch (const nlohmann::json::exception& e) {
    throw binio::FormatError(std::string("bad checkpoint config: ") + e.what());
  } catch (const LabelError& e) {
    throw binio::FormatError(std::string("bad checkpoint config: ") + e.what());
  }

  auto tensors = c.params.tensors();
  const std::uint32_t count = binio::get_u32(in);
  if (count != tensors.size()) throw binio::FormatError("unexpected tensor count");
  for (auto& [name, m] : tensors) {
    if (binio::get_string(in, 256) != name) {
      throw binio::FormatError("expected tensor " + std::string(name));
    }
    if (binio::get_u32(in) != 2) throw binio::FormatError("tensor " + std::string(name) + " rank");
    const std::uint32_t rows = binio::get_u32(in);
    const std::uint32_t cols = binio::get_u32(in);
    if (rows != m->rows || cols != m->cols) {
      throw binio::FormatError("tensor " + std::string(name) + " has unexpected shape");
    }
    for (auto& v : m->data) v = binio::get_f32(in);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw binio::FormatError("trailing bytes after checkpoint");
  }
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out.flush()) throw std::runtime_error("cannot write checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const binio::FormatError& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::string content_hash(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

}  // namespace claimgraph
