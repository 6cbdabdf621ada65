#pragma once

#include <istream>
#include <ostream>
#include <string>

#include "claimgraph/model.hpp"

namespace claimgraph {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  InferenceConfig inference;
};

// "CGCKPT1", version, config JSON (shape + inference settings), then named
// float32 tensors. Encoding is canonical: decode followed by encode
// reproduces the input bytes.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);  // write-then-rename
Checkpoint load_checkpoint(const std::string& path);

// Lowercase hex SHA-256 of the encoded bytes.
std::string content_hash(const std::string& bytes);

}  // namespace claimgraph
