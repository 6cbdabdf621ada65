#include <cstdio>
#include <filesystem>

#include "claimgraph/checkpoint.hpp"
#include "doctest.h"

using namespace claimgraph;

namespace {

Checkpoint sample(std::uint64_t seed, bool attrs_as_ents = false) {
  ModelShape s;
  s.dim = 5;
  s.max_span_size = 6;
  s.attrs_as_ents = attrs_as_ents;
  s.entity_labels = plain_entity_labels();
  if (attrs_as_ents) {
    s.entity_labels.push_back({EntityType::association, {AttributeType::causation}});
  }
  s.vocabulary = {"<unk>", "a", "b c", "\"q\""};
  Checkpoint c{init_params(s, seed), {}};
  c.inference.attr_threshold = 0.6;
  c.inference.span_repr_mode = SpanReprMode::maxpool;
  return c;
}

}  // namespace

TEST_CASE("checkpoint bytes round-trip exactly") {
  for (bool aae : {false, true}) {
    const std::string bytes = encode_checkpoint(sample(4, aae));
    CHECK(bytes.substr(0, 7) == "CGCKPT1");
    const Checkpoint back = decode_checkpoint(bytes);
    CHECK(encode_checkpoint(back) == bytes);
    CHECK(back.inference == sample(4, aae).inference);
    CHECK(back.params.shape == sample(4, aae).params.shape);
  }
}

TEST_CASE("float32 storage is idempotent") {
  const Checkpoint c = sample(8);
  const Checkpoint once = decode_checkpoint(encode_checkpoint(c));
  const Checkpoint twice = decode_checkpoint(encode_checkpoint(once));
  CHECK(once.params == twice.params);
  for (std::size_t k = 0; k < c.params.rel_w.size(); ++k)
    CHECK(once.params.rel_w.data[k] == static_cast<double>(static_cast<float>(c.params.rel_w.data[k])));
}

TEST_CASE("malformed checkpoints are rejected") {
  const std::string bytes = encode_checkpoint(sample(1));
  CHECK_THROWS(decode_checkpoint(""));
  CHECK_THROWS(decode_checkpoint("CGCKPT0" + bytes.substr(7)));
  CHECK_THROWS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)));
  CHECK_THROWS(decode_checkpoint(bytes + "x"));
  std::string version = bytes;
  version[7] = static_cast<char>(kCheckpointVersion + 1);
  CHECK_THROWS(decode_checkpoint(version));
}

TEST_CASE("content hash") {
  CHECK(content_hash("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(content_hash("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const std::string a = encode_checkpoint(sample(1));
  CHECK(content_hash(a) == content_hash(encode_checkpoint(decode_checkpoint(a))));
  CHECK(content_hash(a) != content_hash(encode_checkpoint(sample(2))));
}

TEST_CASE("save and load") {
  const auto dir = std::filesystem::temp_directory_path() / "claimgraph_ckpt_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "m.ckpt").string();
  const Checkpoint c = sample(3);
  save_checkpoint(path, c);
  CHECK(encode_checkpoint(load_checkpoint(path)) == encode_checkpoint(c));
  CHECK_THROWS(load_checkpoint((dir / "missing.ckpt").string()));
  std::filesystem::remove_all(dir);
}
