#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "claimgraph/corpus.hpp"
#include "claimgraph/schema.hpp"

namespace claimgraph {

// An entity type together with its (canonically sorted) attribute set,
// written "etype|attr1|attr2".
struct CollapsedLabel {
  EntityType type = EntityType::factor;
  std::vector<AttributeType> attrs;

  std::string str() const;
  friend bool operator==(const CollapsedLabel&, const CollapsedLabel&) = default;
  friend auto operator<=>(const CollapsedLabel&, const CollapsedLabel&) = default;
};

class LabelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Throws LabelError naming the first unknown component.
CollapsedLabel parse_collapsed_label(std::string_view text);

CollapsedLabel make_collapsed_label(EntityType type, std::vector<AttributeType> attrs);

struct CollapsedEntity {
  Span span;
  CollapsedLabel label;
  friend bool operator==(const CollapsedEntity&, const CollapsedEntity&) = default;
};

struct CollapsedGraph {
  std::vector<std::string> tokens;
  std::vector<CollapsedEntity> entities;
  std::vector<Relation> relations;
  friend bool operator==(const CollapsedGraph&, const CollapsedGraph&) = default;
};

CollapsedGraph attrs_as_ents_encode(const ClaimGraph& graph);
ClaimGraph attrs_as_ents_decode(const CollapsedGraph& graph);

// Every combination (observed_only = false, 768 labels) or those present in
// the corpus, sorted.
std::vector<CollapsedLabel> collapsed_label_universe(bool observed_only, const Corpus* corpus);

// Collapsed corpus lines: the native record with entity "type" holding the
// collapsed string and no "attributes" key.
std::string serialize_collapsed_record(const SentenceMeta& meta, const CollapsedGraph& g);
Corpus parse_collapsed_corpus(std::istream& in);

}  // namespace claimgraph
