#pragma once

#include <optional>
#include <vector>

#include "claimgraph/schema.hpp"

namespace claimgraph {

struct MatchCriteria {
  // Relation matches also require both endpoint entity types.
  bool relation_strict = true;
  // Attribute matches also require the carrying entity's type.
  bool attribute_requires_entity_type = true;
};

struct EntityKey {
  Span span;
  EntityType type;
  friend auto operator<=>(const EntityKey&, const EntityKey&) = default;
};

struct AttributeKey {
  Span span;
  std::optional<EntityType> entity_type;
  AttributeType type;
  friend auto operator<=>(const AttributeKey&, const AttributeKey&) = default;
};

struct RelationKey {
  RelationType type;
  Span head;
  Span tail;
  std::optional<EntityType> head_type;
  std::optional<EntityType> tail_type;
  friend auto operator<=>(const RelationKey&, const RelationKey&) = default;
};

std::vector<EntityKey> entity_keys(const ClaimGraph& g);
std::vector<AttributeKey> attribute_keys(const ClaimGraph& g, const MatchCriteria& c);
std::vector<RelationKey> relation_keys(const ClaimGraph& g, const MatchCriteria& c);

template <typename Key>
struct Partition {
  std::vector<Key> matched;
  std::vector<Key> missing;   // gold only
  std::vector<Key> spurious;  // predicted only
};

struct GraphDiff {
  Partition<EntityKey> entities;
  Partition<AttributeKey> attributes;
  Partition<RelationKey> relations;
};

// Throws std::invalid_argument when the token sequences differ.
GraphDiff graph_diff(const ClaimGraph& gold, const ClaimGraph& pred, const MatchCriteria& c = {});

}  // namespace claimgraph
