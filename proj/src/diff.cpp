#include "claimgraph/diff.hpp"

#include <algorithm>
#include <stdexcept>

namespace claimgraph {

namespace {

template <typename Key>
Partition<Key> partition(std::vector<Key> gold, std::vector<Key> pred) {
  std::sort(gold.begin(), gold.end());
  std::sort(pred.begin(), pred.end());
  Partition<Key> p;
  std::set_intersection(gold.begin(), gold.end(), pred.begin(), pred.end(),
                        std::back_inserter(p.matched));
  std::set_difference(gold.begin(), gold.end(), pred.begin(), pred.end(),
                      std::back_inserter(p.missing));
  std::set_difference(pred.begin(), pred.end(), gold.begin(), gold.end(),
                      std::back_inserter(p.spurious));
  return p;
}

}  // namespace

std::vector<EntityKey> entity_keys(const ClaimGraph& g) {
  std::vector<EntityKey> keys;
  keys.reserve(g.entities.size());
  for (const auto& e : g.entities) keys.push_back({e.span, e.type});
  return keys;
}

std::vector<AttributeKey> attribute_keys(const ClaimGraph& g, const MatchCriteria& c) {
  std::vector<AttributeKey> keys;
  for (const auto& a : g.attributes) {
    const Entity& e = g.entities[a.entity];
    for (AttributeType t : a.types) {
      keys.push_back({e.span,
                      c.attribute_requires_entity_type ? std::optional(e.type) : std::nullopt, t});
    }
  }
  return keys;
}

std::vector<RelationKey> relation_keys(const ClaimGraph& g, const MatchCriteria& c) {
  std::vector<RelationKey> keys;
  keys.reserve(g.relations.size());
  for (const auto& r : g.relations) {
    const Entity& h = g.entities[r.head];
    const Entity& t = g.entities[r.tail];
    RelationKey k{r.type, h.span, t.span, std::nullopt, std::nullopt};
    if (c.relation_strict) {
      k.head_type = h.type;
      k.tail_type = t.type;
    }
    keys.push_back(k);
  }
  return keys;
}

GraphDiff graph_diff(const ClaimGraph& gold, const ClaimGraph& pred, const MatchCriteria& c) {
  if (gold.tokens != pred.tokens) {
    throw std::invalid_argument("graph_diff: gold and predicted token sequences differ");
  }
  GraphDiff d;
  d.entities = partition(entity_keys(gold), entity_keys(pred));
  d.attributes = partition(attribute_keys(gold, c), attribute_keys(pred, c));
  d.relations = partition(relation_keys(gold, c), relation_keys(pred, c));
  return d;
}

}  // namespace claimgraph
