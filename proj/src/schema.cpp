#include "claimgraph/schema.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

namespace claimgraph {

namespace {

constexpr std::array<std::string_view, kNumEntityTypes> kEntityNames = {
    "factor", "association", "magnitude", "evidence", "epistemic", "qualifier"};
constexpr std::array<std::string_view, kNumAttributeTypes> kAttributeNames = {
    "causation", "correlation", "comparison", "sign+", "sign-", "test", "indicates"};
constexpr std::array<std::string_view, kNumRelationTypes> kRelationNames = {
    "arg0", "arg1", "comp_to", "subtype", "modifier", "q+", "q-"};

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

std::string span_text(const Span& s) {
  return "[" + std::to_string(s.start) + "," + std::to_string(s.end) + ")";
}

void sort_issues(std::vector<Issue>& issues) {
  std::stable_sort(issues.begin(), issues.end(), [](const Issue& a, const Issue& b) {
    return std::tie(a.rule, a.kind, a.element) < std::tie(b.rule, b.kind, b.element);
  });
}

}  // namespace

std::string_view to_string(EntityType t) { return kEntityNames[static_cast<std::size_t>(t)]; }
std::string_view to_string(AttributeType t) { return kAttributeNames[static_cast<std::size_t>(t)]; }
std::string_view to_string(RelationType t) { return kRelationNames[static_cast<std::size_t>(t)]; }

std::optional<EntityType> parse_entity_type(std::string_view s) {
  return lookup<EntityType>(kEntityNames, s);
}
std::optional<AttributeType> parse_attribute_type(std::string_view s) {
  return lookup<AttributeType>(kAttributeNames, s);
}
std::optional<RelationType> parse_relation_type(std::string_view s) {
  return lookup<RelationType>(kRelationNames, s);
}

std::string_view to_string(Rule r) {
  switch (r) {
    case Rule::span_bounds: return "span-bounds";
    case Rule::span_unique: return "span-unique";
    case Rule::self_cycle: return "self-cycle";
    case Rule::dangling_relation: return "dangling-relation";
    case Rule::duplicate_relation: return "duplicate-relation";
    case Rule::dangling_attribute: return "dangling-attribute";
    case Rule::duplicate_attribute_record: return "duplicate-attribute-record";
    case Rule::duplicate_attribute_type: return "duplicate-attribute-type";
    case Rule::attribute_on_non_association: return "attribute-on-non-association";
    case Rule::comp_to_without_comparison: return "comp_to-without-comparison";
    case Rule::proportionality_non_factor: return "proportionality-non-factor";
    case Rule::subtype_type_mismatch: return "subtype-type-mismatch";
  }
  return "unknown";
}

std::string_view to_string(ElementKind k) {
  switch (k) {
    case ElementKind::entity: return "entity";
    case ElementKind::relation: return "relation";
    case ElementKind::attribute: return "attribute";
  }
  return "unknown";
}

std::vector<AttributeType> ClaimGraph::attributes_of(std::size_t index) const {
  for (const auto& a : attributes) {
    if (a.entity == index) return a.types;
  }
  return {};
}

void ValidationReport::merge(const ValidationReport& other) {
  errors.insert(errors.end(), other.errors.begin(), other.errors.end());
  warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
  sort_issues(errors);
  sort_issues(warnings);
}

ValidationReport validate_structural(const ClaimGraph& graph) {
  ValidationReport report;
  auto& errors = report.errors;
  const std::size_t n = graph.tokens.size();
  const std::size_t num_entities = graph.entities.size();

  std::map<Span, std::size_t> first_with_span;
  for (std::size_t i = 0; i < num_entities; ++i) {
    const Span& s = graph.entities[i].span;
    if (!(s.start < s.end && s.end <= n)) {
      errors.push_back({Rule::span_bounds,
                        "entity " + std::to_string(i) + " span " + span_text(s) +
                            " outside sentence of " + std::to_string(n) + " tokens",
                        ElementKind::entity, i});
    }
    auto [it, inserted] = first_with_span.emplace(s, i);
    if (!inserted) {
      errors.push_back({Rule::span_unique,
                        "entity " + std::to_string(i) + " repeats span " + span_text(s) +
                            " of entity " + std::to_string(it->second),
                        ElementKind::entity, i});
    }
  }

  std::set<std::tuple<std::size_t, std::size_t, RelationType>> seen_relations;
  for (std::size_t i = 0; i < graph.relations.size(); ++i) {
    const Relation& r = graph.relations[i];
    if (r.head >= num_entities || r.tail >= num_entities) {
      errors.push_back({Rule::dangling_relation,
                        "relation " + std::to_string(i) + " references missing entity",
                        ElementKind::relation, i});
    }
    if (r.head == r.tail) {
      errors.push_back({Rule::self_cycle,
                        "relation " + std::to_string(i) + " links entity " +
                            std::to_string(r.head) + " to itself",
                        ElementKind::relation, i});
    }
    if (!seen_relations.emplace(r.head, r.tail, r.type).second) {
      errors.push_back({Rule::duplicate_relation,
                        "relation " + std::to_string(i) + " repeats (" + std::to_string(r.head) +
                            ", " + std::to_string(r.tail) + ", " + std::string(to_string(r.type)) +
                            ")",
                        ElementKind::relation, i});
    }
  }

  std::set<std::size_t> seen_records;
  for (std::size_t i = 0; i < graph.attributes.size(); ++i) {
    const AttributeAssignment& a = graph.attributes[i];
    if (a.entity >= num_entities) {
      errors.push_back({Rule::dangling_attribute,
                        "attribute record " + std::to_string(i) + " references missing entity " +
                            std::to_string(a.entity),
                        ElementKind::attribute, i});
    }
    if (!seen_records.insert(a.entity).second) {
      errors.push_back({Rule::duplicate_attribute_record,
                        "entity " + std::to_string(a.entity) + " has more than one attribute record",
                        ElementKind::attribute, i});
    }
    std::set<AttributeType> types(a.types.begin(), a.types.end());
    if (types.size() != a.types.size()) {
      errors.push_back({Rule::duplicate_attribute_type,
                        "attribute record " + std::to_string(i) + " repeats an attribute type",
                        ElementKind::attribute, i});
    }
  }

  sort_issues(errors);
  return report;
}

ValidationReport validate_schema(const ClaimGraph& graph) {
  if (!validate_structural(graph).ok()) {
    throw PreconditionError("validate_schema requires a structurally valid graph");
  }
  ValidationReport report;
  const auto& entities = graph.entities;

  for (std::size_t i = 0; i < graph.attributes.size(); ++i) {
    const auto& a = graph.attributes[i];
    if (!a.types.empty() && entities[a.entity].type != EntityType::association) {
      report.errors.push_back(
          {Rule::attribute_on_non_association,
           "attributes apply only to association entities; entity " + std::to_string(a.entity) +
               " is " + std::string(to_string(entities[a.entity].type)),
           ElementKind::attribute, i});
    }
  }

  for (std::size_t i = 0; i < graph.relations.size(); ++i) {
    const Relation& r = graph.relations[i];
    const EntityType head = entities[r.head].type;
    const EntityType tail = entities[r.tail].type;
    switch (r.type) {
      case RelationType::comp_to: {
        auto attrs = graph.attributes_of(r.head);
        if (std::find(attrs.begin(), attrs.end(), AttributeType::comparison) == attrs.end()) {
          report.warnings.push_back({Rule::comp_to_without_comparison,
                                     "comp_to head entity " + std::to_string(r.head) +
                                         " lacks the comparison attribute",
                                     ElementKind::relation, i});
        }
        break;
      }
      case RelationType::q_plus:
      case RelationType::q_minus:
        if (head != EntityType::factor || tail != EntityType::factor) {
          report.warnings.push_back({Rule::proportionality_non_factor,
                                     std::string(to_string(r.type)) + " relation " +
                                         std::to_string(i) + " does not join two factors",
                                     ElementKind::relation, i});
        }
        break;
      case RelationType::subtype:
        if (head != tail) {
          report.warnings.push_back({Rule::subtype_type_mismatch,
                                     "subtype relation " + std::to_string(i) + " joins " +
                                         std::string(to_string(head)) + " and " +
                                         std::string(to_string(tail)),
                                     ElementKind::relation, i});
        }
        break;
      default:
        break;
    }
  }

  sort_issues(report.errors);
  sort_issues(report.warnings);
  return report;
}

std::vector<std::pair<std::size_t, std::size_t>> overlapping_entity_pairs(const ClaimGraph& graph) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const auto& es = graph.entities;
  for (std::size_t i = 0; i < es.size(); ++i) {
    for (std::size_t j = i + 1; j < es.size(); ++j) {
      if (es[i].span.overlaps(es[j].span)) pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

}  // namespace claimgraph
