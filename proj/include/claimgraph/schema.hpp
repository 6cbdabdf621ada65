#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace claimgraph {

// Half-open token range [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool overlaps(const Span& o) const { return start < o.end && o.start < end; }

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

// Enumerator order is the canonical order used for classifier indices,
// tie-breaking and label sorting.
enum class EntityType { factor, association, magnitude, evidence, epistemic, qualifier };
enum class AttributeType { causation, correlation, comparison, sign_plus, sign_minus, test, indicates };
enum class RelationType { arg0, arg1, comp_to, subtype, modifier, q_plus, q_minus };

inline constexpr std::size_t kNumEntityTypes = 6;
inline constexpr std::size_t kNumAttributeTypes = 7;
inline constexpr std::size_t kNumRelationTypes = 7;

inline constexpr std::array<EntityType, kNumEntityTypes> kEntityTypes = {
    EntityType::factor,   EntityType::association, EntityType::magnitude,
    EntityType::evidence, EntityType::epistemic,   EntityType::qualifier};
inline constexpr std::array<AttributeType, kNumAttributeTypes> kAttributeTypes = {
    AttributeType::causation,  AttributeType::correlation, AttributeType::comparison,
    AttributeType::sign_plus,  AttributeType::sign_minus,  AttributeType::test,
    AttributeType::indicates};
inline constexpr std::array<RelationType, kNumRelationTypes> kRelationTypes = {
    RelationType::arg0,     RelationType::arg1,   RelationType::comp_to, RelationType::subtype,
    RelationType::modifier, RelationType::q_plus, RelationType::q_minus};

// Wire strings ("sign+", "q-", ...).
std::string_view to_string(EntityType t);
std::string_view to_string(AttributeType t);
std::string_view to_string(RelationType t);

std::optional<EntityType> parse_entity_type(std::string_view s);
std::optional<AttributeType> parse_attribute_type(std::string_view s);
std::optional<RelationType> parse_relation_type(std::string_view s);

struct Entity {
  Span span;
  EntityType type = EntityType::factor;
  friend bool operator==(const Entity&, const Entity&) = default;
};

struct Relation {
  std::size_t head = 0;
  std::size_t tail = 0;
  RelationType type = RelationType::arg0;
  friend bool operator==(const Relation&, const Relation&) = default;
};

struct AttributeAssignment {
  std::size_t entity = 0;
  std::vector<AttributeType> types;
  friend bool operator==(const AttributeAssignment&, const AttributeAssignment&) = default;
};

struct ClaimGraph {
  std::vector<std::string> tokens;
  std::vector<Entity> entities;
  std::vector<Relation> relations;
  std::vector<AttributeAssignment> attributes;

  // Attribute set of entity `index`, empty when it has no record.
  std::vector<AttributeType> attributes_of(std::size_t index) const;

  friend bool operator==(const ClaimGraph&, const ClaimGraph&) = default;
};

// Rule ids, in reporting order.
enum class Rule {
  span_bounds,
  span_unique,
  self_cycle,
  dangling_relation,
  duplicate_relation,
  dangling_attribute,
  duplicate_attribute_record,
  duplicate_attribute_type,
  attribute_on_non_association,
  comp_to_without_comparison,
  proportionality_non_factor,
  subtype_type_mismatch,
};

std::string_view to_string(Rule r);
std::optional<Rule> parse_rule(std::string_view s);

enum class ElementKind { entity, relation, attribute };
std::string_view to_string(ElementKind k);
std::optional<ElementKind> parse_element_kind(std::string_view s);

struct Issue {
  Rule rule;
  std::string message;
  ElementKind kind;
  std::size_t element;  // index into the list named by `kind`
  friend bool operator==(const Issue&, const Issue&) = default;
};

struct ValidationReport {
  std::vector<Issue> errors;
  std::vector<Issue> warnings;

  bool ok() const { return errors.empty(); }
  void merge(const ValidationReport& other);
};

// Thrown when a precondition of a schema operation is violated.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

ValidationReport validate_structural(const ClaimGraph& graph);

// Requires a structurally valid graph; throws PreconditionError otherwise.
ValidationReport validate_schema(const ClaimGraph& graph);

// {"errors": [...], "warnings": [...]}, each issue {rule, kind, element, message}.
std::string report_to_json(const ValidationReport& report);
ValidationReport report_from_json(std::string_view text);

std::vector<std::pair<std::size_t, std::size_t>> overlapping_entity_pairs(const ClaimGraph& graph);

}  // namespace claimgraph
