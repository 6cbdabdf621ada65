#include <stdexcept>

#include "claimgraph/schema.hpp"
#include "json.hpp"

namespace claimgraph {

std::optional<Rule> parse_rule(std::string_view s) {
  for (int r = 0; r <= static_cast<int>(Rule::subtype_type_mismatch); ++r) {
    if (to_string(static_cast<Rule>(r)) == s) return static_cast<Rule>(r);
  }
  return std::nullopt;
}

std::optional<ElementKind> parse_element_kind(std::string_view s) {
  for (auto k : {ElementKind::entity, ElementKind::relation, ElementKind::attribute}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

namespace {

nlohmann::ordered_json issues_json(const std::vector<Issue>& issues) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& i : issues) {
    out.push_back({{"rule", to_string(i.rule)},
                   {"kind", to_string(i.kind)},
                   {"element", i.element},
                   {"message", i.message}});
  }
  return out;
}

std::vector<Issue> issues_from(const nlohmann::json& arr) {
  std::vector<Issue> out;
  for (const auto& j : arr) {
    auto rule = parse_rule(j.at("rule").get<std::string>());
    auto kind = parse_element_kind(j.at("kind").get<std::string>());
    if (!rule || !kind) throw std::invalid_argument("unknown rule or element kind in report");
    out.push_back({*rule, j.at("message").get<std::string>(), *kind,
                   j.at("element").get<std::size_t>()});
  }
  return out;
}

}  // namespace

std::string report_to_json(const ValidationReport& report) {
  nlohmann::ordered_json j;
  j["errors"] = issues_json(report.errors);
  j["warnings"] = issues_json(report.warnings);
  return j.dump();
}

ValidationReport report_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  return {issues_from(j.at("errors")), issues_from(j.at("warnings"))};
}

}  // namespace claimgraph
