#include "claimgraph/attrs_as_ents.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "json.hpp"

namespace claimgraph {

std::string CollapsedLabel::str() const {
  std::string out(to_string(type));
  for (auto a : attrs) {
    out += '|';
    out += to_string(a);
  }
  return out;
}

CollapsedLabel make_collapsed_label(EntityType type, std::vector<AttributeType> attrs) {
  std::sort(attrs.begin(), attrs.end());
  attrs.erase(std::unique(attrs.begin(), attrs.end()), attrs.end());
  return {type, std::move(attrs)};
}

CollapsedLabel parse_collapsed_label(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (true) {
    auto bar = text.find('|', pos);
    parts.push_back(text.substr(pos, bar == std::string_view::npos ? bar : bar - pos));
    if (bar == std::string_view::npos) break;
    pos = bar + 1;
  }
  auto type = parse_entity_type(parts.front());
  if (!type) throw LabelError("unknown entity type \"" + std::string(parts.front()) + "\"");
  std::vector<AttributeType> attrs;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    auto a = parse_attribute_type(parts[i]);
    if (!a) throw LabelError("unknown attribute \"" + std::string(parts[i]) + "\"");
    if (std::find(attrs.begin(), attrs.end(), *a) != attrs.end()) {
      throw LabelError("repeated attribute \"" + std::string(parts[i]) + "\"");
    }
    attrs.push_back(*a);
  }
  return make_collapsed_label(*type, std::move(attrs));
}

CollapsedGraph attrs_as_ents_encode(const ClaimGraph& graph) {
  CollapsedGraph out;
  out.tokens = graph.tokens;
  out.relations = graph.relations;
  out.entities.reserve(graph.entities.size());
  for (std::size_t i = 0; i < graph.entities.size(); ++i) {
    out.entities.push_back(
        {graph.entities[i].span, make_collapsed_label(graph.entities[i].type, graph.attributes_of(i))});
  }
  return out;
}

ClaimGraph attrs_as_ents_decode(const CollapsedGraph& graph) {
  ClaimGraph out;
  out.tokens = graph.tokens;
  out.relations = graph.relations;
  for (std::size_t i = 0; i < graph.entities.size(); ++i) {
    const auto& e = graph.entities[i];
    out.entities.push_back({e.span, e.label.type});
    if (!e.label.attrs.empty()) out.attributes.push_back({i, e.label.attrs});
  }
  return out;
}

std::vector<CollapsedLabel> collapsed_label_universe(bool observed_only, const Corpus* corpus) {
  std::vector<CollapsedLabel> labels;
  if (!observed_only) {
    for (auto t : kEntityTypes) {
      for (unsigned mask = 0; mask < (1u << kNumAttributeTypes); ++mask) {
        std::vector<AttributeType> attrs;
        for (std::size_t k = 0; k < kNumAttributeTypes; ++k) {
          if (mask & (1u << k)) attrs.push_back(kAttributeTypes[k]);
        }
        labels.push_back({t, std::move(attrs)});
      }
    }
  } else {
    if (corpus == nullptr) throw std::invalid_argument("observed label universe needs a corpus");
    std::set<CollapsedLabel> seen;
    for (const auto& s : *corpus) {
      for (auto& e : attrs_as_ents_encode(s.graph).entities) seen.insert(e.label);
    }
    labels.assign(seen.begin(), seen.end());
  }
  std::sort(labels.begin(), labels.end());
  return labels;
}

std::string serialize_collapsed_record(const SentenceMeta& meta, const CollapsedGraph& g) {
  using nlohmann::ordered_json;
  ordered_json obj;
  obj["id"] = meta.id;
  obj["source"] = to_string(meta.source);
  obj["split"] = to_string(meta.split);
  obj["tokens"] = g.tokens;
  obj["entities"] = ordered_json::array();
  for (const auto& e : g.entities) {
    obj["entities"].push_back(
        ordered_json{{"type", e.label.str()}, {"start", e.span.start}, {"end", e.span.end}});
  }
  obj["relations"] = ordered_json::array();
  for (const auto& r : g.relations) {
    obj["relations"].push_back(
        ordered_json{{"type", to_string(r.type)}, {"head", r.head}, {"tail", r.tail}});
  }
  return obj.dump();
}

Corpus parse_collapsed_corpus(std::istream& in) {
  using nlohmann::json;
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw CorpusError(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object() || !obj.contains("entities") || !obj["entities"].is_array()) {
      throw CorpusError(line_no, "record needs an \"entities\" array");
    }
    // Decode the collapsed labels, then reuse the native parser for the rest.
    json native = obj;
    json attributes = json::array();
    for (std::size_t i = 0; i < obj["entities"].size(); ++i) {
      auto& e = native["entities"][i];
      if (!e.contains("type") || !e["type"].is_string()) {
        throw CorpusError(line_no, "entity type must be a string");
      }
      CollapsedLabel label;
      try {
        label = parse_collapsed_label(e["type"].get<std::string>());
      } catch (const LabelError& err) {
        throw CorpusError(line_no, err.what());
      }
      e["type"] = std::string(to_string(label.type));
      if (!label.attrs.empty()) {
        json types = json::array();
        for (auto a : label.attrs) types.push_back(std::string(to_string(a)));
        attributes.push_back({{"entity", i}, {"types", types}});
      }
    }
    native["attributes"] = attributes;
    corpus.push_back(parse_record(native.dump(), line_no));
  }
  return corpus;
}

}  // namespace claimgraph
