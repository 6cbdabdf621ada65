#include "claimgraph/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "claimgraph/attrs_as_ents.hpp"
#include "json.hpp"

namespace claimgraph {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, 5> kSourceNames = {"sbs", "pubmed", "cord19",
                                                          "perturbation", "other"};
constexpr std::array<std::string_view, 4> kSplitNames = {"train", "val", "test", "unlabeled"};

[[noreturn]] void fail(std::size_t line, const std::string& what) { throw CorpusError(line, what); }

const json& require(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(line, std::string("missing key \"") + key + "\"");
  return *it;
}

std::size_t as_index(const json& v, const char* what, std::size_t line) {
  if (!v.is_number_unsigned()) fail(line, std::string(what) + " must be a non-negative integer");
  return v.get<std::size_t>();
}

std::string as_string(const json& v, const char* what, std::size_t line) {
  if (!v.is_string()) fail(line, std::string(what) + " must be a string");
  return v.get<std::string>();
}

const json& as_array(const json& v, const char* what, std::size_t line) {
  if (!v.is_array()) fail(line, std::string(what) + " must be an array");
  return v;
}

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const char* what,
                std::size_t line) {
  for (const auto& [k, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      fail(line, std::string("unknown key \"") + k + "\" in " + what);
    }
  }
}

std::vector<AttributeType> canonical_attrs(std::vector<AttributeType> attrs) {
  std::sort(attrs.begin(), attrs.end());
  return attrs;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view to_string(Source s) { return kSourceNames[static_cast<std::size_t>(s)]; }
std::string_view to_string(Split s) { return kSplitNames[static_cast<std::size_t>(s)]; }

std::optional<Source> parse_source(std::string_view s) {
  for (std::size_t i = 0; i < kSourceNames.size(); ++i)
    if (kSourceNames[i] == s) return static_cast<Source>(i);
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view s) {
  for (std::size_t i = 0; i < kSplitNames.size(); ++i)
    if (kSplitNames[i] == s) return static_cast<Split>(i);
  return std::nullopt;
}

AnnotatedSentence parse_record(std::string_view text, std::size_t line, const ParseOptions& opts) {
  json obj;
  try {
    obj = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    fail(line, std::string("malformed JSON: ") + e.what());
  }
  if (!obj.is_object()) fail(line, "record must be a JSON object");
  check_keys(obj, {"id", "source", "split", "tokens", "entities", "relations", "attributes", "scores"},
             "record", line);

  AnnotatedSentence s;
  s.meta.id = as_string(require(obj, "id", line), "id", line);
  if (auto it = obj.find("source"); it != obj.end()) {
    auto name = as_string(*it, "source", line);
    auto src = parse_source(name);
    if (!src) fail(line, "unknown source \"" + name + "\"");
    s.meta.source = *src;
  }
  if (auto it = obj.find("split"); it != obj.end()) {
    auto name = as_string(*it, "split", line);
    auto sp = parse_split(name);
    if (!sp) fail(line, "unknown split \"" + name + "\"");
    s.meta.split = *sp;
  }

  for (const auto& tok : as_array(require(obj, "tokens", line), "tokens", line)) {
    s.graph.tokens.push_back(as_string(tok, "token", line));
  }

  if (auto it = obj.find("entities"); it != obj.end()) {
    for (const auto& e : as_array(*it, "entities", line)) {
      if (!e.is_object()) fail(line, "entity must be an object");
      check_keys(e, {"type", "start", "end"}, "entity", line);
      auto name = as_string(require(e, "type", line), "entity type", line);
      auto type = parse_entity_type(name);
      if (!type) fail(line, "unknown entity type \"" + name + "\"");
      s.graph.entities.push_back({{as_index(require(e, "start", line), "start", line),
                                   as_index(require(e, "end", line), "end", line)},
                                  *type});
    }
  }

  if (auto it = obj.find("relations"); it != obj.end()) {
    for (const auto& r : as_array(*it, "relations", line)) {
      if (!r.is_object()) fail(line, "relation must be an object");
      check_keys(r, {"type", "head", "tail"}, "relation", line);
      auto name = as_string(require(r, "type", line), "relation type", line);
      auto type = parse_relation_type(name);
      if (!type) fail(line, "unknown relation type \"" + name + "\"");
      s.graph.relations.push_back({as_index(require(r, "head", line), "head", line),
                                   as_index(require(r, "tail", line), "tail", line), *type});
    }
  }

  if (auto it = obj.find("attributes"); it != obj.end()) {
    for (const auto& a : as_array(*it, "attributes", line)) {
      if (!a.is_object()) fail(line, "attribute record must be an object");
      check_keys(a, {"entity", "types"}, "attribute record", line);
      AttributeAssignment rec;
      rec.entity = as_index(require(a, "entity", line), "entity", line);
      for (const auto& t : as_array(require(a, "types", line), "types", line)) {
        auto name = as_string(t, "attribute type", line);
        auto type = parse_attribute_type(name);
        if (!type) fail(line, "unknown attribute type \"" + name + "\"");
        rec.types.push_back(*type);
      }
      if (rec.types.empty()) continue;
      s.graph.attributes.push_back(std::move(rec));
    }
  }

  if (opts.validate) {
    auto report = validate_structural(s.graph);
    if (!report.ok()) {
      const Issue& first = report.errors.front();
      fail(line, "sentence \"" + s.meta.id + "\" violates " + std::string(to_string(first.rule)) +
                     ": " + first.message);
    }
    // Canonical order only once indices are known to be valid.
    std::sort(s.graph.attributes.begin(), s.graph.attributes.end(),
              [](const auto& a, const auto& b) { return a.entity < b.entity; });
    for (auto& a : s.graph.attributes) a.types = canonical_attrs(std::move(a.types));
  }
  return s;
}

Corpus parse_corpus(std::istream& in, const ParseOptions& opts) {
  Corpus corpus;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto s = parse_record(line, line_no, opts);
    if (!ids.insert(s.meta.id).second) fail(line_no, "duplicate sentence id \"" + s.meta.id + "\"");
    corpus.push_back(std::move(s));
  }
  return corpus;
}

Corpus parse_corpus_string(std::string_view text, const ParseOptions& opts) {
  std::istringstream in{std::string(text)};
  return parse_corpus(in, opts);
}

Corpus load_corpus(const std::string& path, const ParseOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError(0, "cannot open corpus file " + path);
  try {
    return parse_corpus(in, opts);
  } catch (const CorpusError& e) {
    throw CorpusError(e.line(), e.detail(), path);
  }
}

std::string serialize_record(const AnnotatedSentence& s) {
  if (auto report = validate_structural(s.graph); !report.ok()) {
    throw CorpusError(0, "cannot serialize invalid sentence \"" + s.meta.id +
                             "\": " + report.errors.front().message);
  }
  ordered_json obj;
  obj["id"] = s.meta.id;
  obj["source"] = to_string(s.meta.source);
  obj["split"] = to_string(s.meta.split);
  obj["tokens"] = s.graph.tokens;
  obj["entities"] = ordered_json::array();
  for (const auto& e : s.graph.entities) {
    obj["entities"].push_back(
        ordered_json{{"type", to_string(e.type)}, {"start", e.span.start}, {"end", e.span.end}});
  }
  obj["relations"] = ordered_json::array();
  for (const auto& r : s.graph.relations) {
    obj["relations"].push_back(
        ordered_json{{"type", to_string(r.type)}, {"head", r.head}, {"tail", r.tail}});
  }
  auto attrs = s.graph.attributes;
  std::sort(attrs.begin(), attrs.end(),
            [](const auto& a, const auto& b) { return a.entity < b.entity; });
  obj["attributes"] = ordered_json::array();
  for (const auto& a : attrs) {
    if (a.types.empty()) continue;
    ordered_json types = ordered_json::array();
    for (auto t : canonical_attrs(a.types)) types.push_back(to_string(t));
    obj["attributes"].push_back(ordered_json{{"entity", a.entity}, {"types", std::move(types)}});
  }
  return obj.dump(-1, ' ', false, ordered_json::error_handler_t::strict);
}

void serialize_corpus(const Corpus& corpus, std::ostream& out) {
  for (const auto& s : corpus) out << serialize_record(s) << '\n';
}

std::string serialize_corpus_string(const Corpus& corpus) {
  std::ostringstream out;
  serialize_corpus(corpus, out);
  return out.str();
}

namespace {

AnnotatedSentence import_document(const json& doc, std::size_t index, Split default_split) {
  const std::size_t line = index + 1;
  if (!doc.is_object()) fail(line, "document must be an object");
  AnnotatedSentence s;
  if (auto it = doc.find("orig_id"); it != doc.end()) {
    s.meta.id = it->is_string() ? it->get<std::string>() : it->dump();
  } else if (auto it2 = doc.find("id"); it2 != doc.end()) {
    s.meta.id = it2->is_string() ? it2->get<std::string>() : it2->dump();
  } else {
    s.meta.id = "doc-" + std::to_string(index);
  }
  s.meta.split = default_split;
  if (auto it = doc.find("split"); it != doc.end() && it->is_string()) {
    if (auto sp = parse_split(lower(it->get<std::string>()))) s.meta.split = *sp;
  }
  if (auto it = doc.find("source"); it != doc.end() && it->is_string()) {
    if (auto src = parse_source(lower(it->get<std::string>()))) s.meta.source = *src;
  }
  for (const auto& tok : as_array(require(doc, "tokens", line), "tokens", line)) {
    s.graph.tokens.push_back(as_string(tok, "token", line));
  }
  if (auto it = doc.find("entities"); it != doc.end()) {
    for (const auto& e : as_array(*it, "entities", line)) {
      auto name = lower(as_string(require(e, "type", line), "entity type", line));
      CollapsedLabel label;
      try {
        label = parse_collapsed_label(name);
      } catch (const LabelError& err) {
        fail(line, err.what());
      }
      if (auto a = e.find("attributes"); a != e.end()) {
        for (const auto& t : as_array(*a, "attributes", line)) {
          auto an = lower(as_string(t, "attribute", line));
          auto at = parse_attribute_type(an);
          if (!at) fail(line, "unknown attribute type \"" + an + "\"");
          label.attrs.push_back(*at);
        }
        label = make_collapsed_label(label.type, label.attrs);
      }
      const std::size_t idx = s.graph.entities.size();
      s.graph.entities.push_back({{as_index(require(e, "start", line), "start", line),
                                   as_index(require(e, "end", line), "end", line)},
                                  label.type});
      if (!label.attrs.empty()) s.graph.attributes.push_back({idx, label.attrs});
    }
  }
  if (auto it = doc.find("relations"); it != doc.end()) {
    for (const auto& r : as_array(*it, "relations", line)) {
      auto name = lower(as_string(require(r, "type", line), "relation type", line));
      auto type = parse_relation_type(name);
      if (!type) fail(line, "unknown relation type \"" + name + "\"");
      s.graph.relations.push_back({as_index(require(r, "head", line), "head", line),
                                   as_index(require(r, "tail", line), "tail", line), *type});
    }
  }
  if (auto report = validate_structural(s.graph); !report.ok()) {
    fail(line, "document \"" + s.meta.id + "\" violates " +
                   std::string(to_string(report.errors.front().rule)) + ": " +
                   report.errors.front().message);
  }
  return s;
}

}  // namespace

Corpus import_span_json(std::istream& in, Split default_split) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Corpus corpus;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return corpus;
  if (text[first] == '[') {
    json docs;
    try {
      docs = json::parse(text);
    } catch (const json::parse_error& e) {
      fail(0, std::string("malformed JSON: ") + e.what());
    }
    for (std::size_t i = 0; i < docs.size(); ++i)
      corpus.push_back(import_document(docs[i], i, default_split));
  } else {
    std::istringstream lines(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(lines, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) {
        ++n;
        continue;
      }
      json doc;
      try {
        doc = json::parse(line);
      } catch (const json::parse_error& e) {
        fail(n + 1, std::string("malformed JSON: ") + e.what());
      }
      corpus.push_back(import_document(doc, n, default_split));
      ++n;
    }
  }
  std::unordered_set<std::string> ids;
  for (auto& s : corpus) {
    if (!ids.insert(s.meta.id).second) fail(0, "duplicate document id \"" + s.meta.id + "\"");
  }
  return corpus;
}

CorpusSplits split_corpus(const Corpus& corpus, std::uint64_t seed, const SplitFractions& f) {
  std::vector<Split> assigned(corpus.size());
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    assigned[i] = corpus[i].meta.split;
    if (assigned[i] == Split::unlabeled) free.push_back(i);
  }

  if (!free.empty()) {
    std::mt19937_64 rng(seed);
    std::shuffle(free.begin(), free.end(), rng);
    const double total = f.train + f.val + f.test;
    const auto n = static_cast<double>(free.size());
    auto n_val = static_cast<std::size_t>(std::llround(n * f.val / total));
    auto n_test = static_cast<std::size_t>(std::llround(n * f.test / total));
    n_val = std::min(n_val, free.size());
    n_test = std::min(n_test, free.size() - n_val);
    const std::size_t n_train = free.size() - n_val - n_test;
    for (std::size_t k = 0; k < free.size(); ++k) {
      assigned[free[k]] =
          k < n_train ? Split::train : (k < n_train + n_val ? Split::val : Split::test);
    }
  }

  CorpusSplits out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    AnnotatedSentence s = corpus[i];
    s.meta.split = assigned[i];
    (assigned[i] == Split::train ? out.train : assigned[i] == Split::val ? out.val : out.test)
        .push_back(std::move(s));
  }
  return out;
}

Corpus select_split(const Corpus& corpus, Split split) {
  Corpus out;
  std::copy_if(corpus.begin(), corpus.end(), std::back_inserter(out),
               [split](const AnnotatedSentence& s) { return s.meta.split == split; });
  return out;
}

}  // namespace claimgraph
