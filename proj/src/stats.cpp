#include <algorithm>
#include <cctype>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "claimgraph/corpus.hpp"
#include "json.hpp"

namespace claimgraph {

std::uint64_t CorpusStats::entities() const {
  return std::accumulate(entity_counts.begin(), entity_counts.end(), std::uint64_t{0});
}
std::uint64_t CorpusStats::relations() const {
  return std::accumulate(relation_counts.begin(), relation_counts.end(), std::uint64_t{0});
}
std::uint64_t CorpusStats::attributes() const {
  return std::accumulate(attribute_counts.begin(), attribute_counts.end(), std::uint64_t{0});
}

double CorpusStats::density(std::uint64_t count, std::uint64_t words) {
  return words == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(words);
}

CorpusStats& CorpusStats::operator+=(const CorpusStats& o) {
  sentences += o.sentences;
  words += o.words;
  for (std::size_t i = 0; i < kNumEntityTypes; ++i) entity_counts[i] += o.entity_counts[i];
  for (std::size_t i = 0; i < kNumRelationTypes; ++i) relation_counts[i] += o.relation_counts[i];
  for (std::size_t i = 0; i < kNumAttributeTypes; ++i) attribute_counts[i] += o.attribute_counts[i];
  return *this;
}

// Attributes count (entity, attribute type) pairs.
CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats st;
  for (const auto& s : corpus) {
    ++st.sentences;
    st.words += s.graph.tokens.size();
    for (const auto& e : s.graph.entities) ++st.entity_counts[static_cast<std::size_t>(e.type)];
    for (const auto& r : s.graph.relations) ++st.relation_counts[static_cast<std::size_t>(r.type)];
    for (const auto& a : s.graph.attributes) {
      for (auto t : a.types) ++st.attribute_counts[static_cast<std::size_t>(t)];
    }
  }
  return st;
}

namespace {

std::string percent(std::uint64_t count, std::uint64_t words) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * CorpusStats::density(count, words));
  return buf;
}

}  // namespace

std::string format_stats_table(const CorpusStats& st) {
  std::ostringstream out;
  char line[128];
  out << "sentences " << st.sentences << "\n";
  out << "words " << st.words << "\n";
  std::snprintf(line, sizeof line, "%-12s %8s %9s\n", "category", "count", "per word");
  out << line;
  auto row = [&](const char* name, std::uint64_t n) {
    std::snprintf(line, sizeof line, "%-12s %8llu %9s\n", name, static_cast<unsigned long long>(n),
                  percent(n, st.words).c_str());
    out << line;
  };
  row("entities", st.entities());
  row("relations", st.relations());
  row("attributes", st.attributes());
  row("total", st.total_labels());
  out << "entities " << st.entities() << " / relations " << st.relations() << " / attributes "
      << st.attributes() << "\n";

  out << "\n";
  std::snprintf(line, sizeof line, "%-12s %8s\n", "label", "support");
  out << line;
  auto support = [&](std::string_view name, std::uint64_t n) {
    std::snprintf(line, sizeof line, "%-12.*s %8llu\n", static_cast<int>(name.size()), name.data(),
                  static_cast<unsigned long long>(n));
    out << line;
  };
  for (auto t : kEntityTypes) support(to_string(t), st.entity_counts[static_cast<std::size_t>(t)]);
  for (auto t : kAttributeTypes)
    support(to_string(t), st.attribute_counts[static_cast<std::size_t>(t)]);
  for (auto t : kRelationTypes)
    support(to_string(t), st.relation_counts[static_cast<std::size_t>(t)]);
  return out.str();
}

std::string stats_to_json(const CorpusStats& st) {
  nlohmann::ordered_json j;
  j["sentences"] = st.sentences;
  j["words"] = st.words;
  j["entities"] = st.entities();
  j["relations"] = st.relations();
  j["attributes"] = st.attributes();
  j["total_labels"] = st.total_labels();
  auto& sup = j["support"] = nlohmann::ordered_json::object();
  for (auto t : kEntityTypes) sup[std::string(to_string(t))] = st.entity_counts[static_cast<std::size_t>(t)];
  for (auto t : kAttributeTypes)
    sup[std::string(to_string(t))] = st.attribute_counts[static_cast<std::size_t>(t)];
  for (auto t : kRelationTypes)
    sup[std::string(to_string(t))] = st.relation_counts[static_cast<std::size_t>(t)];
  return j.dump(2);
}

CorpusStats stats_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  CorpusStats st;
  st.sentences = j.at("sentences").get<std::uint64_t>();
  st.words = j.at("words").get<std::uint64_t>();
  const auto& sup = j.at("support");
  for (auto t : kEntityTypes)
    st.entity_counts[static_cast<std::size_t>(t)] = sup.at(std::string(to_string(t))).get<std::uint64_t>();
  for (auto t : kAttributeTypes)
    st.attribute_counts[static_cast<std::size_t>(t)] = sup.at(std::string(to_string(t))).get<std::uint64_t>();
  for (auto t : kRelationTypes)
    st.relation_counts[static_cast<std::size_t>(t)] = sup.at(std::string(to_string(t))).get<std::uint64_t>();
  return st;
}

const std::vector<std::string>& default_claim_keywords() {
  static const std::vector<std::string> keywords = {
      "associated with", "reduce", "increase", "leads to", "led to", "our result", "greater",
      "less",            "more",   "cause",    "demonstrate", "show",  "improve"};
  return keywords;
}

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::vector<std::string> simple_tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  const auto is_punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) {
      std::string_view word = text.substr(i, j - i);
      std::size_t lead = 0;
      while (lead < word.size() && is_punct(word[lead])) ++lead;
      std::size_t trail = word.size();
      while (trail > lead && is_punct(word[trail - 1])) --trail;
      for (std::size_t k = 0; k < lead; ++k) tokens.emplace_back(1, word[k]);
      if (trail > lead) tokens.emplace_back(word.substr(lead, trail - lead));
      for (std::size_t k = std::max(trail, lead); k < word.size(); ++k) tokens.emplace_back(1, word[k]);
    }
    i = j;
  }
  return tokens;
}

std::vector<KeywordMatch> keyword_filter(const std::vector<std::vector<std::string>>& sentences,
                                         const std::vector<std::string>& keywords) {
  std::vector<std::pair<std::string, std::vector<std::string>>> patterns;
  for (const auto& kw : keywords) {
    auto words = simple_tokenize(ascii_lower(kw));
    if (!words.empty()) patterns.emplace_back(ascii_lower(kw), std::move(words));
  }

  std::vector<KeywordMatch> matches;
  for (std::size_t si = 0; si < sentences.size(); ++si) {
    std::vector<std::string> lowered;
    lowered.reserve(sentences[si].size());
    for (const auto& t : sentences[si]) lowered.push_back(ascii_lower(t));

    std::set<std::string> hit;
    for (const auto& [name, words] : patterns) {
      auto it = std::search(lowered.begin(), lowered.end(), words.begin(), words.end());
      if (it != lowered.end()) hit.insert(name);
    }
    if (!hit.empty()) matches.push_back({si, {hit.begin(), hit.end()}});
  }
  return matches;
}

}  // namespace claimgraph
