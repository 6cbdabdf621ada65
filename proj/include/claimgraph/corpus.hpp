#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "claimgraph/schema.hpp"

namespace claimgraph {

enum class Source { sbs, pubmed, cord19, perturbation, other };
enum class Split { train, val, test, unlabeled };

std::string_view to_string(Source s);
std::string_view to_string(Split s);
std::optional<Source> parse_source(std::string_view s);
std::optional<Split> parse_split(std::string_view s);

struct SentenceMeta {
  std::string id;
  Source source = Source::other;
  Split split = Split::unlabeled;
  friend bool operator==(const SentenceMeta&, const SentenceMeta&) = default;
};

struct AnnotatedSentence {
  ClaimGraph graph;
  SentenceMeta meta;
  friend bool operator==(const AnnotatedSentence&, const AnnotatedSentence&) = default;
};

using Corpus = std::vector<AnnotatedSentence>;

// Carries the 1-based line number of the offending record (0 when not tied to a line).
class CorpusError : public std::runtime_error {
 public:
  CorpusError(std::size_t line, const std::string& detail, const std::string& file = {})
      : std::runtime_error(format(line, detail, file)), line_(line), detail_(detail) {}
  std::size_t line() const { return line_; }
  const std::string& detail() const { return detail_; }

 private:
  static std::string format(std::size_t line, const std::string& detail, const std::string& file) {
    std::string where = file;
    if (line) where += (where.empty() ? "line " : ":") + std::to_string(line);
    return where.empty() ? detail : where + ": " + detail;
  }
  std::size_t line_;
  std::string detail_;
};

struct ParseOptions {
  // Reject records failing validate_structural.
  bool validate = true;
};

// One JSON object per line; blank lines are skipped. All-or-nothing: the first
// bad record throws CorpusError.
Corpus parse_corpus(std::istream& in, const ParseOptions& opts = {});
Corpus parse_corpus_string(std::string_view text, const ParseOptions& opts = {});
Corpus load_corpus(const std::string& path, const ParseOptions& opts = {});

// Parses one record. Throws CorpusError with the given line number.
AnnotatedSentence parse_record(std::string_view line, std::size_t line_no = 0,
                               const ParseOptions& opts = {});
std::string serialize_record(const AnnotatedSentence& s);

void serialize_corpus(const Corpus& corpus, std::ostream& out);
std::string serialize_corpus_string(const Corpus& corpus);

// Reads the span-annotation JSON layout (a JSON array of documents, or one
// document per line) with "tokens", "entities" [{type,start,end}], "relations"
// [{type,head,tail}]. Entity types may carry collapsed attribute labels
// ("Association|Causation"), case-insensitive.
Corpus import_span_json(std::istream& in, Split default_split = Split::unlabeled);

struct CorpusStats {
  std::uint64_t sentences = 0;
  std::uint64_t words = 0;
  std::array<std::uint64_t, kNumEntityTypes> entity_counts{};
  std::array<std::uint64_t, kNumRelationTypes> relation_counts{};
  std::array<std::uint64_t, kNumAttributeTypes> attribute_counts{};

  std::uint64_t entities() const;
  std::uint64_t relations() const;
  std::uint64_t attributes() const;
  std::uint64_t total_labels() const { return entities() + relations() + attributes(); }

  // count / words, 0 for an empty corpus.
  static double density(std::uint64_t count, std::uint64_t words);

  CorpusStats& operator+=(const CorpusStats& o);
  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

CorpusStats corpus_stats(const Corpus& corpus);
std::string format_stats_table(const CorpusStats& stats);
std::string stats_to_json(const CorpusStats& stats);
CorpusStats stats_from_json(std::string_view text);

struct KeywordMatch {
  std::size_t sentence = 0;             // index into the input list
  std::vector<std::string> keywords;    // matched keywords, lowercased and sorted
};

const std::vector<std::string>& default_claim_keywords();

std::vector<KeywordMatch> keyword_filter(const std::vector<std::vector<std::string>>& sentences,
                                         const std::vector<std::string>& keywords);

// Splits on whitespace and detaches leading/trailing ASCII punctuation.
std::vector<std::string> simple_tokenize(std::string_view text);

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct CorpusSplits {
  Corpus train;
  Corpus val;
  Corpus test;
};

// Sentences carrying an explicit train/val/test split keep it; the rest are
// assigned by a seeded permutation.
CorpusSplits split_corpus(const Corpus& corpus, std::uint64_t seed, const SplitFractions& f);

Corpus select_split(const Corpus& corpus, Split split);

}  // namespace claimgraph
