#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "claimgraph/corpus.hpp"
#include "claimgraph/diff.hpp"
#include "claimgraph/schema.hpp"

namespace claimgraph {

struct Counts {
  std::uint64_t tp = 0, fp = 0, fn = 0;
  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const Counts&, const Counts&) = default;
};

struct Prf {
  double precision = 0, recall = 0, f1 = 0;
  friend bool operator==(const Prf&, const Prf&) = default;
};

// 0/0 is 0 for precision, recall and F1.
Prf prf_from_counts(const Counts& c);

// Raw tallies for one gold/pred pair, indexed by enum value.
struct Tallies {
  std::array<Counts, kNumEntityTypes> entities{};
  std::array<Counts, kNumAttributeTypes> attributes{};
  std::array<Counts, kNumRelationTypes> relations{};
  Tallies& operator+=(const Tallies& o);
  friend bool operator==(const Tallies&, const Tallies&) = default;
};

Tallies score_pair(const ClaimGraph& gold, const ClaimGraph& pred, const MatchCriteria& c = {});

struct LabelMetrics {
  std::string label;
  Counts counts;
  Prf scores;
  std::uint64_t support = 0;
  friend bool operator==(const LabelMetrics&, const LabelMetrics&) = default;
};

struct TaskMetrics {
  Counts counts;  // sum of per-label counts
  Prf micro;
  std::vector<LabelMetrics> labels;
  friend bool operator==(const TaskMetrics&, const TaskMetrics&) = default;
};

struct MetricsReport {
  TaskMetrics entities;
  TaskMetrics attributes;
  TaskMetrics relations;

  double average_micro_f1() const {
    return (entities.micro.f1 + attributes.micro.f1 + relations.micro.f1) / 3.0;
  }
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

// Per-label rows use a fixed reporting order, independent of enum order.
MetricsReport report_from_tallies(const Tallies& t);

// Predictions are aligned to gold by sentence id; throws std::invalid_argument
// on missing or extra predictions.
MetricsReport score_corpus(const Corpus& gold, const Corpus& pred, const MatchCriteria& c = {});

enum class AggregateMode { mean_metrics, pooled_counts };

// Throws std::invalid_argument when label sets or supports differ.
MetricsReport aggregate_runs(const std::vector<MetricsReport>& reports,
                             AggregateMode mode = AggregateMode::mean_metrics);

std::string metrics_to_json(const MetricsReport& r);
MetricsReport metrics_from_json(const std::string& text);
// Aligned label / P / R / F1 / S table, percentages to 2 decimals.
std::string metrics_to_table(const MetricsReport& r);

}  // namespace claimgraph
