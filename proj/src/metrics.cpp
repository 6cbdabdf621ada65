#include "claimgraph/metrics.hpp"

#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace claimgraph {

namespace {

constexpr std::array<EntityType, kNumEntityTypes> kEntityReportOrder = {
    EntityType::factor,      EntityType::evidence,  EntityType::epistemic,
    EntityType::association, EntityType::magnitude, EntityType::qualifier};
constexpr std::array<AttributeType, kNumAttributeTypes> kAttributeReportOrder = {
    AttributeType::causation, AttributeType::comparison, AttributeType::indicates,
    AttributeType::sign_plus, AttributeType::sign_minus, AttributeType::correlation,
    AttributeType::test};
constexpr std::array<RelationType, kNumRelationTypes> kRelationReportOrder = {
    RelationType::arg0,    RelationType::arg1,   RelationType::comp_to, RelationType::modifier,
    RelationType::subtype, RelationType::q_plus, RelationType::q_minus};

template <typename Key, typename LabelOf, std::size_t N>
void tally(const Partition<Key>& p, LabelOf label_of, std::array<Counts, N>& out) {
  for (const auto& k : p.matched) ++out[static_cast<std::size_t>(label_of(k))].tp;
  for (const auto& k : p.missing) ++out[static_cast<std::size_t>(label_of(k))].fn;
  for (const auto& k : p.spurious) ++out[static_cast<std::size_t>(label_of(k))].fp;
}

template <typename Enum, std::size_t N>
TaskMetrics task_from_counts(const std::array<Counts, N>& counts, const std::array<Enum, N>& order) {
  TaskMetrics t;
  for (Enum e : order) {
    const Counts& c = counts[static_cast<std::size_t>(e)];
    t.labels.push_back({std::string(to_string(e)), c, prf_from_counts(c), c.tp + c.fn});
    t.counts += c;
  }
  t.micro = prf_from_counts(t.counts);
  return t;
}

TaskMetrics aggregate_task(const std::vector<const TaskMetrics*>& tasks, AggregateMode mode) {
  TaskMetrics out = *tasks.front();
  const double n = static_cast<double>(tasks.size());
  out.counts = {};
  for (auto& l : out.labels) l.counts = {};
  for (const TaskMetrics* t : tasks) {
    if (t->labels.size() != out.labels.size()) throw std::invalid_argument("label sets differ");
    out.counts += t->counts;
    for (std::size_t i = 0; i < out.labels.size(); ++i) {
      if (t->labels[i].label != out.labels[i].label) throw std::invalid_argument("label sets differ");
      if (t->labels[i].support != out.labels[i].support) {
        throw std::invalid_argument("support of \"" + out.labels[i].label + "\" differs across runs");
      }
      out.labels[i].counts += t->labels[i].counts;
    }
  }
  if (mode == AggregateMode::pooled_counts) {
    out.micro = prf_from_counts(out.counts);
    for (auto& l : out.labels) l.scores = prf_from_counts(l.counts);
    return out;
  }
  auto mean = [&](auto get) {
    double acc = 0.0;
    for (const TaskMetrics* t : tasks) acc += get(*t);
    return acc / n;
  };
  out.micro = {mean([](const TaskMetrics& t) { return t.micro.precision; }),
               mean([](const TaskMetrics& t) { return t.micro.recall; }),
               mean([](const TaskMetrics& t) { return t.micro.f1; })};
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    out.labels[i].scores = {mean([i](const TaskMetrics& t) { return t.labels[i].scores.precision; }),
                            mean([i](const TaskMetrics& t) { return t.labels[i].scores.recall; }),
                            mean([i](const TaskMetrics& t) { return t.labels[i].scores.f1; })};
  }
  return out;
}

nlohmann::ordered_json task_json(const TaskMetrics& t) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["micro"] = {{"precision", t.micro.precision}, {"recall", t.micro.recall}, {"f1", t.micro.f1},
                {"tp", t.counts.tp},             {"fp", t.counts.fp},         {"fn", t.counts.fn}};
  j["labels"] = ordered_json::array();
  for (const auto& l : t.labels) {
    j["labels"].push_back({{"label", l.label},
                           {"precision", l.scores.precision},
                           {"recall", l.scores.recall},
                           {"f1", l.scores.f1},
                           {"support", l.support},
                           {"tp", l.counts.tp},
                           {"fp", l.counts.fp},
                           {"fn", l.counts.fn}});
  }
  return j;
}

TaskMetrics task_from_json(const nlohmann::json& j) {
  TaskMetrics t;
  const auto& m = j.at("micro");
  t.micro = {m.at("precision").get<double>(), m.at("recall").get<double>(), m.at("f1").get<double>()};
  t.counts = {m.at("tp").get<std::uint64_t>(), m.at("fp").get<std::uint64_t>(),
              m.at("fn").get<std::uint64_t>()};
  for (const auto& l : j.at("labels")) {
    t.labels.push_back({l.at("label").get<std::string>(),
                        {l.at("tp").get<std::uint64_t>(), l.at("fp").get<std::uint64_t>(),
                         l.at("fn").get<std::uint64_t>()},
                        {l.at("precision").get<double>(), l.at("recall").get<double>(),
                         l.at("f1").get<double>()},
                        l.at("support").get<std::uint64_t>()});
  }
  return t;
}

}  // namespace

Prf prf_from_counts(const Counts& c) {
  Prf out;
  const double tp = static_cast<double>(c.tp);
  if (c.tp + c.fp > 0) out.precision = tp / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) out.recall = tp / static_cast<double>(c.tp + c.fn);
  if (out.precision + out.recall > 0) {
    out.f1 = 2 * out.precision * out.recall / (out.precision + out.recall);
  }
  return out;
}

Tallies& Tallies::operator+=(const Tallies& o) {
  for (std::size_t i = 0; i < entities.size(); ++i) entities[i] += o.entities[i];
  for (std::size_t i = 0; i < attributes.size(); ++i) attributes[i] += o.attributes[i];
  for (std::size_t i = 0; i < relations.size(); ++i) relations[i] += o.relations[i];
  return *this;
}

Tallies score_pair(const ClaimGraph& gold, const ClaimGraph& pred, const MatchCriteria& c) {
  const GraphDiff diff = graph_diff(gold, pred, c);
  Tallies t;
  tally(diff.entities, [](const EntityKey& k) { return k.type; }, t.entities);
  tally(diff.attributes, [](const AttributeKey& k) { return k.type; }, t.attributes);
  tally(diff.relations, [](const RelationKey& k) { return k.type; }, t.relations);
  return t;
}

MetricsReport report_from_tallies(const Tallies& t) {
  return {task_from_counts(t.entities, kEntityReportOrder),
          task_from_counts(t.attributes, kAttributeReportOrder),
          task_from_counts(t.relations, kRelationReportOrder)};
}

MetricsReport score_corpus(const Corpus& gold, const Corpus& pred, const MatchCriteria& c) {
  std::map<std::string_view, const AnnotatedSentence*> by_id;
  for (const auto& p : pred) {
    if (!by_id.emplace(p.meta.id, &p).second) {
      throw std::invalid_argument("duplicate prediction for sentence \"" + p.meta.id + "\"");
    }
  }
  if (by_id.size() != gold.size()) {
    for (const auto& g : gold) by_id.erase(g.meta.id);
    if (!by_id.empty()) {
      throw std::invalid_argument("prediction for unknown sentence \"" +
                                  std::string(by_id.begin()->first) + "\"");
    }
  }
  Tallies total;
  for (const auto& g : gold) {
    auto it = by_id.find(g.meta.id);
    if (it == by_id.end()) {
      throw std::invalid_argument("missing prediction for sentence \"" + g.meta.id + "\"");
    }
    total += score_pair(g.graph, it->second->graph, c);
  }
  return report_from_tallies(total);
}

MetricsReport aggregate_runs(const std::vector<MetricsReport>& reports, AggregateMode mode) {
  if (reports.empty()) throw std::invalid_argument("no reports to aggregate");
  std::vector<const TaskMetrics*> e, a, r;
  for (const auto& rep : reports) {
    e.push_back(&rep.entities);
    a.push_back(&rep.attributes);
    r.push_back(&rep.relations);
  }
  return {aggregate_task(e, mode), aggregate_task(a, mode), aggregate_task(r, mode)};
}

std::string metrics_to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["entities"] = task_json(r.entities);
  j["attributes"] = task_json(r.attributes);
  j["relations"] = task_json(r.relations);
  j["average_micro_f1"] = r.average_micro_f1();
  return j.dump(2);
}

MetricsReport metrics_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  return {task_from_json(j.at("entities")), task_from_json(j.at("attributes")),
          task_from_json(j.at("relations"))};
}

std::string metrics_to_table(const MetricsReport& r) {
  std::ostringstream out;
  char line[160];
  auto section = [&](const char* name, const TaskMetrics& t) {
    std::snprintf(line, sizeof line, "%-11s %-12s %7s %7s %7s %7s\n", name, "label", "P", "R", "F1",
                  "S");
    out << line;
    for (const auto& l : t.labels) {
      std::snprintf(line, sizeof line, "%-11s %-12s %7.2f %7.2f %7.2f %7llu\n", "",
                    l.label.c_str(), 100 * l.scores.precision, 100 * l.scores.recall,
                    100 * l.scores.f1, static_cast<unsigned long long>(l.support));
      out << line;
    }
    std::snprintf(line, sizeof line, "%-11s %-12s %7.2f %7.2f %7.2f %7llu\n", "", "micro",
                  100 * t.micro.precision, 100 * t.micro.recall, 100 * t.micro.f1,
                  static_cast<unsigned long long>(t.counts.tp + t.counts.fn));
    out << line;
  };
  section("entities", r.entities);
  section("attributes", r.attributes);
  section("relations", r.relations);
  std::snprintf(line, sizeof line, "average micro F1 %.2f\n", 100 * r.average_micro_f1());
  out << line;
  return out.str();
}

}  // namespace claimgraph
