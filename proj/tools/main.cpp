// claimgraph command-line entry point.
//
// Exit codes: 0 success, 1 operational failure, 2 usage error.

#include <omp.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "claimgraph/attrs_as_ents.hpp"
#include "claimgraph/checkpoint.hpp"
#include "claimgraph/corpus.hpp"
#include "claimgraph/metrics.hpp"
#include "claimgraph/service.hpp"
#include "claimgraph/training.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace claimgraph;

namespace {

struct Global {
  bool json = false;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string span_repr;
  std::string attribute_filtering;
  bool attrs_as_ents = false;
};

// Operational failure carrying a message for stderr.
struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Corpus read_corpus(const std::string& path, const std::string& format, bool validate = true) {
  if (format == "span-json") {
    std::ifstream in(path);
    if (!in) throw Failure("cannot open " + path);
    try {
      return import_span_json(in);
    } catch (const CorpusError& e) {
      throw CorpusError(e.line(), e.detail(), path);
    }
  }
  return load_corpus(path, {.validate = validate});
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Failure("cannot write " + path);
  out << text;
  if (!out.flush()) throw Failure("cannot write " + path);
}

void apply_modes(const Global& g, InferenceConfig& inf) {
  if (!g.span_repr.empty()) inf.span_repr_mode = *parse_span_repr_mode(g.span_repr);
  if (!g.attribute_filtering.empty()) {
    inf.attribute_filtering = *parse_attribute_filtering(g.attribute_filtering);
  }
}

// ---- validate ----

struct ValidateArgs {
  std::string corpus;
  std::string format = "native";
};

int cmd_validate(const Global& g, const ValidateArgs& a) {
  const Corpus corpus = read_corpus(a.corpus, a.format, false);
  std::size_t errors = 0, warnings = 0;
  for (const auto& s : corpus) {
    ValidationReport report = validate_structural(s.graph);
    if (report.ok()) report.merge(validate_schema(s.graph));
    errors += report.errors.size();
    warnings += report.warnings.size();
    if (g.json) {
      auto j = nlohmann::ordered_json::parse(report_to_json(report));
      nlohmann::ordered_json line{{"id", s.meta.id}};
      line.update(j);
      std::cout << line.dump() << "\n";
      continue;
    }
    auto print = [&](const char* level, const Issue& i) {
      std::cout << s.meta.id << ": " << level << " " << to_string(i.rule) << " " << to_string(i.kind)
                << "[" << i.element << "]: " << i.message << "\n";
    };
    for (const auto& i : report.errors) print("error", i);
    for (const auto& i : report.warnings) print("warning", i);
  }
  std::cerr << corpus.size() << " sentences, " << errors << " errors, " << warnings
            << " warnings\n";
  return errors ? 1 : 0;
}

// ---- stats ----

struct StatsArgs {
  std::string corpus;
  std::string format = "native";
};

int cmd_stats(const Global& g, const StatsArgs& a) {
  const CorpusStats st = corpus_stats(read_corpus(a.corpus, a.format));
  std::cout << (g.json ? stats_to_json(st) + "\n" : format_stats_table(st));
  return 0;
}

// ---- filter ----

struct FilterArgs {
  std::string input;
  std::vector<std::string> keywords;
  std::string emit_corpus;
  std::string id_prefix = "raw";
};

int cmd_filter(const Global& g, const FilterArgs& a) {
  std::ifstream in(a.input);
  if (!in) throw Failure("cannot open " + a.input);
  std::vector<std::vector<std::string>> sentences;
  std::string line;
  while (std::getline(in, line)) sentences.push_back(simple_tokenize(line));
  const auto& keywords = a.keywords.empty() ? default_claim_keywords() : a.keywords;
  const auto matches = keyword_filter(sentences, keywords);

  Corpus emitted;
  for (const auto& m : matches) {
    const auto& toks = sentences[m.sentence];
    if (g.json) {
      std::cout << nlohmann::ordered_json{{"line", m.sentence + 1},
                                          {"keywords", m.keywords},
                                          {"tokens", toks}}
                       .dump()
                << "\n";
    } else {
      std::string kw, text;
      for (const auto& k : m.keywords) kw += (kw.empty() ? "" : ",") + k;
      for (const auto& t : toks) text += (text.empty() ? "" : " ") + t;
      std::cout << m.sentence + 1 << "\t" << kw << "\t" << text << "\n";
    }
    AnnotatedSentence s;
    s.meta.id = a.id_prefix + "-" + std::to_string(m.sentence + 1);
    s.graph.tokens = toks;
    emitted.push_back(std::move(s));
  }
  if (!a.emit_corpus.empty()) write_text(a.emit_corpus, serialize_corpus_string(emitted));
  std::cerr << matches.size() << " of " << sentences.size() << " sentences matched\n";
  return 0;
}

// ---- encode-attrs / decode-attrs ----

struct ConvertArgs {
  std::string input;
  std::string output;
};

int cmd_encode(const ConvertArgs& a) {
  std::ostringstream out;
  for (const auto& s : load_corpus(a.input)) {
    out << serialize_collapsed_record(s.meta, attrs_as_ents_encode(s.graph)) << "\n";
  }
  if (a.output.empty() || a.output == "-") {
    std::cout << out.str();
  } else {
    write_text(a.output, out.str());
  }
  return 0;
}

int cmd_decode(const ConvertArgs& a) {
  std::ifstream in(a.input);
  if (!in) throw Failure("cannot open " + a.input);
  Corpus corpus;
  try {
    corpus = parse_collapsed_corpus(in);
  } catch (const CorpusError& e) {
    throw CorpusError(e.line(), e.detail(), a.input);
  }
  const std::string text = serialize_corpus_string(corpus);
  if (a.output.empty() || a.output == "-") {
    std::cout << text;
  } else {
    write_text(a.output, text);
  }
  return 0;
}

// ---- split ----

struct SplitArgs {
  std::string corpus;
  std::string out_dir;
  SplitFractions fractions;
};

int cmd_split(const Global& g, const SplitArgs& a) {
  const CorpusSplits parts = split_corpus(load_corpus(a.corpus), g.seed, a.fractions);
  fs::create_directories(a.out_dir);
  write_text((fs::path(a.out_dir) / "train.jsonl").string(), serialize_corpus_string(parts.train));
  write_text((fs::path(a.out_dir) / "val.jsonl").string(), serialize_corpus_string(parts.val));
  write_text((fs::path(a.out_dir) / "test.jsonl").string(), serialize_corpus_string(parts.test));
  std::cerr << "train " << parts.train.size() << " / val " << parts.val.size() << " / test "
            << parts.test.size() << "\n";
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string train;
  std::string val;
  std::string embeddings;
  std::string out;
  std::string report;
  std::string init;
  std::size_t dim = 32;
  bool keep_last = false;
  TrainConfig config;
};

int cmd_train(const Global& g, TrainArgs a) {
  const Corpus train_set = load_corpus(a.train);
  const Corpus val_set = a.val.empty() ? Corpus{} : load_corpus(a.val);
  TrainConfig& cfg = a.config;
  cfg.seed = g.seed;
  cfg.attrs_as_ents = g.attrs_as_ents;
  apply_modes(g, cfg.inference);

  ModelParams init;
  if (!a.init.empty()) {
    Checkpoint c = load_checkpoint(a.init);
    init = std::move(c.params);
    cfg.attrs_as_ents = init.shape.attrs_as_ents;
  } else {
    std::size_t dim = a.dim;
    if (!a.embeddings.empty()) dim = FileProvider::load(a.embeddings).dim();
    init = init_params(shape_for_training(train_set, dim, a.embeddings.empty(), cfg), cfg.seed);
  }
  const auto provider = make_provider(init, a.embeddings);

  TrainResult result = train(train_set, val_set, *provider, std::move(init), cfg,
                             [&](const EpochRecord& e) {
                               if (g.json) return;
                               std::fprintf(stderr, "epoch %zu loss %.4f lr %.3g avg-F1 %.4f\n",
                                            e.epoch, e.loss.total, e.learning_rate,
                                            e.selection_score);
                             });
  save_checkpoint(a.out, {a.keep_last ? result.last : result.best, cfg.inference});
  const std::string report = train_report_to_json(result.report);
  if (!a.report.empty()) write_text(a.report, report + "\n");
  if (g.json) {
    std::cout << report << "\n";
  } else {
    std::printf("best epoch %zu (%s split) average micro-F1 %.4f\n", result.report.best_epoch,
                result.report.selection_split.c_str(), result.report.best_score);
  }
  return 0;
}

// ---- eval / predict ----

struct ModelArgs {
  std::string checkpoint;
  std::string embeddings;
  std::optional<double> attr_threshold;
  std::optional<double> rel_threshold;
};

Checkpoint load_model(const Global& g, const ModelArgs& m) {
  Checkpoint c = load_checkpoint(m.checkpoint);
  apply_modes(g, c.inference);
  if (m.attr_threshold) c.inference.attr_threshold = *m.attr_threshold;
  if (m.rel_threshold) c.inference.rel_threshold = *m.rel_threshold;
  c.inference.check();
  return c;
}

struct EvalArgs {
  ModelArgs model;
  std::string corpus;
  std::string split;
  std::string predictions;
  std::vector<std::string> aggregate;
  std::string mode = "mean";
  bool relaxed_relations = false;
  bool attribute_span_only = false;
};

int cmd_eval(const Global& g, const EvalArgs& a) {
  MetricsReport report;
  if (!a.aggregate.empty()) {
    std::vector<MetricsReport> runs;
    for (const auto& path : a.aggregate) {
      std::ifstream in(path);
      if (!in) throw Failure("cannot open " + path);
      std::stringstream buf;
      buf << in.rdbuf();
      runs.push_back(metrics_from_json(buf.str()));
    }
    report = aggregate_runs(runs, a.mode == "pooled" ? AggregateMode::pooled_counts
                                                     : AggregateMode::mean_metrics);
  } else {
    if (a.corpus.empty()) throw CLI::ValidationError("--corpus", "required unless --aggregate");
    Corpus gold = load_corpus(a.corpus);
    if (!a.split.empty()) gold = select_split(gold, *parse_split(a.split));
    Corpus pred;
    if (!a.predictions.empty()) {
      pred = load_corpus(a.predictions);
    } else {
      if (a.model.checkpoint.empty()) {
        throw CLI::ValidationError("--checkpoint", "required unless --predictions");
      }
      const Checkpoint c = load_model(g, a.model);
      pred = predict_corpus(gold, *make_provider(c.params, a.model.embeddings), c.params,
                            c.inference);
    }
    MatchCriteria mc;
    mc.relation_strict = !a.relaxed_relations;
    mc.attribute_requires_entity_type = !a.attribute_span_only;
    report = score_corpus(gold, pred, mc);
  }
  std::cout << (g.json ? metrics_to_json(report) + "\n" : metrics_to_table(report));
  return 0;
}

struct PredictArgs {
  ModelArgs model;
  std::string corpus;
  std::string out;
};

int cmd_predict(const Global& g, const PredictArgs& a) {
  const Checkpoint c = load_model(g, a.model);
  const Corpus input = load_corpus(a.corpus, {.validate = false});
  std::vector<PredictionScores> scores;
  const Corpus pred = predict_corpus(input, *make_provider(c.params, a.model.embeddings), c.params,
                                     c.inference, &scores);
  std::ostringstream out;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!g.json) {
      out << serialize_record(pred[i]) << "\n";
      continue;
    }
    auto j = nlohmann::ordered_json::parse(serialize_record(pred[i]));
    j["scores"] = {{"entities", scores[i].entities},
                   {"relations", scores[i].relations},
                   {"attributes", scores[i].attributes}};
    out << j.dump() << "\n";
  }
  if (a.out.empty() || a.out == "-") {
    std::cout << out.str();
  } else {
    write_text(a.out, out.str());
  }
  return 0;
}

// ---- gradcheck ----

struct GradCheckArgs {
  double eps = 1e-4;
  double tolerance = 1e-4;
  std::size_t dim = 16;
  std::size_t sentences = 2;
};

int cmd_gradcheck(const Global& g, const GradCheckArgs& a) {
  const GradCheckFixture fx = make_gradcheck_fixture(a.dim, a.sentences, g.seed);
  const LookupProvider provider(fx.params.shape.vocabulary, a.dim);
  GradCheckOptions opts;
  opts.epsilon = a.eps;
  opts.seed = g.seed;
  InferenceConfig modes;
  apply_modes(g, modes);
  opts.span_repr_mode = modes.span_repr_mode;
  opts.attribute_filtering = modes.attribute_filtering;
  const auto groups = grad_check(fx.params, fx.batch, provider, opts);

  double worst = 0.0;
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& grp : groups) {
    worst = std::max(worst, grp.max_rel_error);
    if (g.json) {
      j.push_back({{"group", grp.name},
                   {"checked", grp.checked},
                   {"max_rel_error", grp.max_rel_error},
                   {"max_abs_error", grp.max_abs_error}});
    } else {
      std::printf("%-10s %5zu  max rel %.3e  max abs %.3e\n", grp.name.c_str(), grp.checked,
                  grp.max_rel_error, grp.max_abs_error);
    }
  }
  if (g.json) {
    std::cout << nlohmann::ordered_json{{"groups", j}, {"max_rel_error", worst},
                                        {"tolerance", a.tolerance}}
                     .dump(2)
              << "\n";
  } else {
    std::printf("max relative error %.3e (tolerance %.1e)\n", worst, a.tolerance);
  }
  return worst < a.tolerance ? 0 : 1;
}

// ---- serve ----

struct ServeArgs {
  ServiceConfig config;
  std::string no_suggest;
};

int cmd_serve(const Global& g, ServeArgs a) {
  apply_service_env(a.config);
  a.config.no_suggest_splits = parse_split_list(a.no_suggest);
  a.config.train.seed = g.seed;
  SuggestService service(a.config);
  std::cerr << "listening on " << a.config.host << ":" << a.config.port << "\n";
  return service.run() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Claim graph extraction toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Global g;
  app.add_flag("--json", g.json, "Machine-readable output");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--threads", g.threads, "Maximum worker threads")->check(CLI::PositiveNumber);
  app.add_option("--span-repr", g.span_repr, "Span representation")
      ->check(CLI::IsMember({"attention", "maxpool"}));
  app.add_option("--attribute-filtering", g.attribute_filtering, "Attribute filtering")
      ->check(CLI::IsMember({"cascaded", "unfiltered"}));
  app.add_flag("--attrs-as-ents", g.attrs_as_ents, "Fold attributes into entity labels");

  const std::vector<std::string> formats{"native", "span-json"};

  ValidateArgs va;
  auto* validate = app.add_subcommand("validate", "Check corpus records against the schema");
  validate->add_option("--corpus,corpus", va.corpus)->required()->check(CLI::ExistingFile);
  validate->add_option("--format", va.format)->check(CLI::IsMember(formats));

  StatsArgs sa;
  auto* stats = app.add_subcommand("stats", "Corpus size and label supports");
  stats->add_option("--corpus,corpus", sa.corpus)->required()->check(CLI::ExistingFile);
  stats->add_option("--format", sa.format)->check(CLI::IsMember(formats));

  FilterArgs fa;
  auto* filter = app.add_subcommand("filter", "Keyword filter over raw sentences, one per line");
  filter->add_option("--input,input", fa.input)->required()->check(CLI::ExistingFile);
  filter->add_option("--keyword", fa.keywords, "Keyword or phrase (repeatable)");
  filter->add_option("--emit-corpus", fa.emit_corpus, "Write matches as unlabeled records");
  filter->add_option("--id-prefix", fa.id_prefix);

  ConvertArgs ea, da;
  auto* encode = app.add_subcommand("encode-attrs", "Fold attributes into entity labels");
  encode->add_option("--corpus,corpus", ea.input)->required()->check(CLI::ExistingFile);
  encode->add_option("--out", ea.output);
  auto* decode = app.add_subcommand("decode-attrs", "Unfold collapsed entity labels");
  decode->add_option("--corpus,corpus", da.input)->required()->check(CLI::ExistingFile);
  decode->add_option("--out", da.output);

  SplitArgs spa;
  auto* split = app.add_subcommand("split", "Assign train/val/test splits");
  split->add_option("--corpus,corpus", spa.corpus)->required()->check(CLI::ExistingFile);
  split->add_option("--out-dir", spa.out_dir)->required();
  split->add_option("--train", spa.fractions.train)->check(CLI::NonNegativeNumber);
  split->add_option("--val", spa.fractions.val)->check(CLI::NonNegativeNumber);
  split->add_option("--test", spa.fractions.test)->check(CLI::NonNegativeNumber);

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--train", ta.train)->required()->check(CLI::ExistingFile);
  tr->add_option("--val", ta.val)->check(CLI::ExistingFile);
  tr->add_option("--embeddings", ta.embeddings, "Precomputed embedding file")
      ->check(CLI::ExistingFile);
  tr->add_option("--init", ta.init, "Warm-start checkpoint")->check(CLI::ExistingFile);
  tr->add_option("--dim", ta.dim, "Lookup embedding size")->check(CLI::PositiveNumber);
  tr->add_option("--out", ta.out)->required();
  tr->add_option("--report", ta.report);
  tr->add_flag("--keep-last", ta.keep_last, "Save the final epoch instead of the best");
  tr->add_option("--epochs", ta.config.epochs)->check(CLI::PositiveNumber);
  tr->add_option("--batch-size", ta.config.batch_size)->check(CLI::PositiveNumber);
  tr->add_option("--lr", ta.config.learning_rate);
  tr->add_option("--warmup", ta.config.warmup_fraction);
  tr->add_option("--weight-decay", ta.config.weight_decay);
  tr->add_option("--max-grad-norm", ta.config.max_grad_norm);
  tr->add_option("--dropout", ta.config.dropout);
  tr->add_option("--neg-entities", ta.config.neg_entities);
  tr->add_option("--neg-relations", ta.config.neg_relations);
  tr->add_option("--attr-threshold", ta.config.inference.attr_threshold);
  tr->add_option("--rel-threshold", ta.config.inference.rel_threshold);
  tr->add_option("--max-span", ta.config.inference.max_span_size)->check(CLI::PositiveNumber);

  auto add_model_opts = [](CLI::App* cmd, ModelArgs& m) {
    cmd->add_option("--checkpoint", m.checkpoint)->check(CLI::ExistingFile);
    cmd->add_option("--embeddings", m.embeddings)->check(CLI::ExistingFile);
    cmd->add_option("--attr-threshold", m.attr_threshold);
    cmd->add_option("--rel-threshold", m.rel_threshold);
  };

  EvalArgs eva;
  auto* ev = app.add_subcommand("eval", "Score predictions against gold");
  add_model_opts(ev, eva.model);
  ev->add_option("--corpus", eva.corpus)->check(CLI::ExistingFile);
  ev->add_option("--split", eva.split)->check(CLI::IsMember({"train", "val", "test", "unlabeled"}));
  ev->add_option("--predictions", eva.predictions)->check(CLI::ExistingFile);
  ev->add_option("--aggregate", eva.aggregate, "Metrics JSON files of repeated runs")
      ->check(CLI::ExistingFile);
  ev->add_option("--mode", eva.mode)->check(CLI::IsMember({"mean", "pooled"}));
  ev->add_flag("--relaxed-relations", eva.relaxed_relations,
               "Match relations on spans without endpoint types");
  ev->add_flag("--attribute-span-only", eva.attribute_span_only,
               "Match attributes on span without entity type");

  PredictArgs pa;
  auto* pr = app.add_subcommand("predict", "Predict graphs for a corpus");
  add_model_opts(pr, pa.model);
  pr->get_option("--checkpoint")->required();
  pr->add_option("--corpus,corpus", pa.corpus)->required()->check(CLI::ExistingFile);
  pr->add_option("--out", pa.out);

  GradCheckArgs ga;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient check on a random model");
  gc->add_option("--eps", ga.eps)->check(CLI::PositiveNumber);
  gc->add_option("--tolerance", ga.tolerance)->check(CLI::PositiveNumber);
  gc->add_option("--dim", ga.dim)->check(CLI::PositiveNumber);
  gc->add_option("--sentences", ga.sentences)->check(CLI::PositiveNumber);

  ServeArgs sva;
  auto* serve = app.add_subcommand("serve", "Run the suggestion service");
  serve->add_option("--host", sva.config.host);
  serve->add_option("--port", sva.config.port)->check(CLI::Range(0, 65535));
  serve->add_option("--checkpoint", sva.config.checkpoint_path, "Also CLAIMGRAPH_CKPT");
  serve->add_option("--embeddings", sva.config.embedding_file)->check(CLI::ExistingFile);
  serve->add_option("--store", sva.config.store_path, "Also CLAIMGRAPH_STORE");
  serve->add_option("--queue", sva.config.queue_paths, "Corpus of sentences to annotate")
      ->check(CLI::ExistingFile);
  serve->add_option("--no-suggest-splits", sva.no_suggest, "Comma-separated splits");
  serve->add_option("--retrain-epochs", sva.config.retrain_epochs)->check(CLI::PositiveNumber);
  serve->add_option("--retrain-lr", sva.config.train.learning_rate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (g.threads > 0) omp_set_num_threads(g.threads);

  try {
    if (*validate) return cmd_validate(g, va);
    if (*stats) return cmd_stats(g, sa);
    if (*filter) return cmd_filter(g, fa);
    if (*encode) return cmd_encode(ea);
    if (*decode) return cmd_decode(da);
    if (*split) return cmd_split(g, spa);
    if (*tr) return cmd_train(g, ta);
    if (*ev) return cmd_eval(g, eva);
    if (*pr) return cmd_predict(g, pa);
    if (*gc) return cmd_gradcheck(g, ga);
    if (*serve) return cmd_serve(g, sva);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
