#include "sectra/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <memory>
#include <ostream>

#include <nlohmann/json.hpp>

#include "sectra/errors.hpp"

namespace sectra {

using ordered_json = nlohmann::ordered_json;

OutputLock::OutputLock(const std::filesystem::path& path) : path_(path) {
  const int fd = ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw DataError("output directory is locked (" + path.string() +
                    " exists); another command may be running");
  }
  ::close(fd);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

namespace {

void require_artifact(const std::filesystem::path& path, const std::string& producer) {
  if (!std::filesystem::exists(path)) {
    throw DataError("missing " + path.string() + "; run `sectra " + producer + "` first");
  }
}

void write_resolved_config(const RunConfig& config, const OutputPaths& paths) {
  std::ofstream out(paths.resolved_config());
  if (!out) throw DataError("cannot write resolved config");
  out << config_to_json(config).dump(2) << '\n';
}

OutputPaths prepare_output(const RunConfig& config) {
  OutputPaths paths{config.output_dir};
  std::filesystem::create_directories(paths.root);
  return paths;
}

std::shared_ptr<EmbeddingProvider> make_inner_provider(const RunConfig& config,
                                                       const OutputPaths& paths) {
  switch (config.provider.kind) {
    case ProviderKind::hashed:
      return std::make_shared<HashedEmbedder>(config.provider.dimension, config.provider.seed);
    case ProviderKind::file:
      return std::make_shared<FileEmbedder>(config.provider.path);
    case ProviderKind::http: {
      std::filesystem::path cache = config.provider.cache_path.empty()
                                        ? paths.root / "http_cache.jsonl"
                                        : std::filesystem::path(config.provider.cache_path);
      return std::make_shared<HttpEmbedder>(config.provider.endpoint, config.provider.dimension,
                                            cache, config.provider.batch_size,
                                            config.provider.retries);
    }
  }
  throw UsageError("unknown provider kind");
}

// Providers used after the embed step serve from the persisted store first.
std::shared_ptr<CachingProvider> make_cached_provider(const RunConfig& config,
                                                      const OutputPaths& paths,
                                                      bool require_store) {
  EmbeddingStore preloaded;
  if (std::filesystem::exists(paths.embeddings())) {
    preloaded = store_read(paths.embeddings());
  } else if (require_store) {
    require_artifact(paths.embeddings(), "embed");
  }
  return std::make_shared<CachingProvider>(make_inner_provider(config, paths),
                                           std::move(preloaded));
}

PaperSectioner make_sectioner(const RunConfig& config) {
  auto classifier = std::make_shared<HeuristicClassifier>();
  if (config.classifier == "file") {
    return PaperSectioner(classifier, PrecomputedLabels::load(config.labels_path));
  }
  return PaperSectioner(classifier);
}

Corpus load_pipeline_corpus(const OutputPaths& paths) {
  require_artifact(paths.corpus(), "ingest");
  return load_corpus_jsonl(paths.corpus()).corpus;
}

ModelParams init_from_config(const RunConfig& config) {
  return init_model(config.model.dimension, config.model.heads, config.model.hidden,
                    config.model.alpha, config.seed);
}

std::pair<double, double> validation_metrics(PaperEmbeddingIndex& index,
                                             const std::vector<EvaluationCase>& cases,
                                             const ModelParams& params, RankSpace rank_on) {
  const MetricsReport report = evaluate_cases(cases, [&](const std::string& id) {
    return ranking_representation(index, params, id, rank_on);
  });
  return {report.map, report.mrr};
}

}  // namespace

void cmd_ingest(const RunConfig& config) {
  if (config.corpus_path.empty()) throw UsageError("corpus.path is required for ingest");
  const OutputPaths paths = prepare_output(config);
  OutputLock lock(paths.lock());

  const ParseResult parsed = config.corpus_format == CorpusFormat::jsonl
                                 ? load_corpus_jsonl(config.corpus_path)
                                 : load_corpus_dblp(config.corpus_path);
  save_corpus(parsed.corpus, paths.corpus());

  ordered_json report;
  report["accepted"] = parsed.report.accepted;
  report["rejected"] = parsed.report.rejected;
  report["dangling_references"] = parsed.report.dangling_references;
  report["duplicate_references"] = parsed.report.duplicate_references;
  report["self_references"] = parsed.report.self_references;
  std::ofstream out(paths.ingest_report());
  if (!out) throw DataError("cannot write ingest report");
  out << report.dump(2) << '\n';

  write_resolved_config(config, paths);
}

void cmd_split(const RunConfig& config) {
  const OutputPaths paths = prepare_output(config);
  OutputLock lock(paths.lock());

  const Corpus corpus = load_pipeline_corpus(paths);
  const CitationGraph graph = CitationGraph::build(corpus);
  const DatasetSplit split = build_split(corpus, graph, config.split, config.seed);
  save_split(split, paths.split());
  write_resolved_config(config, paths);
}

void cmd_embed(const RunConfig& config) {
  const OutputPaths paths = prepare_output(config);
  OutputLock lock(paths.lock());

  const Corpus corpus = load_pipeline_corpus(paths);
  const PaperSectioner sectioner = make_sectioner(config);
  auto provider = make_cached_provider(config, paths, /*require_store=*/false);

  // The four pipeline texts plus the bare section texts used by the ablation,
  // so file-backed providers can drive every study offline.
  PaperEmbeddingIndex index(corpus, *provider, sectioner);
  for (const PaperRecord& paper : corpus.records()) {
    index.embeddings(paper.id);
    index.raw_section_embeddings(paper.id);
  }
  store_write(paths.embeddings(), provider->snapshot());
  write_resolved_config(config, paths);
}

void cmd_train(const RunConfig& config) {
  const OutputPaths paths = prepare_output(config);
  OutputLock lock(paths.lock());

  const Corpus corpus = load_pipeline_corpus(paths);
  require_artifact(paths.split(), "split");
  const DatasetSplit split = load_split(paths.split());
  auto provider = make_cached_provider(config, paths, /*require_store=*/true);
  const PaperSectioner sectioner = make_sectioner(config);
  PaperEmbeddingIndex index(corpus, *provider, sectioner);

  EmbeddingLookup lookup = [&index](const std::string& id) -> const SectionEmbeddings& {
    return index.embeddings(id);
  };
  ValidationFn validation;
  if (!split.validation.empty()) {
    validation = [&](const ModelParams& params) {
      return validation_metrics(index, split.validation, params, config.rank_on);
    };
  }

  const TrainingRun run = train(split.train, lookup, init_from_config(config), config.training,
                                validation);
  save_checkpoint(run.final_params, paths.checkpoint());
  append_training_log(run, paths.training_log());
  write_resolved_config(config, paths);
}

namespace {

struct EvalContext {
  Corpus corpus;
  DatasetSplit split;
  std::shared_ptr<CachingProvider> provider;
  std::unique_ptr<PaperSectioner> sectioner;
  std::unique_ptr<PaperEmbeddingIndex> index;
  ModelParams params;
};

// Fills in place: the index keeps a pointer to context.corpus, so the context
// must already live at its final address.
void init_eval_context(EvalContext& context, const RunConfig& config, const OutputPaths& paths) {
  context.corpus = load_pipeline_corpus(paths);
  require_artifact(paths.split(), "split");
  context.split = load_split(paths.split());
  require_artifact(paths.checkpoint(), "train");
  context.params = load_checkpoint(paths.checkpoint());
  context.provider = make_cached_provider(config, paths, /*require_store=*/true);
  context.sectioner = std::make_unique<PaperSectioner>(make_sectioner(config));
  context.index = std::make_unique<PaperEmbeddingIndex>(context.corpus, *context.provider,
                                                        *context.sectioner);
}

}  // namespace

void cmd_eval(const RunConfig& config) {
  const OutputPaths paths = prepare_output(config);
  OutputLock lock(paths.lock());

  EvalContext context;
  init_eval_context(context, config, paths);
  const MetricsReport report =
      evaluate_cases(context.split.test, [&](const std::string& id) {
        return ranking_representation(*context.index, context.params, id, config.rank_on);
      });
  write_metrics_json(report, paths.metrics());
  write_per_n_csv(report, paths.per_n_csv());
  write_resolved_config(config, paths);
}

void cmd_ablate(const RunConfig& config) {
  const OutputPaths paths = prepare_output(config);
  OutputLock lock(paths.lock());

  EvalContext context;
  init_eval_context(context, config, paths);
  const std::vector<AblationRow> rows =
      ablation(context.split.test, *context.index, context.params);
  write_ablation_table(rows, paths.ablation_csv(), paths.ablation_json());
  write_resolved_config(config, paths);
}

void cmd_alpha_sweep(const RunConfig& config) {
  const OutputPaths paths = prepare_output(config);
  OutputLock lock(paths.lock());

  EvalContext context;
  init_eval_context(context, config, paths);
  const std::vector<AlphaRow> rows =
      alpha_sweep(context.split.test, *context.index, context.params);
  write_alpha_table(rows, paths.alpha_csv(), paths.alpha_json());
  write_resolved_config(config, paths);
}

void cmd_repr_study(const RunConfig& config) {
  const OutputPaths paths = prepare_output(config);
  OutputLock lock(paths.lock());

  const Corpus corpus = load_pipeline_corpus(paths);
  require_artifact(paths.split(), "split");
  const DatasetSplit split = load_split(paths.split());
  auto provider = make_cached_provider(config, paths, /*require_store=*/true);
  const PaperSectioner sectioner = make_sectioner(config);
  PaperEmbeddingIndex index(corpus, *provider, sectioner);

  const ReprStudyResult result =
      representation_study(split, index, init_from_config(config), config.training);
  write_repr_table(result.rows, paths.repr_csv(), paths.repr_json());

  const std::array<std::string, 3> labels = {"rank_h_loss_z", "rank_h_loss_h", "rank_z_loss_z"};
  for (std::size_t i = 0; i < result.checkpoints.size() && i < labels.size(); ++i) {
    save_checkpoint(result.checkpoints[i], paths.repr_checkpoint(labels[i]));
  }
  write_resolved_config(config, paths);
}

namespace {

std::string nearest_ids_message(const Corpus& corpus, const std::string& query_id) {
  std::vector<std::string> ids = corpus.sorted_ids();
  auto it = std::lower_bound(ids.begin(), ids.end(), query_id);
  const std::ptrdiff_t position = it - ids.begin();
  const std::ptrdiff_t begin = std::max<std::ptrdiff_t>(0, position - 2);
  const std::ptrdiff_t end = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(ids.size()),
                                                      position + 3);
  std::string nearest;
  for (std::ptrdiff_t i = begin; i < end; ++i) {
    if (!nearest.empty()) nearest += ", ";
    nearest += ids[static_cast<std::size_t>(i)];
  }
  return "unknown query id '" + query_id + "'; nearest known ids: " + nearest;
}

}  // namespace

void cmd_recommend(const RunConfig& config, const RecommendOptions& options, std::ostream& out) {
  if (options.query_id.empty() == options.query_json.empty()) {
    throw UsageError("recommend expects exactly one of --query-id or --query-json");
  }
  if (options.top_k < 1) throw UsageError("--top-k must be >= 1");

  const OutputPaths paths = prepare_output(config);
  OutputLock lock(paths.lock());

  const Corpus corpus = load_pipeline_corpus(paths);
  require_artifact(paths.checkpoint(), "train");
  const ModelParams params = load_checkpoint(paths.checkpoint());
  auto provider = make_cached_provider(config, paths, /*require_store=*/true);
  const PaperSectioner sectioner = make_sectioner(config);
  PaperEmbeddingIndex index(corpus, *provider, sectioner);

  PaperRecord query;
  if (!options.query_id.empty()) {
    const PaperRecord* record = corpus.find(options.query_id);
    if (record == nullptr) throw DataError(nearest_ids_message(corpus, options.query_id));
    query = *record;
  } else {
    nlohmann::json object = nlohmann::json::parse(options.query_json, nullptr, false);
    if (object.is_discarded() || !object.contains("title")) {
      throw UsageError("--query-json expects `{\"title\", \"abstract\"}`");
    }
    query.id = "(ad-hoc query)";
    query.title = object.at("title").get<std::string>();
    if (object.contains("abstract")) query.abstract = object.at("abstract").get<std::string>();
  }

  const PaperRepresentation query_repr = represent(query, *provider, sectioner, params);
  const Vector& query_vec =
      config.rank_on == RankSpace::h_paper ? query_repr.h_paper : query_repr.z_paper;

  std::vector<std::pair<std::string, Vector>> candidates;
  for (const std::string& id : corpus.sorted_ids()) {
    if (id == query.id) continue;
    candidates.emplace_back(id, ranking_representation(index, params, id, config.rank_on));
  }
  RankedList ranked = rank(query.id, query_vec, candidates);
  const std::size_t k =
      std::min<std::size_t>(ranked.items.size(), static_cast<std::size_t>(options.top_k));

  if (options.as_json) {
    ordered_json object;
    object["query_id"] = query.id;
    object["section_weights"] = {query_repr.section_weights[0], query_repr.section_weights[1],
                                 query_repr.section_weights[2]};
    ordered_json results = ordered_json::array();
    for (std::size_t i = 0; i < k; ++i) {
      ordered_json row;
      row["rank"] = i + 1;
      row["id"] = ranked.items[i].id;
      row["score"] = ranked.items[i].score;
      row["title"] = corpus.at(ranked.items[i].id).title;
      results.push_back(std::move(row));
    }
    object["results"] = std::move(results);
    out << object.dump(2) << '\n';
  } else {
    out << "query: " << query.id << '\n';
    char weights[128];
    std::snprintf(weights, sizeof(weights),
                  "section weights: background=%.3f method=%.3f results=%.3f",
                  query_repr.section_weights[0], query_repr.section_weights[1],
                  query_repr.section_weights[2]);
    out << weights << '\n';
    for (std::size_t i = 0; i < k; ++i) {
      char line[64];
      std::snprintf(line, sizeof(line), "%3zu. %-24s %.6f  ", i + 1,
                    ranked.items[i].id.c_str(), ranked.items[i].score);
      out << line << corpus.at(ranked.items[i].id).title << '\n';
    }
  }
}

}  // namespace sectra
