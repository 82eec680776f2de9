#include "sectra/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "sectra/errors.hpp"

namespace sectra {

namespace {

void reject_unknown_keys(const nlohmann::json& object, const std::set<std::string>& known,
                         const std::string& scope) {
  if (!object.is_object()) throw UsageError("config section " + scope + " must be an object");
  for (const auto& [key, value] : object.items()) {
    if (known.count(key) == 0) {
      throw UsageError("unknown config key " + scope + "." + key);
    }
  }
}

CorpusFormat corpus_format_from_name(const std::string& name) {
  if (name == "jsonl") return CorpusFormat::jsonl;
  if (name == "dblp_v1") return CorpusFormat::dblp_v1;
  throw UsageError("unknown corpus format: " + name);
}

const char* corpus_format_name(CorpusFormat format) {
  return format == CorpusFormat::jsonl ? "jsonl" : "dblp_v1";
}

ProviderKind provider_kind_from_name(const std::string& name) {
  if (name == "hashed") return ProviderKind::hashed;
  if (name == "file") return ProviderKind::file;
  if (name == "http") return ProviderKind::http;
  throw UsageError("unknown provider kind: " + name);
}

const char* provider_kind_name(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::hashed: return "hashed";
    case ProviderKind::file: return "file";
    case ProviderKind::http: return "http";
  }
  return "hashed";
}

template <typename T>
void read_field(const nlohmann::json& object, const char* key, T& target) {
  if (object.contains(key)) target = object.at(key).get<T>();
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& object) {
  reject_unknown_keys(object, {"corpus", "classifier", "labels_path", "provider", "model",
                               "training", "split", "rank_on", "output_dir", "seed"},
                      "config");

  RunConfig config;
  if (object.contains("corpus")) {
    const auto& corpus = object.at("corpus");
    reject_unknown_keys(corpus, {"path", "format"}, "corpus");
    read_field(corpus, "path", config.corpus_path);
    if (corpus.contains("format")) {
      config.corpus_format = corpus_format_from_name(corpus.at("format").get<std::string>());
    }
  }
  read_field(object, "classifier", config.classifier);
  read_field(object, "labels_path", config.labels_path);

  if (object.contains("provider")) {
    const auto& provider = object.at("provider");
    reject_unknown_keys(provider,
                        {"kind", "dimension", "seed", "path", "endpoint", "cache_path",
                         "batch_size", "retries"},
                        "provider");
    if (provider.contains("kind")) {
      config.provider.kind = provider_kind_from_name(provider.at("kind").get<std::string>());
    }
    read_field(provider, "dimension", config.provider.dimension);
    read_field(provider, "seed", config.provider.seed);
    read_field(provider, "path", config.provider.path);
    read_field(provider, "endpoint", config.provider.endpoint);
    read_field(provider, "cache_path", config.provider.cache_path);
    read_field(provider, "batch_size", config.provider.batch_size);
    read_field(provider, "retries", config.provider.retries);
  }

  if (object.contains("model")) {
    const auto& model = object.at("model");
    reject_unknown_keys(model, {"dimension", "heads", "alpha", "hidden"}, "model");
    read_field(model, "dimension", config.model.dimension);
    read_field(model, "heads", config.model.heads);
    read_field(model, "alpha", config.model.alpha);
    read_field(model, "hidden", config.model.hidden);
  }

  if (object.contains("training")) {
    const auto& training = object.at("training");
    reject_unknown_keys(training,
                        {"margin", "epochs", "batch_size", "learning_rate", "weight_decay",
                         "adam_beta1", "adam_beta2", "adam_eps", "loss_on"},
                        "training");
    read_field(training, "margin", config.training.margin);
    read_field(training, "epochs", config.training.epochs);
    read_field(training, "batch_size", config.training.batch_size);
    read_field(training, "learning_rate", config.training.learning_rate);
    read_field(training, "weight_decay", config.training.weight_decay);
    read_field(training, "adam_beta1", config.training.adam_beta1);
    read_field(training, "adam_beta2", config.training.adam_beta2);
    read_field(training, "adam_eps", config.training.adam_eps);
    if (training.contains("loss_on")) {
      config.training.loss_on = loss_space_from_name(training.at("loss_on").get<std::string>());
    }
  }

  if (object.contains("split")) {
    const auto& split = object.at("split");
    reject_unknown_keys(split,
                        {"train_fraction", "validation_fraction", "test_fraction",
                         "random_negatives_per_query", "eval_negatives", "eval_positives_cap"},
                        "split");
    read_field(split, "train_fraction", config.split.train_fraction);
    read_field(split, "validation_fraction", config.split.validation_fraction);
    read_field(split, "test_fraction", config.split.test_fraction);
    read_field(split, "random_negatives_per_query", config.split.random_negatives_per_query);
    read_field(split, "eval_negatives", config.split.eval_negatives);
    read_field(split, "eval_positives_cap", config.split.eval_positives_cap);
  }

  if (object.contains("rank_on")) {
    config.rank_on = rank_space_from_name(object.at("rank_on").get<std::string>());
  }
  read_field(object, "output_dir", config.output_dir);
  read_field(object, "seed", config.seed);

  config.training.seed = config.seed;
  return config;
}

nlohmann::ordered_json config_to_json(const RunConfig& config) {
  nlohmann::ordered_json object;
  object["corpus"] = {{"path", config.corpus_path},
                      {"format", corpus_format_name(config.corpus_format)}};
  object["classifier"] = config.classifier;
  object["labels_path"] = config.labels_path;
  object["provider"] = {{"kind", provider_kind_name(config.provider.kind)},
                        {"dimension", config.provider.dimension},
                        {"seed", config.provider.seed},
                        {"path", config.provider.path},
                        {"endpoint", config.provider.endpoint},
                        {"cache_path", config.provider.cache_path},
                        {"batch_size", config.provider.batch_size},
                        {"retries", config.provider.retries}};
  object["model"] = {{"dimension", config.model.dimension},
                     {"heads", config.model.heads},
                     {"alpha", config.model.alpha},
                     {"hidden", config.model.hidden}};
  object["training"] = {{"margin", config.training.margin},
                        {"epochs", config.training.epochs},
                        {"batch_size", config.training.batch_size},
                        {"learning_rate", config.training.learning_rate},
                        {"weight_decay", config.training.weight_decay},
                        {"adam_beta1", config.training.adam_beta1},
                        {"adam_beta2", config.training.adam_beta2},
                        {"adam_eps", config.training.adam_eps},
                        {"loss_on", loss_space_name(config.training.loss_on)}};
  object["split"] = {{"train_fraction", config.split.train_fraction},
                     {"validation_fraction", config.split.validation_fraction},
                     {"test_fraction", config.split.test_fraction},
                     {"random_negatives_per_query", config.split.random_negatives_per_query},
                     {"eval_negatives", config.split.eval_negatives},
                     {"eval_positives_cap", config.split.eval_positives_cap}};
  object["rank_on"] = rank_space_name(config.rank_on);
  object["output_dir"] = config.output_dir;
  object["seed"] = config.seed;
  return object;
}

void RunConfig::validate() const {
  if (classifier != "heuristic" && classifier != "file") {
    throw UsageError("classifier must be 'heuristic' or 'file'");
  }
  if (classifier == "file" && labels_path.empty()) {
    throw UsageError("classifier 'file' requires labels_path");
  }
  if (provider.dimension < 1) throw UsageError("provider dimension must be >= 1");
  if (provider.kind == ProviderKind::file && provider.path.empty()) {
    throw UsageError("provider 'file' requires provider.path");
  }
  if (provider.kind == ProviderKind::http && provider.endpoint.empty()) {
    throw UsageError("provider 'http' requires provider.endpoint");
  }
  if (provider.batch_size < 1) throw UsageError("provider batch_size must be >= 1");
  if (provider.retries < 0) throw UsageError("provider retries must be >= 0");
  if (model.dimension != provider.dimension) {
    throw UsageError("model dimension " + std::to_string(model.dimension) +
                     " must match provider dimension " + std::to_string(provider.dimension));
  }
  if (model.heads < 1) throw UsageError("model heads must be >= 1");
  if (model.dimension % model.heads != 0) {
    throw UsageError("model dimension must be divisible by heads");
  }
  if (model.alpha < 0.0 || model.alpha > 1.0) throw UsageError("alpha must lie in [0, 1]");
  if (model.hidden < 0) throw UsageError("model hidden must be >= 0");
  validate_training(training);
  if (output_dir.empty()) {
    throw UsageError("output_dir is required (config, SECTRA_DATA_DIR, or --output-dir)");
  }
}

void apply_override(nlohmann::json& object, const std::string& assignment) {
  const std::size_t equals = assignment.find('=');
  if (equals == std::string::npos || equals == 0) {
    throw UsageError("--set expects key=value, got: " + assignment);
  }
  const std::string key = assignment.substr(0, equals);
  const std::string raw_value = assignment.substr(equals + 1);

  nlohmann::json value = nlohmann::json::parse(raw_value, nullptr, false);
  if (value.is_discarded()) value = raw_value;  // plain strings need no quotes

  nlohmann::json* cursor = &object;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw UsageError("--set key has an empty path segment: " + key);
    if (dot == std::string::npos) {
      (*cursor)[part] = value;
      break;
    }
    cursor = &(*cursor)[part];
    start = dot + 1;
  }
}

RunConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file: " + path.string());
  nlohmann::json object = nlohmann::json::parse(in, nullptr, false);
  if (object.is_discarded()) throw UsageError("config file is not valid JSON: " + path.string());

  for (const std::string& assignment : overrides.sets) {
    apply_override(object, assignment);
  }
  if (overrides.has_seed) object["seed"] = overrides.seed;

  RunConfig config = config_from_json(object);

  // Precedence: flag beats SECTRA_DATA_DIR beats config file.
  if (!overrides.output_dir.empty()) {
    config.output_dir = overrides.output_dir;
  } else if (const char* env = std::getenv("SECTRA_DATA_DIR"); env != nullptr && *env != '\0') {
    config.output_dir = env;
  }

  config.validate();
  return config;
}

}  // namespace sectra
