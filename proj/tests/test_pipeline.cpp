#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sectra/errors.hpp"
#include "sectra/pipeline.hpp"
#include "support/planted.hpp"
#include "support/tempdir.hpp"

using namespace sectra;
namespace ts = sectra::testsupport;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

RunConfig tiny_config(const ts::TempDir& dir, const std::string& run_name) {
  RunConfig config;
  config.corpus_path = dir.file("corpus.jsonl").string();
  config.provider.dimension = 32;
  config.model.dimension = 32;
  config.model.heads = 4;
  config.training.epochs = 2;
  config.training.learning_rate = 3e-3;
  config.split.train_fraction = 0.7;
  config.split.validation_fraction = 0.15;
  config.split.test_fraction = 0.15;
  config.split.eval_negatives = 10;
  config.output_dir = dir.file(run_name).string();
  config.seed = 11;
  config.training.seed = 11;
  config.validate();
  return config;
}

void write_planted(const ts::TempDir& dir, std::uint64_t seed) {
  ts::PlantedConfig planted;
  planted.topics = 5;
  planted.papers_per_topic = 20;
  planted.seed = seed;
  save_corpus(ts::make_planted_corpus(planted), dir.file("corpus.jsonl"));
}

}  // namespace

TEST_CASE("the full pipeline runs end to end and is deterministic") {
  ts::TempDir dir;
  write_planted(dir, 501);

  const RunConfig first = tiny_config(dir, "run1");
  cmd_ingest(first);
  cmd_split(first);
  cmd_embed(first);
  cmd_train(first);
  cmd_eval(first);
  cmd_ablate(first);
  cmd_alpha_sweep(first);

  const OutputPaths paths{first.output_dir};
  const nlohmann::json report = nlohmann::json::parse(slurp(paths.metrics()));
  CHECK(report.at("query_count").get<int>() > 0);
  CHECK(report.at("map").get<double>() >= 0.0);
  CHECK(report.at("map").get<double>() <= 1.0);
  CHECK(report.at("per_n").size() == 20);

  const std::string ablation_csv = slurp(paths.ablation_csv());
  CHECK(std::count(ablation_csv.begin(), ablation_csv.end(), '\n') == 6);  // header + 5 rows
  const std::string alpha_csv = slurp(paths.alpha_csv());
  CHECK(std::count(alpha_csv.begin(), alpha_csv.end(), '\n') == 12);  // header + 11 rows

  const RunConfig second = tiny_config(dir, "run2");
  cmd_ingest(second);
  cmd_split(second);
  cmd_embed(second);
  cmd_train(second);
  cmd_eval(second);

  const OutputPaths other{second.output_dir};
  CHECK(slurp(paths.checkpoint()) == slurp(other.checkpoint()));
  CHECK(slurp(paths.metrics()) == slurp(other.metrics()));
  CHECK(slurp(paths.split()) == slurp(other.split()));
}

TEST_CASE("missing upstream artifacts name the producing command") {
  ts::TempDir dir;
  write_planted(dir, 502);
  const RunConfig config = tiny_config(dir, "run");

  CHECK_THROWS_WITH_AS(cmd_split(config), doctest::Contains("ingest"), DataError);
  cmd_ingest(config);
  cmd_split(config);
  CHECK_THROWS_WITH_AS(cmd_train(config), doctest::Contains("embed"), DataError);
  cmd_embed(config);
  CHECK_THROWS_WITH_AS(cmd_eval(config), doctest::Contains("train"), DataError);
}

TEST_CASE("recommend ranks candidates and reports section weights") {
  ts::TempDir dir;
  write_planted(dir, 503);
  const RunConfig config = tiny_config(dir, "run");
  cmd_ingest(config);
  cmd_split(config);
  cmd_embed(config);
  cmd_train(config);

  RecommendOptions options;
  options.query_id = "p00005";
  options.top_k = 5;
  options.as_json = true;
  std::ostringstream out;
  cmd_recommend(config, options, out);
  const nlohmann::json result = nlohmann::json::parse(out.str());
  CHECK(result.at("results").size() == 5);
  double weight_sum = 0.0;
  for (const auto& w : result.at("section_weights")) weight_sum += w.get<double>();
  CHECK(weight_sum == doctest::Approx(1.0).epsilon(1e-9));

  SUBCASE("k larger than the candidate count returns everything") {
    options.top_k = 100000;
    std::ostringstream all;
    cmd_recommend(config, options, all);
    const nlohmann::json everything = nlohmann::json::parse(all.str());
    CHECK(everything.at("results").size() == 99);  // corpus minus the query
  }

  SUBCASE("unknown ids list nearest known ids") {
    options.query_id = "p00999";
    std::ostringstream unused;
    CHECK_THROWS_WITH_AS(cmd_recommend(config, options, unused),
                         doctest::Contains("nearest known ids"), DataError);
  }

  SUBCASE("ad-hoc json queries work without corpus membership") {
    options.query_id.clear();
    options.query_json =
        R"({"title":"A study of ranking","abstract":"We propose a ranking approach based on attention. Experimental results show recall improves."})";
    options.top_k = 3;
    std::ostringstream adhoc;
    cmd_recommend(config, options, adhoc);
    const nlohmann::json result2 = nlohmann::json::parse(adhoc.str());
    CHECK(result2.at("results").size() == 3);
    CHECK(result2.at("query_id").get<std::string>() == "(ad-hoc query)");
  }

  SUBCASE("text output prints the weights line") {
    options.as_json = false;
    std::ostringstream text;
    cmd_recommend(config, options, text);
    CHECK(text.str().find("section weights:") != std::string::npos);
  }
}

TEST_CASE("the output directory lock rejects concurrent commands") {
  ts::TempDir dir;
  write_planted(dir, 504);
  const RunConfig config = tiny_config(dir, "run");
  cmd_ingest(config);

  const OutputPaths paths{config.output_dir};
  { std::ofstream lock(paths.lock()); }
  CHECK_THROWS_WITH_AS(cmd_split(config), doctest::Contains("locked"), DataError);
  std::filesystem::remove(paths.lock());
  cmd_split(config);
}

TEST_CASE("config defaults pin the published hyperparameters") {
  const RunConfig config = config_from_json(nlohmann::json::object());
  CHECK(config.model.alpha == 0.3);
  CHECK(config.model.heads == 4);
  CHECK(config.model.dimension == 768);
  CHECK(config.training.margin == 1.0);
  CHECK(config.training.epochs == 4);
  CHECK(config.training.batch_size == 3);
  CHECK(config.training.learning_rate == 5e-5);
  CHECK(config.training.weight_decay == 1e-4);
  CHECK(config.split.random_negatives_per_query == 11);
  CHECK(config.split.eval_negatives == 100);
}

TEST_CASE("config overrides, env fallback, and validation") {
  ts::TempDir dir;
  {
    std::ofstream out(dir.file("config.json"));
    out << R"({"provider":{"dimension":32},"model":{"dimension":32},"output_dir":"from-config"})";
  }

  SUBCASE("--set overrides nested keys and --seed wins") {
    ConfigOverrides overrides;
    overrides.sets = {"model.alpha=0.5", "training.epochs=1", "classifier=heuristic"};
    overrides.has_seed = true;
    overrides.seed = 99;
    const RunConfig config = load_config(dir.file("config.json"), overrides);
    CHECK(config.model.alpha == 0.5);
    CHECK(config.training.epochs == 1);
    CHECK(config.seed == 99);
    CHECK(config.training.seed == 99);
    CHECK(config.output_dir == "from-config");
  }

  SUBCASE("flag beats environment beats config") {
    ::setenv("SECTRA_DATA_DIR", "from-env", 1);
    ConfigOverrides overrides;
    const RunConfig env_config = load_config(dir.file("config.json"), overrides);
    CHECK(env_config.output_dir == "from-env");

    overrides.output_dir = "from-flag";
    const RunConfig flag_config = load_config(dir.file("config.json"), overrides);
    CHECK(flag_config.output_dir == "from-flag");
    ::unsetenv("SECTRA_DATA_DIR");
  }

  SUBCASE("invalid alpha is a usage error") {
    ConfigOverrides overrides;
    overrides.sets = {"model.alpha=1.5"};
    CHECK_THROWS_AS(load_config(dir.file("config.json"), overrides), UsageError);
  }

  SUBCASE("unknown keys are rejected") {
    ConfigOverrides overrides;
    overrides.sets = {"modle.alpha=0.5"};
    CHECK_THROWS_WITH_AS(load_config(dir.file("config.json"), overrides),
                         doctest::Contains("modle"), UsageError);
  }

  SUBCASE("mismatched provider and model dimensions are rejected") {
    ConfigOverrides overrides;
    overrides.sets = {"provider.dimension=64"};
    CHECK_THROWS_AS(load_config(dir.file("config.json"), overrides), UsageError);
  }
}
