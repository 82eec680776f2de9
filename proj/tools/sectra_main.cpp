#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sectra/errors.hpp"
#include "sectra/pipeline.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

void print_error(int exit_code, const std::string& message) {
  nlohmann::ordered_json line;
  line["error"] = {{"exit_code", exit_code}, {"message", message}};
  std::cerr << line.dump() << std::endl;
}

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string output_dir;
  std::uint64_t seed = 0;
  bool has_seed = false;
};

void add_common_options(CLI::App* command, CommonArgs& args) {
  command->add_option("--config", args.config_path, "JSON run configuration")
      ->required()
      ->check(CLI::ExistingFile);
  command->add_option("--set", args.sets, "Override a config key, e.g. --set model.alpha=0.5");
  command->add_option("--output-dir", args.output_dir,
                      "Output directory (beats SECTRA_DATA_DIR and the config)");
  command
      ->add_option("--seed", args.seed, "Override the run seed")
      ->each([&args](const std::string&) { args.has_seed = true; });
}

sectra::RunConfig resolve_config(const CommonArgs& args) {
  sectra::ConfigOverrides overrides;
  overrides.sets = args.sets;
  overrides.has_seed = args.has_seed;
  overrides.seed = args.seed;
  overrides.output_dir = args.output_dir;
  return sectra::load_config(args.config_path, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sectra: section-weighted query-by-example paper recommendation"};
  app.require_subcommand(1);

  CommonArgs args;
  sectra::RecommendOptions recommend_options;

  CLI::App* ingest = app.add_subcommand("ingest", "Parse and validate a corpus");
  CLI::App* split = app.add_subcommand("split", "Build train/validation/test datasets");
  CLI::App* embed = app.add_subcommand("embed", "Precompute the embedding store");
  CLI::App* train = app.add_subcommand("train", "Train the attention and MLP parameters");
  CLI::App* eval = app.add_subcommand("eval", "Compute ranking metrics on the test cases");
  CLI::App* ablate = app.add_subcommand("ablate", "Run the component ablation table");
  CLI::App* alpha_sweep = app.add_subcommand("alpha-sweep", "Sweep the section/abstract weight");
  CLI::App* repr_study =
      app.add_subcommand("repr-study", "Compare loss/ranking representation choices");
  CLI::App* recommend = app.add_subcommand("recommend", "Rank candidates for a query paper");

  for (CLI::App* command :
       {ingest, split, embed, train, eval, ablate, alpha_sweep, repr_study, recommend}) {
    add_common_options(command, args);
  }
  recommend->add_option("--query-id", recommend_options.query_id, "Query paper id");
  recommend->add_option("--query-json", recommend_options.query_json,
                        "Ad-hoc query as JSON {\"title\", \"abstract\"}");
  recommend->add_option("-k,--top-k", recommend_options.top_k, "Number of recommendations");
  recommend->add_flag("--json", recommend_options.as_json, "Emit machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    print_error(kExitUsage, e.what());
    return kExitUsage;
  }

  try {
    const sectra::RunConfig config = resolve_config(args);
    if (app.got_subcommand(ingest)) {
      sectra::cmd_ingest(config);
    } else if (app.got_subcommand(split)) {
      sectra::cmd_split(config);
    } else if (app.got_subcommand(embed)) {
      sectra::cmd_embed(config);
    } else if (app.got_subcommand(train)) {
      sectra::cmd_train(config);
    } else if (app.got_subcommand(eval)) {
      sectra::cmd_eval(config);
    } else if (app.got_subcommand(ablate)) {
      sectra::cmd_ablate(config);
    } else if (app.got_subcommand(alpha_sweep)) {
      sectra::cmd_alpha_sweep(config);
    } else if (app.got_subcommand(repr_study)) {
      sectra::cmd_repr_study(config);
    } else if (app.got_subcommand(recommend)) {
      sectra::cmd_recommend(config, recommend_options, std::cout);
    }
  } catch (const sectra::UsageError& e) {
    print_error(kExitUsage, e.what());
    return kExitUsage;
  } catch (const sectra::DataError& e) {
    print_error(kExitData, e.what());
    return kExitData;
  } catch (const sectra::NumericError& e) {
    print_error(kExitNumeric, e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    print_error(kExitData, e.what());
    return kExitData;
  }
  return 0;
}
