// factrank: batch driver for the explanation-ranking pipeline.

#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "factrank/pipeline.hpp"

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("factrank");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("FACTRANK_LOG")) {
    const auto parsed = spdlog::level::from_str(level);
    // from_str maps unknown names to "off"; only honour it when asked for.
    if (parsed != spdlog::level::off || std::string(level) == "off") spdlog::set_level(parsed);
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Rank tablestore facts as explanations for science QA pairs"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--seed", seed, "Override the configured seed");
  app.add_option("--out", out_dir, "Override the output directory");
  app.add_option("--set", overrides, "Override a config field, e.g. train.C=0.5")
      ->take_all()
      ->allow_extra_args(false);

  auto* ingest = app.add_subcommand("ingest", "Load, process and cache the corpus");
  auto* train = app.add_subcommand("train", "Train a model with the configured feature groups");
  auto* predict = app.add_subcommand("predict", "Rank the whole tablestore for every QA pair");
  auto* evaluate = app.add_subcommand("evaluate", "Score a prediction dump against gold");
  auto* tune = app.add_subcommand("tune", "Grid-search C and the negative count on dev");
  auto* ablate = app.add_subcommand("ablate", "Feature-group ablation table");
  auto* report = app.add_subcommand("report", "Corpus statistics and curve tables");

  std::string system = "model";
  std::string split;
  for (auto* sub : {predict, evaluate}) {
    sub->add_option("--system", system, "model|tfidf-baseline|tfidf-optimized|tfidf-iterated")
        ->check(CLI::IsMember({"model", "tfidf-baseline", "tfidf-optimized", "tfidf-iterated"}));
    sub->add_option("--split", split, "train|dev|test (default: the configured eval split)")
        ->check(CLI::IsMember({"train", "dev", "test"}));
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (seed) overrides.push_back("seed=" + std::to_string(*seed));
    if (out_dir) {
      const auto abs = std::filesystem::absolute(*out_dir).lexically_normal();
      overrides.push_back("paths.out=" + nlohmann::json(abs.string()).dump());
    }
    const auto config = factrank::RunConfig::load(config_path, overrides);
    if (split.empty()) split = config.eval_split;

    if (ingest->parsed()) {
      const auto stats = factrank::run_ingest(config);
      std::fputs(factrank::format_stats(stats).c_str(), stdout);
    } else if (train->parsed()) {
      factrank::run_train(config);
    } else if (predict->parsed()) {
      factrank::run_predict(config, system, split);
    } else if (evaluate->parsed()) {
      const auto r = factrank::run_evaluate(config, system, split);
      std::printf("%s\t%s\tmAP\t%.4f\tinstances\t%zu\n", system.c_str(), split.c_str(), r.map,
                  r.ap.size());
    } else if (tune->parsed()) {
      const auto r = factrank::run_tune(config);
      std::printf("best\tC=%g\tnegatives=%zu\tmap=%.4f\n", r.best.C, r.best.negatives, r.best_map);
    } else if (ablate->parsed()) {
      std::fputs(factrank::format_ablation_csv(factrank::run_ablate(config)).c_str(), stdout);
    } else if (report->parsed()) {
      factrank::run_report(config);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
