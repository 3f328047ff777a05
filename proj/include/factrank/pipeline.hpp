#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "factrank/corpus.hpp"
#include "factrank/eval.hpp"
#include "factrank/features.hpp"
#include "factrank/learner.hpp"
#include "factrank/resources.hpp"
#include "factrank/tfidf.hpp"

namespace factrank {

namespace fs = std::filesystem;

struct RunPaths {
  fs::path tablestore;
  fs::path train;
  fs::path dev;
  fs::path test;
  fs::path concepts;
  fs::path triples;
  fs::path embeddings;
  fs::path lexicon;    // optional; shipped table otherwise
  fs::path stopwords;  // optional
  fs::path verbs;      // optional
  fs::path out = "out";
};

/// Everything one experiment run needs. Relative paths in the JSON file are
/// resolved against the file's directory.
struct RunConfig {
  std::uint64_t seed = 0;
  RunPaths paths;
  TableLoadOptions tables;
  FeatureConfig features;
  std::size_t iterated_depth = 0;  // 0: the whole store
  TrainConfig train;
  TrainConfig pointwise;  // learner settings used by ablate
  TrainConfig pairwise;
  TuneGrid tune_grid;
  std::string eval_split = "dev";
  std::vector<std::size_t> k_grid = default_k_grid();
  AblationSpec ablation;

  /// `overrides` are dotted-path assignments such as "train.C=0.8" applied to
  /// the JSON before parsing. Throws factrank::Error on a missing seed or a
  /// malformed field.
  static RunConfig load(const fs::path& path, const std::vector<std::string>& overrides = {});
  static RunConfig from_json_text(std::string_view text, const fs::path& base_dir,
                                  const std::vector<std::string>& overrides = {});

  /// Every referenced input path must exist; resource paths only when their
  /// group is enabled. Throws factrank::Error naming the first missing path.
  void validate() const;

  fs::path split_path(std::string_view split) const;
};

struct Corpus {
  Tablestore store;
  SplitSet splits;

  const std::vector<QaInstance>& split(std::string_view name) const;
};

/// Loads and processes the raw corpus named by `config`.
Corpus load_corpus(const RunConfig& config);
TextProcessor make_processor(const RunConfig& config);

/// Versioned binary bundle: magic "FRCORPUS", u32 version, then tablestore
/// and splits with processed text.
void write_bundle(const fs::path& path, const Corpus& corpus);
Corpus read_bundle(const fs::path& path);

/// Output layout under RunConfig::paths.out.
struct Artifacts {
  fs::path root;

  fs::path bundle() const { return root / "corpus.bin"; }
  fs::path stats() const { return root / "corpus_stats.txt"; }
  fs::path tfidf_ranks(std::string_view split) const;
  fs::path model() const { return root / "model.bin"; }
  fs::path space() const { return root / "feature_space.tsv"; }
  fs::path train_meta() const { return root / "model.meta.json"; }
  fs::path predictions(std::string_view system, std::string_view split) const;
  fs::path eval_json(std::string_view system, std::string_view split) const;
  fs::path eval_curves(std::string_view system, std::string_view split) const;
  fs::path eval_by_length(std::string_view system, std::string_view split) const;
  fs::path tune_table() const { return root / "tune" / "grid.tsv"; }
  fs::path tune_best() const { return root / "tune" / "best_config.json"; }
  fs::path ablation() const { return root / "ablation.csv"; }
  fs::path report_dir() const { return root / "report"; }
};

/// Systems `predict` and `evaluate` accept.
inline constexpr std::string_view kSystems[] = {"model", "tfidf-baseline", "tfidf-optimized",
                                                "tfidf-iterated"};

/// Reference rankings for a split.
std::vector<RankedExplanation> tfidf_rankings(const Corpus& corpus, std::string_view split,
                                              std::string_view system, std::size_t depth);

/// Resources loaded for the enabled feature groups.
struct ResourceSet {
  std::unique_ptr<ConceptResource> concepts;
  std::unique_ptr<TripleResource> triples;
  std::unique_ptr<EmbeddingResource> embeddings;
  WordList verbs;
  std::map<std::string, RankTable, std::less<>> ranks;  // by split
};

ResourceSet load_resources(const RunConfig& config, const Corpus& corpus, const Artifacts& out);

struct TrainedSystem {
  FeatureSpace space;
  LinearModel model;
  CoverageReport coverage;
};

/// Feature building, training and full-store prediction over one corpus.
class Experiment {
 public:
  Experiment(const RunConfig& config, const Corpus& corpus, const ResourceSet& resources);

  TrainedSystem train(GroupSet groups, const TrainConfig& config) const;
  std::vector<RankedExplanation> predict(const TrainedSystem& system, std::string_view split,
                                         GroupSet groups) const;
  /// mAP of predict() on a split with gold; NaN when it has none.
  double split_map(const TrainedSystem& system, std::string_view split, GroupSet groups) const;

 private:
  FeatureResources feature_resources(std::string_view split) const;

  const RunConfig& config_;
  const Corpus& corpus_;
  const ResourceSet& resources_;
};

// CLI stages. Each returns normally only when every declared output has been
// written; missing prerequisites raise factrank::Error naming the artifact.

CorpusStats run_ingest(const RunConfig& config);
void run_train(const RunConfig& config);
void run_predict(const RunConfig& config, std::string_view system, std::string_view split);
EvalReport run_evaluate(const RunConfig& config, std::string_view system, std::string_view split);
TuneResult run_tune(const RunConfig& config);
std::vector<AblationRow> run_ablate(const RunConfig& config);
void run_report(const RunConfig& config);

}  // namespace factrank
