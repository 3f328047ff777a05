#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "factrank/corpus.hpp"
#include "factrank/features.hpp"
#include "factrank/ranking.hpp"
#include "factrank/rng.hpp"

namespace factrank {

/// Graded relevance per tablestore position: the n gold facts get n+1 down
/// to 2 in gold order, every other fact 1.
struct RankTargets {
  std::vector<std::uint32_t> targets;

  std::uint32_t operator[](std::size_t fact) const { return targets[fact]; }
  std::size_t size() const { return targets.size(); }
};

/// Throws factrank::Error if a gold id does not resolve or repeats.
RankTargets assign_rank_targets(const GoldExplanation& gold, const Tablestore& store);

/// Exactly `count` distinct non-gold store positions, drawn without
/// replacement from the substream "negatives/<qa_id>" of `seed`, returned in
/// ascending order. A smaller count draws a subset of a larger one.
/// Throws std::invalid_argument if count exceeds the non-gold facts.
std::vector<std::size_t> sample_negatives(const QaInstance& qa, const Tablestore& store,
                                          std::size_t count, std::uint64_t seed);

enum class TrainMode : std::uint8_t { kPointwise = 0, kPairwise = 1 };

std::string_view mode_name(TrainMode mode);
TrainMode parse_mode(std::string_view name);

struct TrainConfig {
  TrainMode mode = TrainMode::kPointwise;
  double C = 1.0;
  double epsilon = 0.1;  // pointwise only
  std::size_t negatives = 1000;
  std::uint64_t seed = 0;
  std::size_t max_epochs = 1000;
  /// Stop when the primal objective drops by less than this fraction over an epoch.
  double tolerance = 1e-6;
  /// Stop when the largest projected-gradient violation falls below this.
  double violation_tolerance = 1e-4;
  std::size_t pair_cap = 50000;

  /// Throws std::invalid_argument for out-of-range values.
  void validate() const;
  std::string canonical() const;
  std::uint64_t digest() const;
};

/// Shared by both learners: score = w . x + b. Pairwise models keep b = 0.
struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  TrainMode mode = TrainMode::kPointwise;
  std::uint64_t config_digest = 0;
  /// Objective of the returned iterate after each epoch; non-increasing.
  std::vector<double> objective_history;
  std::size_t epochs = 0;

  double score(const FeatureVector& x) const;

  /// Magic "FRMODEL1", u32 version, u64 dimension, u8 mode, u64 config
  /// digest, then dimension f64 weights and the f64 bias, little-endian.
  void save(const std::filesystem::path& path) const;
  static LinearModel load(const std::filesystem::path& path);
};

/// One query's candidates with their targets.
struct QueryGroup {
  std::string qa_id;
  std::vector<FeatureVector> vectors;
  std::vector<double> targets;
};

/// Candidate pair (first, second) within a group; label = sign(t_first - t_second).
struct PairIndex {
  std::uint32_t first = 0;
  std::uint32_t second = 0;
  int label = 1;

  bool operator==(const PairIndex&) const = default;
};

/// One pair per unordered candidate pair with unequal targets, orientation
/// chosen by `rng`; more than `cap` pairs are uniformly subsampled to `cap`.
std::vector<PairIndex> make_pair_indices(std::span<const double> targets, std::size_t cap,
                                         Rng& rng);

struct LabeledDifference {
  FeatureVector difference;  // x_first - x_second
  int label = 1;
};

/// make_pair_indices with the substream "pairs/<qa_id>", materialized.
std::vector<LabeledDifference> make_pairs(const QueryGroup& group, std::size_t cap,
                                          std::uint64_t seed);

// Primal objectives. The pointwise bias enters the regularizer as b^2 / 2.

double svr_objective(std::span<const double> w, double b, std::span<const FeatureVector> x,
                     std::span<const double> y, double C, double epsilon);
void svr_subgradient(std::span<const double> w, double b, std::span<const FeatureVector> x,
                     std::span<const double> y, double C, double epsilon,
                     std::span<double> grad_w, double& grad_b);

double ranking_objective(std::span<const double> w, std::span<const LabeledDifference> pairs,
                         double C);
void ranking_subgradient(std::span<const double> w, std::span<const LabeledDifference> pairs,
                         double C, std::span<double> grad_w);

/// L1-loss epsilon-SVR on raw targets, solved by dual coordinate descent.
/// Throws factrank::Error on a non-finite objective.
LinearModel train_pointwise(std::span<const QueryGroup> groups, std::size_t dim,
                            const TrainConfig& config);

/// Hinge loss over within-query difference vectors, no bias term.
LinearModel train_pairwise(std::span<const QueryGroup> groups, std::size_t dim,
                           const TrainConfig& config);
/// Same solver on explicit difference vectors.
LinearModel train_pairwise(std::span<const LabeledDifference> pairs, std::size_t dim,
                           const TrainConfig& config);

LinearModel train(std::span<const QueryGroup> groups, std::size_t dim, const TrainConfig& config);

/// Scores every fact (vectors[i] belongs to store position i) and sorts.
/// Throws std::invalid_argument on a size or dimension mismatch.
RankedExplanation rank_tablestore(const LinearModel& model, std::string_view qa_id,
                                  std::span<const FeatureVector> vectors, const Tablestore& store);

struct TuneGrid {
  std::vector<double> C;
  std::vector<std::size_t> negatives;
};

struct TunePoint {
  double C = 0.0;
  std::size_t negatives = 0;
  double dev_map = 0.0;
};

struct TuneResult {
  TrainConfig best;
  double best_map = 0.0;
  std::vector<TunePoint> table;
};

/// Evaluates every grid point with `dev_map` and keeps the best; ties go to
/// the smaller C, then the smaller negative count. Throws std::invalid_argument
/// on an empty grid.
TuneResult tune(const TuneGrid& grid, const TrainConfig& base,
                const std::function<double(const TrainConfig&)>& dev_map);

}  // namespace factrank
