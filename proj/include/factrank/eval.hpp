#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "factrank/corpus.hpp"
#include "factrank/features.hpp"
#include "factrank/ranking.hpp"

namespace factrank {

/// (1/|gold|) * sum over gold positions p of (gold hits at or above p) / p.
/// Gold ids missing from the ranking count as misses.
/// Throws std::invalid_argument on empty gold.
double average_precision(std::span<const std::string> ranked, std::span<const std::string> gold);

/// Unweighted mean; 0 for an empty input.
double mean_ap(std::span<const double> aps);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t hits = 0;
};

/// Hits are positions i <= min(k, |gold|) with ranked[i] == gold[i].
PrecisionRecall pr_at_k_exact(std::span<const std::string> ranked,
                              std::span<const std::string> gold, std::size_t k);

/// Hits are gold facts anywhere in the top k.
PrecisionRecall pr_at_k_set(std::span<const std::string> ranked,
                            std::span<const std::string> gold, std::size_t k);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t df = 0;
};

/// Paired two-sided t-test on per-instance scores. Identical inputs (all
/// differences zero) throw std::invalid_argument("zero variance"); a constant
/// nonzero shift yields t = +/-inf and p = 0.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// P(|T| > |t|) for Student's t with `df` degrees of freedom, through the
/// regularized incomplete beta function.
double student_t_two_sided_p(double t, double df);
double regularized_incomplete_beta(double a, double b, double x);

double kendall_tau(std::span<const double> a, std::span<const double> b);

std::vector<std::size_t> default_k_grid();  // 2, 4, ..., 50

struct CurvePoint {
  std::size_t k = 0;
  double precision = 0.0;
  double recall = 0.0;
};

struct EvalReport {
  std::string system;
  std::vector<std::string> qa_ids;
  std::vector<double> ap;
  std::vector<std::size_t> gold_lengths;
  double map = 0.0;
  std::vector<CurvePoint> exact_curve;
  std::vector<CurvePoint> set_curve;
  std::map<std::size_t, double> map_by_length;

  std::string to_json() const;
  std::string curves_csv() const;
  std::string by_length_csv() const;
};

/// Scores `rankings` against the gold of `instances` (matched by qa id).
/// Instances without gold are skipped; a ranking for an unknown qa id or a
/// gold instance with no ranking throws factrank::Error.
EvalReport evaluate(const std::vector<RankedExplanation>& rankings,
                    const std::vector<QaInstance>& instances, const Tablestore& store,
                    const std::vector<std::size_t>& k_grid = default_k_grid(),
                    std::string system = "");

/// mAP per gold-length bucket.
std::map<std::size_t, double> map_by_length(std::span<const double> aps,
                                            std::span<const std::size_t> gold_lengths);

struct AblationRow {
  GroupSet groups;
  std::string learner;
  double dev_map = 0.0;
  double test_map = 0.0;  // NaN when the test split has no gold
};

struct AblationSpec {
  FeatureGroup base = FeatureGroup::kLex;
  std::vector<FeatureGroup> addons;
  std::vector<std::string> learners;
};

/// Runs base alone, then base + each addon, for each learner. `run` returns
/// (dev mAP, test mAP) for one configuration.
std::vector<AblationRow> ablation_run(
    const AblationSpec& spec,
    const std::function<std::pair<double, double>(const GroupSet&, const std::string&)>& run);

std::string format_ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace factrank
