#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "factrank/corpus.hpp"

namespace factrank {

struct ScoredFact {
  std::size_t fact = 0;  // index into the tablestore
  double score = 0.0;

  bool operator==(const ScoredFact&) const = default;
};

/// The whole tablestore ordered for one QA instance.
struct RankedExplanation {
  std::string qa_id;
  std::vector<ScoredFact> entries;

  std::vector<std::string> fact_ids(const Tablestore& store) const;
  bool operator==(const RankedExplanation&) const = default;
};

/// Sorts by descending score, ties by ascending fact id.
void sort_by_score(std::vector<ScoredFact>& entries, const Tablestore& store);

/// True when `ranking` holds every store position exactly once.
bool is_permutation_of_store(const RankedExplanation& ranking, const Tablestore& store);

/// `qa_id<TAB>fact_id<TAB>rank<TAB>score`, rank 1-based, score printed with
/// 17 significant digits.
std::string format_ranking_dump(const std::vector<RankedExplanation>& rankings,
                                const Tablestore& store);
void write_ranking_dump(const std::filesystem::path& path,
                        const std::vector<RankedExplanation>& rankings, const Tablestore& store);
/// Rankings in file order of first appearance; each must be a permutation of
/// the store.
std::vector<RankedExplanation> read_ranking_dump(const std::filesystem::path& path,
                                                 const Tablestore& store);

/// 1-based rank of every fact for each QA id, as consumed by the TF-IDF rank
/// feature group.
class RankTable {
 public:
  RankTable() = default;
  RankTable(const std::vector<RankedExplanation>& rankings, std::size_t store_size);

  /// 0 when the pair is unknown.
  std::uint32_t rank(const std::string& qa_id, std::size_t fact) const;
  bool contains(const std::string& qa_id) const { return ranks_.contains(qa_id); }
  std::size_t size() const { return ranks_.size(); }

 private:
  std::map<std::string, std::vector<std::uint32_t>, std::less<>> ranks_;
};

}  // namespace factrank
