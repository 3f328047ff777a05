#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "factrank/corpus.hpp"
#include "factrank/ranking.hpp"
#include "factrank/resources.hpp"
#include "factrank/text.hpp"

namespace factrank {

enum class FeatureGroup : std::uint8_t { kLex, kConcept, kOpenIe, kMultihop, kTfidfRank, kEmbed };

inline constexpr std::array<FeatureGroup, 6> kAllGroups = {
    FeatureGroup::kLex,      FeatureGroup::kConcept,   FeatureGroup::kOpenIe,
    FeatureGroup::kMultihop, FeatureGroup::kTfidfRank, FeatureGroup::kEmbed};

/// "lex", "conceptnet", "openie", "multihop", "tfidf", "embed".
std::string_view group_name(FeatureGroup group);
std::optional<FeatureGroup> parse_group(std::string_view name);

class GroupSet {
 public:
  constexpr GroupSet() = default;
  constexpr GroupSet(std::initializer_list<FeatureGroup> groups) {
    for (auto g : groups) insert(g);
  }
  static constexpr GroupSet all() {
    GroupSet s;
    for (auto g : kAllGroups) s.insert(g);
    return s;
  }

  constexpr void insert(FeatureGroup g) { bits_ |= bit(g); }
  constexpr void erase(FeatureGroup g) { bits_ &= static_cast<std::uint8_t>(~bit(g)); }
  constexpr bool contains(FeatureGroup g) const { return (bits_ & bit(g)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }

  std::string to_string() const;  // e.g. "lex+tfidf"
  bool operator==(const GroupSet&) const = default;

 private:
  static constexpr std::uint8_t bit(FeatureGroup g) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(g));
  }
  std::uint8_t bits_ = 0;
};

struct NamedFeature {
  std::string name;
  double value = 1.0;
  FeatureGroup group = FeatureGroup::kLex;
};
using NamedFeatures = std::vector<NamedFeature>;

/// Sorted (index, value) pairs; indices strictly increasing.
struct FeatureVector {
  std::vector<std::pair<std::uint32_t, float>> entries;

  std::size_t nnz() const { return entries.size(); }
  double dot(std::span<const double> weights) const;
  double squared_norm() const;
  bool operator==(const FeatureVector&) const = default;
};

/// Global name -> index map. Names are registered while open; freeze() lays
/// each group out as one contiguous block (group order, then name order) and
/// rejects further registration.
class FeatureSpace {
 public:
  void add(std::string_view name, FeatureGroup group);
  /// Reserves `count` indices named "<prefix>000".. in `group`.
  void reserve(std::string_view prefix, std::size_t count, FeatureGroup group);
  void freeze();

  bool frozen() const { return frozen_; }
  std::size_t size() const { return names_.size(); }

  /// nullopt for unknown names. Requires a frozen space.
  std::optional<std::uint32_t> index(std::string_view name) const;
  const std::string& name(std::uint32_t index) const { return names_[index]; }
  FeatureGroup group(std::uint32_t index) const { return groups_[index]; }

  /// Half-open index range of a group's block.
  std::pair<std::uint32_t, std::uint32_t> block(FeatureGroup group) const;
  std::size_t group_size(FeatureGroup group) const;

  /// `index<TAB>group<TAB>name` per line.
  std::string format() const;
  static FeatureSpace parse(std::string_view text);
  std::uint64_t digest() const;

 private:
  bool frozen_ = false;
  std::vector<std::string> names_;
  std::vector<FeatureGroup> groups_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::array<std::pair<std::uint32_t, std::uint32_t>, kAllGroups.size()> blocks_{};
};

// Individual providers. Each is a pure function of its inputs.

/// Content lemmas of q/ca/f, shared lemmas (q&f, ca&f, q&ca&f), affixes and
/// shared affixes, and the fact's table.
NamedFeatures extract_lexical(const ProcessedText& q, const ProcessedText& ca,
                              const ProcessedText& f, std::string_view table);

struct CoverageCounter {
  std::atomic<std::uint64_t> lookups{0};
  std::atomic<std::uint64_t> misses{0};
};

NamedFeatures extract_concept(const ProcessedText& q, const ProcessedText& ca,
                              const ProcessedText& f, const ConceptResource& resource,
                              std::size_t cutoff = 50, CoverageCounter* coverage = nullptr);

NamedFeatures extract_openie(std::string_view q_key, std::string_view ca_key,
                             std::string_view f_key, const TripleResource& resource,
                             CoverageCounter* coverage = nullptr);

NamedFeatures extract_multihop(const ProcessedText& q, const ProcessedText& ca,
                               const ProcessedText& f, const WordList& verbs);

inline constexpr std::uint32_t kDefaultRankCeiling = 1000;

/// Throws std::invalid_argument for rank < 1.
NamedFeatures extract_tfidf_rank(std::uint32_t rank, std::uint32_t ceiling = kDefaultRankCeiling);

enum class EmbeddingMode { kTriple, kSeparate };

/// Dense values for the embedding block: 768 (triple) or 3 x 768 (separate).
/// Absent keys yield zeros and bump `coverage->misses`.
std::vector<float> extract_embedding(std::string_view qa_id, std::string_view fact_id,
                                     const EmbeddingResource& resource,
                                     EmbeddingMode mode = EmbeddingMode::kTriple,
                                     CoverageCounter* coverage = nullptr);

struct FeatureConfig {
  GroupSet groups = GroupSet::all();
  std::size_t concept_cutoff = 50;
  std::uint32_t rank_ceiling = kDefaultRankCeiling;
  EmbeddingMode embedding_mode = EmbeddingMode::kTriple;
};

/// External inputs the providers read. Null pointers disable nothing by
/// themselves; an enabled group without its resource raises at construction.
struct FeatureResources {
  const ConceptResource* concepts = nullptr;
  const TripleResource* triples = nullptr;
  const EmbeddingResource* embeddings = nullptr;
  const RankTable* tfidf_ranks = nullptr;
  const WordList* verbs = nullptr;
};

struct CoverageReport {
  std::uint64_t concept_lookups = 0, concept_misses = 0;
  std::uint64_t openie_lookups = 0, openie_misses = 0;
  std::uint64_t embedding_lookups = 0, embedding_misses = 0;
  std::uint64_t rank_lookups = 0, rank_misses = 0;
};

/// Runs the enabled providers for (q, ca, f) triples.
class FeatureExtractor {
 public:
  FeatureExtractor(FeatureConfig config, FeatureResources resources);
  FeatureExtractor(const FeatureExtractor&) = delete;
  FeatureExtractor& operator=(const FeatureExtractor&) = delete;

  const FeatureConfig& config() const { return config_; }
  std::size_t embedding_width() const;

  /// Named (sparse) features of every enabled group except the embedding block.
  NamedFeatures named(const QaInstance& qa, const Fact& fact, std::size_t fact_index) const;

  /// Registers every name the triple produces. The space must be open.
  void observe(FeatureSpace& space, const QaInstance& qa, const Fact& fact,
               std::size_t fact_index) const;

  /// Maps the triple through a frozen space. Names unknown to the space are
  /// dropped; repeated names collapse to one entry.
  FeatureVector assemble(const QaInstance& qa, const Fact& fact, std::size_t fact_index,
                         const FeatureSpace& space) const;

  CoverageReport coverage() const;

 private:
  FeatureConfig config_;
  FeatureResources resources_;
  mutable CoverageCounter concept_cov_, openie_cov_, embedding_cov_, rank_cov_;
};

/// One training QA instance and the tablestore positions it is paired with.
struct CandidateSet {
  const QaInstance* qa = nullptr;
  std::vector<std::size_t> facts;
};

/// Registers every name seen over the training candidates, reserves the
/// embedding block when enabled, and freezes.
FeatureSpace build_space(const FeatureExtractor& extractor, const Tablestore& store,
                         std::span<const CandidateSet> training);

}  // namespace factrank
