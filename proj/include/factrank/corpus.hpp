#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "factrank/text.hpp"

namespace factrank {

/// One tablestore row.
struct Fact {
  std::string id;
  std::string table;  // upper-cased file stem, e.g. KINDOF
  std::string text;
  ProcessedText processed;

  bool operator==(const Fact&) const = default;
};

/// The fixed fact collection every QA instance is ranked against. Facts keep
/// load order; ids are unique.
class Tablestore {
 public:
  Tablestore() = default;
  /// Throws factrank::Error on an empty collection, duplicate ids or empty text.
  explicit Tablestore(std::vector<Fact> facts);

  std::size_t size() const { return facts_.size(); }
  const std::vector<Fact>& facts() const { return facts_; }
  const Fact& operator[](std::size_t i) const { return facts_[i]; }

  /// Position of `id` in facts(), or nullopt.
  std::optional<std::size_t> find(std::string_view id) const;
  const Fact& at(std::string_view id) const;

  /// Distinct table names in first-seen order.
  std::vector<std::string> tables() const;

  /// Fills Fact::processed for every fact.
  void process(const TextProcessor& processor);

  bool operator==(const Tablestore& other) const { return facts_ == other.facts_; }

 private:
  std::vector<Fact> facts_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

enum class Role { kCentral, kGrounding, kLexicalGlue };

std::string_view role_token(Role role);
std::optional<Role> parse_role(std::string_view token);

struct GoldEntry {
  std::string fact_id;
  Role role = Role::kCentral;

  bool operator==(const GoldEntry&) const = default;
};

/// Annotated explanation in logical order.
struct GoldExplanation {
  static constexpr std::size_t kMaxLength = 21;

  std::vector<GoldEntry> entries;

  std::size_t size() const { return entries.size(); }
  std::vector<std::string> fact_ids() const;

  bool operator==(const GoldExplanation&) const = default;
};

struct QaInstance {
  std::string id;
  std::string question;
  std::string answer;
  std::vector<std::string> distractors;
  std::optional<GoldExplanation> gold;

  ProcessedText processed_question;
  ProcessedText processed_answer;
  std::vector<ProcessedText> processed_distractors;

  void process(const TextProcessor& processor);

  bool operator==(const QaInstance&) const = default;
};

struct SplitSet {
  std::vector<QaInstance> train;
  std::vector<QaInstance> dev;
  std::vector<QaInstance> test;

  /// Throws factrank::Error if any qa id appears in more than one split.
  void check_disjoint() const;
};

struct TableLoadOptions {
  /// Header of the id column, compared after dropping a bracketed prefix
  /// such as "[SKIP] ", case-insensitively.
  std::string id_column = "UID";
  /// Per-file override (keyed by upper-cased stem) naming the content columns
  /// explicitly. Files without an override use every non-bracketed column.
  std::map<std::string, std::vector<std::string>> content_columns;
};

/// Loads every *.tsv file of `dir` in filename order.
Tablestore load_tablestore(const std::filesystem::path& dir, const TableLoadOptions& options = {});

/// Writes one two-column file per table; load_tablestore reads it back to an
/// equal store (modulo processed text).
void write_tablestore(const Tablestore& store, const std::filesystem::path& dir);

/// Split rows: qa_id, question, answer, ';'-separated choices, space-separated
/// fact_id|ROLE gold entries. A header line starting with "qa_id" is skipped.
std::vector<QaInstance> load_split(const std::filesystem::path& path, const Tablestore& store);
std::string format_split(const std::vector<QaInstance>& instances);

struct CorpusStats {
  std::size_t qa_pairs = 0;
  std::size_t skipped_without_gold = 0;
  std::size_t gold_facts = 0;
  double facts_per_qa = 0.0;
  std::map<Role, std::size_t> facts_by_role;
  std::map<Role, double> facts_per_qa_by_role;
  std::map<std::size_t, std::size_t> length_histogram;
  /// Percentage of gold fact occurrences drawn from each table, sorted
  /// descending by share (ties by name).
  std::vector<std::pair<std::string, double>> table_shares;
};

/// Statistics over instances that carry gold. Throws factrank::Error when
/// none do.
CorpusStats corpus_stats(const std::vector<QaInstance>& instances, const Tablestore& store);

std::string format_stats(const CorpusStats& stats);

}  // namespace factrank
