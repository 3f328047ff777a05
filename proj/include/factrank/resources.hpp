#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace factrank {

/// Concept-graph lookups: ordered conceptualizations (most precise first)
/// and relation-tagged facts such as "IsA_beverage" per term.
///
/// File rows are either `term<TAB>rank<TAB>concept` with an integer rank, or
/// `term<TAB>REL<TAB>Relation_object`. Concepts keep rank order (file order
/// among equal ranks); spaces inside concepts become underscores.
class ConceptResource {
 public:
  struct Entry {
    std::vector<std::string> concepts;
    std::vector<std::string> relations;

    bool operator==(const Entry&) const = default;
  };

  static ConceptResource load(const std::filesystem::path& path);
  static ConceptResource parse(std::string_view text, std::string_view source = "<memory>");
  std::string format() const;

  void add_concept(std::string term, std::string concept_name);
  void add_relation(std::string term, std::string relation);

  const Entry* find(std::string_view term) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  bool operator==(const ConceptResource&) const = default;

 private:
  std::map<std::string, Entry, std::less<>> entries_;
};

/// Open relation triples keyed by sentence. Questions use "<qa_id>#q",
/// answers "<qa_id>#ca" and facts their fact id.
///
/// File rows: `sentence_key<TAB>subject<TAB>predicate<TAB>object`, each slot a
/// space-separated lemma list.
class TripleResource {
 public:
  struct Triple {
    std::vector<std::string> subject;
    std::vector<std::string> predicate;
    std::vector<std::string> object;

    bool operator==(const Triple&) const = default;
  };

  static std::string question_key(std::string_view qa_id);
  static std::string answer_key(std::string_view qa_id);

  static TripleResource load(const std::filesystem::path& path);
  static TripleResource parse(std::string_view text, std::string_view source = "<memory>");
  std::string format() const;

  void add(std::string key, Triple triple);
  const std::vector<Triple>* find(std::string_view key) const;
  std::size_t size() const { return entries_.size(); }

  bool operator==(const TripleResource&) const = default;

 private:
  std::map<std::string, std::vector<Triple>, std::less<>> entries_;
};

inline constexpr std::size_t kEmbeddingDim = 768;

/// Precomputed 768-d encodings keyed by (qa_id, fact_id).
///
/// Binary layout (little-endian): magic "FREMBED1", u64 record count,
/// u32 dimension (must be 768), then per record a u32 key length, the UTF-8
/// key "qa_id<TAB>fact_id", and 768 f32 values. The TSV form has rows
/// `qa_id<TAB>fact_id<TAB>v0 v1 ... v767`.
///
/// Per-segment vectors (question, answer, fact encoded separately) use the
/// keys (qa_id, "#q"), (qa_id, "#ca") and ("#f", fact_id).
class EmbeddingResource {
 public:
  static EmbeddingResource load(const std::filesystem::path& path);  // sniffs the magic
  static EmbeddingResource load_binary(const std::filesystem::path& path);
  static EmbeddingResource load_tsv(const std::filesystem::path& path);

  void write_binary(const std::filesystem::path& path) const;
  std::string format_tsv() const;

  /// Throws factrank::Error unless values.size() == kEmbeddingDim.
  void add(std::string_view qa_id, std::string_view fact_id, std::vector<float> values);
  /// nullptr when absent.
  const std::vector<float>* find(std::string_view qa_id, std::string_view fact_id) const;
  std::size_t size() const { return entries_.size(); }

  bool operator==(const EmbeddingResource&) const = default;

 private:
  static std::string key(std::string_view qa_id, std::string_view fact_id);
  std::map<std::string, std::vector<float>, std::less<>> entries_;
};

}  // namespace factrank
