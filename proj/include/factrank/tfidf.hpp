#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "factrank/corpus.hpp"
#include "factrank/ranking.hpp"

namespace factrank {

/// Sorted (index, weight) pairs; indices strictly increasing, no zero weights.
class SparseVector {
 public:
  using Entry = std::pair<std::uint32_t, double>;

  SparseVector() = default;
  /// Accepts unsorted input with repeated indices (weights are summed).
  static SparseVector from_entries(std::vector<Entry> entries);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t nnz() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  double norm() const;
  SparseVector normalized() const;
  double dot(const SparseVector& other) const;

  bool operator==(const SparseVector&) const = default;

 private:
  std::vector<Entry> entries_;
};

/// Cosine of the angle between a and b; 0 if either is all-zero.
double cosine(const SparseVector& a, const SparseVector& b);

/// Which terms of a ProcessedText a model indexes.
enum class TermView {
  kSurface,        // every token, unlemmatized, stopwords kept
  kContentLemmas,  // lemmas of non-stopword tokens
};

std::vector<std::string> terms_of(const ProcessedText& text, TermView view);

class TfidfModel {
 public:
  /// tf = raw count, idf(t) = ln((1 + N) / (1 + df(t))) + 1, document vectors
  /// L2-normalized. Throws std::invalid_argument on an empty collection.
  static TfidfModel fit(std::span<const ProcessedText> documents,
                        TermView view = TermView::kContentLemmas);
  static TfidfModel fit(const Tablestore& store, TermView view = TermView::kContentLemmas);

  TermView view() const { return view_; }
  std::size_t num_documents() const { return doc_vectors_.size(); }
  std::size_t vocab_size() const { return idf_.size(); }

  std::optional<std::uint32_t> term_index(const std::string& term) const;
  double idf(std::uint32_t index) const { return idf_[index]; }
  const SparseVector& document(std::size_t i) const { return doc_vectors_[i]; }

  /// Unnormalized tf-idf weights of `terms`; out-of-vocabulary terms dropped.
  SparseVector weigh(std::span<const std::string> terms) const;
  /// weigh() followed by L2 normalization.
  SparseVector vectorize(std::span<const std::string> terms) const;

 private:
  TermView view_ = TermView::kContentLemmas;
  std::unordered_map<std::string, std::uint32_t> vocab_;
  std::vector<double> idf_;
  std::vector<SparseVector> doc_vectors_;
};

/// Query: question plus every answer choice. Intended for a kSurface model.
/// Without distractors it falls back to question + correct answer.
RankedExplanation rank_baseline(const QaInstance& qa, const TfidfModel& model,
                                const Tablestore& store);

/// Query: question plus correct answer.
RankedExplanation rank_optimized(const QaInstance& qa, const TfidfModel& model,
                                 const Tablestore& store);

/// Greedy query expansion: `depth` times, the best remaining fact is emitted
/// and its terms appended to the query. Facts left after `depth` rounds follow
/// in their last-round order. Scores are the cosine at the time each fact was
/// ranked. depth == 0 reduces to rank_optimized.
RankedExplanation rank_iterated(const QaInstance& qa, const TfidfModel& model,
                                const Tablestore& store, std::size_t depth);

}  // namespace factrank
