#include "factrank/tfidf.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace factrank {

SparseVector SparseVector::from_entries(std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.first < b.first; });
  SparseVector v;
  for (const auto& [index, weight] : entries) {
    if (!v.entries_.empty() && v.entries_.back().first == index) {
      v.entries_.back().second += weight;
    } else {
      v.entries_.emplace_back(index, weight);
    }
  }
  std::erase_if(v.entries_, [](const Entry& e) { return e.second == 0.0; });
  return v;
}

double SparseVector::norm() const {
  double s = 0.0;
  for (const auto& [i, w] : entries_) s += w * w;
  return std::sqrt(s);
}

SparseVector SparseVector::normalized() const {
  const double n = norm();
  SparseVector v = *this;
  if (n > 0.0) {
    for (auto& [i, w] : v.entries_) w /= n;
  }
  return v;
}

double SparseVector::dot(const SparseVector& other) const {
  double s = 0.0;
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  while (a != entries_.end() && b != other.entries_.end()) {
    if (a->first < b->first) {
      ++a;
    } else if (b->first < a->first) {
      ++b;
    } else {
      s += a->second * b->second;
      ++a;
      ++b;
    }
  }
  return s;
}

double cosine(const SparseVector& a, const SparseVector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), 0.0, 1.0);
}

std::vector<std::string> terms_of(const ProcessedText& text, TermView view) {
  return view == TermView::kSurface ? text.tokens : text.content_lemmas();
}

TfidfModel TfidfModel::fit(std::span<const ProcessedText> documents, TermView view) {
  if (documents.empty()) throw std::invalid_argument("TfidfModel::fit: no documents");
  TfidfModel m;
  m.view_ = view;

  std::vector<std::map<std::string, std::uint32_t>> counts(documents.size());
  std::map<std::string, std::uint32_t> df;
  for (std::size_t d = 0; d < documents.size(); ++d) {
    for (const auto& t : terms_of(documents[d], view)) ++counts[d][t];
    for (const auto& [t, c] : counts[d]) ++df[t];
  }

  const auto n = static_cast<double>(documents.size());
  m.idf_.reserve(df.size());
  for (const auto& [term, freq] : df) {
    m.vocab_.emplace(term, static_cast<std::uint32_t>(m.idf_.size()));
    m.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(freq))) + 1.0);
  }

  m.doc_vectors_.reserve(documents.size());
  for (const auto& doc : counts) {
    std::vector<SparseVector::Entry> entries;
    for (const auto& [t, c] : doc) {
      const auto idx = m.vocab_.at(t);
      entries.emplace_back(idx, static_cast<double>(c) * m.idf_[idx]);
    }
    m.doc_vectors_.push_back(SparseVector::from_entries(std::move(entries)).normalized());
  }
  return m;
}

TfidfModel TfidfModel::fit(const Tablestore& store, TermView view) {
  std::vector<ProcessedText> docs;
  docs.reserve(store.size());
  for (const auto& f : store.facts()) docs.push_back(f.processed);
  return fit(docs, view);
}

std::optional<std::uint32_t> TfidfModel::term_index(const std::string& term) const {
  auto it = vocab_.find(term);
  if (it == vocab_.end()) return std::nullopt;
  return it->second;
}

SparseVector TfidfModel::weigh(std::span<const std::string> terms) const {
  std::vector<SparseVector::Entry> entries;
  for (const auto& t : terms) {
    if (auto idx = term_index(t)) entries.emplace_back(*idx, idf_[*idx]);
  }
  return SparseVector::from_entries(std::move(entries));
}

SparseVector TfidfModel::vectorize(std::span<const std::string> terms) const {
  return weigh(terms).normalized();
}

namespace {

void check_model(const TfidfModel& model, const Tablestore& store, TermView expected,
                 const char* who) {
  if (model.num_documents() != store.size()) {
    throw std::invalid_argument(std::string(who) + ": model was fit on a different tablestore");
  }
  if (model.view() != expected) {
    throw std::invalid_argument(std::string(who) + ": model indexes the wrong term view");
  }
}

std::vector<std::string> optimized_query(const QaInstance& qa, TermView view) {
  auto terms = terms_of(qa.processed_question, view);
  auto answer = terms_of(qa.processed_answer, view);
  terms.insert(terms.end(), answer.begin(), answer.end());
  return terms;
}

RankedExplanation rank_by_query(const QaInstance& qa, const TfidfModel& model,
                                const Tablestore& store, std::span<const std::string> terms) {
  const auto query = model.vectorize(terms);
  RankedExplanation out{qa.id, {}};
  out.entries.reserve(store.size());
  for (std::size_t f = 0; f < store.size(); ++f) {
    out.entries.push_back({f, query.dot(model.document(f))});
  }
  sort_by_score(out.entries, store);
  return out;
}

}  // namespace

RankedExplanation rank_baseline(const QaInstance& qa, const TfidfModel& model,
                                const Tablestore& store) {
  check_model(model, store, TermView::kSurface, "rank_baseline");
  auto terms = terms_of(qa.processed_question, TermView::kSurface);
  const auto add = [&](const ProcessedText& t) {
    terms.insert(terms.end(), t.tokens.begin(), t.tokens.end());
  };
  add(qa.processed_answer);
  if (qa.processed_distractors.empty()) {
    spdlog::debug("rank_baseline: '{}' has no answer choices; using question + answer", qa.id);
  }
  for (const auto& d : qa.processed_distractors) add(d);
  return rank_by_query(qa, model, store, terms);
}

RankedExplanation rank_optimized(const QaInstance& qa, const TfidfModel& model,
                                 const Tablestore& store) {
  check_model(model, store, TermView::kContentLemmas, "rank_optimized");
  const auto terms = optimized_query(qa, model.view());
  return rank_by_query(qa, model, store, terms);
}

RankedExplanation rank_iterated(const QaInstance& qa, const TfidfModel& model,
                                const Tablestore& store, std::size_t depth) {
  check_model(model, store, TermView::kContentLemmas, "rank_iterated");
  if (depth > store.size()) {
    throw std::invalid_argument("rank_iterated: depth exceeds tablestore size");
  }
  if (depth == 0) return rank_optimized(qa, model, store);

  const auto n = store.size();
  // Inverted index over the normalized document vectors.
  std::vector<std::vector<std::pair<std::uint32_t, double>>> postings(model.vocab_size());
  for (std::size_t f = 0; f < n; ++f) {
    for (const auto& [t, w] : model.document(f).entries()) {
      postings[t].emplace_back(static_cast<std::uint32_t>(f), w);
    }
  }
  // Tie-break rank of each fact by id.
  std::vector<std::uint32_t> id_order(n);
  {
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    std::sort(idx.begin(), idx.end(),
              [&](std::uint32_t a, std::uint32_t b) { return store[a].id < store[b].id; });
    for (std::uint32_t r = 0; r < n; ++r) id_order[idx[r]] = r;
  }

  // Unnormalized query weights; the ranking only needs dot products with the
  // unit document vectors, the query norm turns them into cosines.
  std::vector<double> query(model.vocab_size(), 0.0);
  double query_sq = 0.0;
  std::vector<double> dot(n, 0.0);
  const auto grow = [&](std::uint32_t t, double count) {
    const double delta = count * model.idf(t);
    const double before = query[t];
    query[t] += delta;
    query_sq += query[t] * query[t] - before * before;
    for (const auto& [f, w] : postings[t]) dot[f] += delta * w;
  };
  const auto grow_terms = [&](std::span<const std::string> terms) {
    std::map<std::uint32_t, double> counts;
    for (const auto& term : terms) {
      if (auto t = model.term_index(term)) counts[*t] += 1.0;
    }
    for (const auto& [t, c] : counts) grow(t, c);
  };
  grow_terms(optimized_query(qa, model.view()));

  const auto better = [&](std::size_t a, std::size_t b) {
    if (dot[a] != dot[b]) return dot[a] > dot[b];
    return id_order[a] < id_order[b];
  };
  const auto cosine_of = [&](std::size_t f) {
    return query_sq > 0.0 ? dot[f] / std::sqrt(query_sq) : 0.0;
  };

  RankedExplanation out{qa.id, {}};
  out.entries.reserve(n);
  std::vector<std::size_t> remaining(n);
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  for (std::size_t round = 0; round < depth; ++round) {
    std::size_t best_pos = 0;
    for (std::size_t i = 1; i < remaining.size(); ++i) {
      if (better(remaining[i], remaining[best_pos])) best_pos = i;
    }
    const auto top = remaining[best_pos];
    out.entries.push_back({top, cosine_of(top)});
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best_pos));
    // The leftovers keep the order of the round that ranked them last.
    if (round + 1 < depth) grow_terms(terms_of(store[top].processed, model.view()));
  }
  std::sort(remaining.begin(), remaining.end(), better);
  for (auto f : remaining) out.entries.push_back({f, cosine_of(f)});
  return out;
}

}  // namespace factrank
