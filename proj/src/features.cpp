#include "factrank/features.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "factrank/error.hpp"
#include "factrank/tsv.hpp"

namespace factrank {

namespace {

using Words = std::set<std::string>;

Words as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

Words intersect(const Words& a, const Words& b) {
  Words out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}

void emit(NamedFeatures& out, FeatureGroup group, std::string_view prefix, const Words& values) {
  for (const auto& v : values) out.push_back({std::string(prefix) + v, 1.0, group});
}

void emit_bool(NamedFeatures& out, FeatureGroup group, std::string_view name, bool value) {
  out.push_back({std::string(name) + (value ? "=true" : "=false"), 1.0, group});
}

Words affix_set(const Words& lemmas) {
  Words out;
  for (const auto& l : lemmas) out.merge(affixes(l));
  return out;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string padded(std::string_view prefix, std::size_t i, std::size_t count) {
  int width = 3;
  for (std::size_t n = count > 0 ? count - 1 : 0; n >= 1000; n /= 10) ++width;
  auto digits = std::to_string(i);
  if (digits.size() < static_cast<std::size_t>(width)) digits.insert(0, width - digits.size(), '0');
  return std::string(prefix) + digits;
}

constexpr std::string_view kEmbedPrefix = "embed:";

}  // namespace

std::string_view group_name(FeatureGroup group) {
  switch (group) {
    case FeatureGroup::kLex: return "lex";
    case FeatureGroup::kConcept: return "conceptnet";
    case FeatureGroup::kOpenIe: return "openie";
    case FeatureGroup::kMultihop: return "multihop";
    case FeatureGroup::kTfidfRank: return "tfidf";
    case FeatureGroup::kEmbed: return "embed";
  }
  return "?";
}

std::optional<FeatureGroup> parse_group(std::string_view name) {
  for (auto g : kAllGroups) {
    if (group_name(g) == name) return g;
  }
  return std::nullopt;
}

std::string GroupSet::to_string() const {
  std::string out;
  for (auto g : kAllGroups) {
    if (!contains(g)) continue;
    if (!out.empty()) out += '+';
    out += group_name(g);
  }
  return out.empty() ? "none" : out;
}

double FeatureVector::dot(std::span<const double> weights) const {
  double s = 0.0;
  for (const auto& [i, v] : entries) s += static_cast<double>(v) * weights[i];
  return s;
}

double FeatureVector::squared_norm() const {
  double s = 0.0;
  for (const auto& [i, v] : entries) s += static_cast<double>(v) * v;
  return s;
}

// ------------------------------------------------------------ feature space

void FeatureSpace::add(std::string_view name, FeatureGroup group) {
  if (frozen_) throw std::logic_error("FeatureSpace::add on a frozen space");
  auto it = index_.find(std::string(name));
  if (it != index_.end()) {
    if (groups_[it->second] != group) {
      throw std::logic_error("feature '" + std::string(name) + "' registered in two groups");
    }
    return;
  }
  index_.emplace(std::string(name), static_cast<std::uint32_t>(names_.size()));
  names_.emplace_back(name);
  groups_.push_back(group);
}

void FeatureSpace::reserve(std::string_view prefix, std::size_t count, FeatureGroup group) {
  for (std::size_t i = 0; i < count; ++i) add(padded(prefix, i, count), group);
}

void FeatureSpace::freeze() {
  if (frozen_) return;
  std::vector<std::uint32_t> order(names_.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (groups_[a] != groups_[b]) return groups_[a] < groups_[b];
    return names_[a] < names_[b];
  });
  std::vector<std::string> names;
  std::vector<FeatureGroup> groups;
  names.reserve(order.size());
  groups.reserve(order.size());
  for (auto i : order) {
    names.push_back(std::move(names_[i]));
    groups.push_back(groups_[i]);
  }
  names_ = std::move(names);
  groups_ = std::move(groups);
  index_.clear();
  blocks_.fill({0, 0});
  for (std::uint32_t i = 0; i < names_.size(); ++i) {
    index_.emplace(names_[i], i);
  }
  std::uint32_t pos = 0;
  for (auto g : kAllGroups) {
    const auto begin = pos;
    while (pos < groups_.size() && groups_[pos] == g) ++pos;
    blocks_[static_cast<std::size_t>(g)] = {begin, pos};
  }
  frozen_ = true;
}

std::optional<std::uint32_t> FeatureSpace::index(std::string_view name) const {
  if (!frozen_) throw std::logic_error("FeatureSpace::index on an open space");
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::pair<std::uint32_t, std::uint32_t> FeatureSpace::block(FeatureGroup group) const {
  if (!frozen_) throw std::logic_error("FeatureSpace::block on an open space");
  return blocks_[static_cast<std::size_t>(group)];
}

std::size_t FeatureSpace::group_size(FeatureGroup group) const {
  const auto [b, e] = block(group);
  return e - b;
}

std::string FeatureSpace::format() const {
  if (!frozen_) throw std::logic_error("FeatureSpace::format on an open space");
  std::string out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    out += std::to_string(i);
    out += '\t';
    out += group_name(groups_[i]);
    out += '\t';
    out += names_[i];
    out += '\n';
  }
  return out;
}

FeatureSpace FeatureSpace::parse(std::string_view text) {
  FeatureSpace s;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto where = "feature space line " + std::to_string(line_no);
    // Names may contain tabs; split on the first two only.
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos) throw Error(where + ": expected index<TAB>group<TAB>name");
    std::size_t idx = 0;
    auto [p, ec] = std::from_chars(line.data(), line.data() + t1, idx);
    if (ec != std::errc() || p != line.data() + t1 || idx != s.names_.size()) {
      throw Error(where + ": indices must be dense and in order");
    }
    const auto g = parse_group(line.substr(t1 + 1, t2 - t1 - 1));
    if (!g) throw Error(where + ": unknown group");
    if (!s.groups_.empty() && *g < s.groups_.back()) {
      throw Error(where + ": groups are not contiguous");
    }
    const std::string name(line.substr(t2 + 1));
    if (!s.index_.emplace(name, static_cast<std::uint32_t>(idx)).second) {
      throw Error(where + ": duplicate name '" + name + "'");
    }
    s.names_.push_back(name);
    s.groups_.push_back(*g);
  }
  std::uint32_t pos = 0;
  for (auto g : kAllGroups) {
    const auto begin = pos;
    while (pos < s.groups_.size() && s.groups_[pos] == g) ++pos;
    s.blocks_[static_cast<std::size_t>(g)] = {begin, pos};
  }
  s.frozen_ = true;
  return s;
}

std::uint64_t FeatureSpace::digest() const { return fnv1a(format()); }

// ---------------------------------------------------------------- providers

NamedFeatures extract_lexical(const ProcessedText& q, const ProcessedText& ca,
                              const ProcessedText& f, std::string_view table) {
  constexpr auto g = FeatureGroup::kLex;
  NamedFeatures out;
  const auto lq = as_set(q.content_lemmas());
  const auto lca = as_set(ca.content_lemmas());
  const auto lf = as_set(f.content_lemmas());
  emit(out, g, "q_lemma=", lq);
  emit(out, g, "ca_lemma=", lca);
  emit(out, g, "f_lemma=", lf);
  const auto qf = intersect(lq, lf);
  emit(out, g, "shared_qf=", qf);
  emit(out, g, "shared_caf=", intersect(lca, lf));
  emit(out, g, "shared_qcaf=", intersect(qf, lca));

  const auto aq = affix_set(lq);
  const auto aca = affix_set(lca);
  const auto af = affix_set(lf);
  emit(out, g, "q_affix:", aq);
  emit(out, g, "ca_affix:", aca);
  emit(out, g, "f_affix:", af);
  const auto aqf = intersect(aq, af);
  emit(out, g, "shared_affix_qf:", aqf);
  emit(out, g, "shared_affix_caf:", intersect(aca, af));
  emit(out, g, "shared_affix_qcaf:", intersect(aqf, aca));

  out.push_back({"tabletype=" + std::string(table), 1.0, g});
  return out;
}

NamedFeatures extract_concept(const ProcessedText& q, const ProcessedText& ca,
                              const ProcessedText& f, const ConceptResource& resource,
                              std::size_t cutoff, CoverageCounter* coverage) {
  constexpr auto g = FeatureGroup::kConcept;
  NamedFeatures out;
  struct Side {
    Words lemmas;
    Words concepts;
    Words relations;
  };
  const auto side = [&](const ProcessedText& t) {
    Side s;
    s.lemmas = as_set(t.content_lemmas());
    for (const auto& l : s.lemmas) {
      if (coverage) ++coverage->lookups;
      const auto* e = resource.find(l);
      if (!e) {
        if (coverage) ++coverage->misses;
        continue;
      }
      const auto n = std::min(cutoff, e->concepts.size());
      s.concepts.insert(e->concepts.begin(), e->concepts.begin() + static_cast<std::ptrdiff_t>(n));
      s.relations.insert(e->relations.begin(), e->relations.end());
    }
    return s;
  };
  const auto sq = side(q);
  const auto sca = side(ca);
  const auto sf = side(f);
  emit(out, g, "q_concept=", sq.concepts);
  emit(out, g, "ca_concept=", sca.concepts);
  emit(out, g, "f_concept=", sf.concepts);
  emit(out, g, "q_rel=", sq.relations);
  emit(out, g, "ca_rel=", sca.relations);
  emit(out, g, "f_rel=", sf.relations);

  // A word matching another side's concept (or two shared concepts) links
  // the sides; plain lemma overlap is left to the lexical group.
  const auto expanded = [](const Side& s) {
    Words w = s.lemmas;
    w.insert(s.concepts.begin(), s.concepts.end());
    return w;
  };
  const auto eq = expanded(sq);
  const auto eca = expanded(sca);
  const auto ef = expanded(sf);
  const auto shared = [&](const Words& a, const Words& b, const Words& la, const Words& lb) {
    Words s = intersect(a, b);
    for (const auto& w : intersect(la, lb)) s.erase(w);
    return s;
  };
  emit(out, g, "shared_concept_qf=", shared(eq, ef, sq.lemmas, sf.lemmas));
  emit(out, g, "shared_concept_caf=", shared(eca, ef, sca.lemmas, sf.lemmas));
  emit(out, g, "shared_concept_qcaf=",
       shared(intersect(eq, eca), ef, intersect(sq.lemmas, sca.lemmas), sf.lemmas));
  return out;
}

NamedFeatures extract_openie(std::string_view q_key, std::string_view ca_key,
                             std::string_view f_key, const TripleResource& resource,
                             CoverageCounter* coverage) {
  constexpr auto g = FeatureGroup::kOpenIe;
  NamedFeatures out;
  struct Slots {
    Words subject, predicate, object;
  };
  const auto slots = [&](std::string_view key, std::string_view tag) {
    Slots s;
    if (coverage) ++coverage->lookups;
    const auto* triples = resource.find(key);
    if (!triples) {
      if (coverage) ++coverage->misses;
      return s;
    }
    for (const auto& t : *triples) {
      s.subject.insert(t.subject.begin(), t.subject.end());
      s.predicate.insert(t.predicate.begin(), t.predicate.end());
      s.object.insert(t.object.begin(), t.object.end());
    }
    emit(out, g, "subject_" + std::string(tag) + "=", s.subject);
    emit(out, g, "predicate_" + std::string(tag) + "=", s.predicate);
    emit(out, g, "object_" + std::string(tag) + "=", s.object);
    return s;
  };
  const auto sq = slots(q_key, "q");
  const auto sca = slots(ca_key, "ca");
  const auto sf = slots(f_key, "f");
  const auto sqf = intersect(sq.subject, sf.subject);
  emit(out, g, "shared_subject_qf=", sqf);
  emit(out, g, "shared_subject_caf=", intersect(sca.subject, sf.subject));
  emit(out, g, "shared_subject_qcaf=", intersect(sqf, sca.subject));
  const auto oqf = intersect(sq.object, sf.object);
  emit(out, g, "shared_object_qf=", oqf);
  emit(out, g, "shared_object_caf=", intersect(sca.object, sf.object));
  emit(out, g, "shared_object_qcaf=", intersect(oqf, sca.object));
  return out;
}

NamedFeatures extract_multihop(const ProcessedText& q, const ProcessedText& ca,
                               const ProcessedText& f, const WordList& verbs) {
  constexpr auto g = FeatureGroup::kMultihop;
  NamedFeatures out;
  const auto len_bin = [](std::size_t n) {
    return n >= 25 ? std::string("25+") : std::to_string((n / 5) * 5) + "-" + std::to_string((n / 5) * 5 + 4);
  };
  out.push_back({"q_len=" + len_bin(q.length()), 1.0, g});
  out.push_back({"ca_len=" + len_bin(ca.length()), 1.0, g});

  const auto verb_positions = [&](const ProcessedText& t, std::string_view tag) {
    Words found;
    for (std::size_t i = 0; i < t.length(); ++i) {
      if (!verbs.contains(t.lemmas[i])) continue;
      found.insert(t.lemmas[i]);
      const auto pos = i < 10 ? std::to_string(i) : std::string("10+");
      out.push_back({std::string(tag) + "_verb_pos=" + pos, 1.0, g});
      out.push_back(
          {std::string(tag) + "_verb_zone=" + std::string(zone_name(zone_of(i, t.length()))), 1.0, g});
    }
    return found;
  };
  const auto q_verbs = verb_positions(q, "q");
  verb_positions(ca, "ca");
  for (std::size_t j = 0; j < f.length(); ++j) {
    if (q_verbs.contains(f.lemmas[j])) {
      out.push_back(
          {"qf_verb_zone=" + std::string(zone_name(zone_of(j, f.length()))), 1.0, g});
    }
  }

  const auto fw = f.content_tokens();
  const auto fl = f.content_lemmas();
  const auto fw_set = as_set(fw);
  const auto fl_set = as_set(fl);

  if (!ca.empty() && ca.length() <= 2) {
    auto cw = ca.content_tokens();
    auto cl = ca.content_lemmas();
    if (cw.empty()) {
      cw = ca.tokens;
      cl = ca.lemmas;
    }
    const auto all_in = [](const std::vector<std::string>& xs, const Words& set) {
      return std::all_of(xs.begin(), xs.end(), [&](const auto& x) { return set.contains(x); });
    };
    emit_bool(out, g, "ca_words_in_f", all_in(cw, fw_set));
    emit_bool(out, g, "ca_lemmas_in_f", all_in(cl, fl_set));
    emit_bool(out, g, "ca_first_is_f_first", !fl.empty() && cl.front() == fl.front());
    emit_bool(out, g, "ca_last_is_f_last", !fl.empty() && cl.back() == fl.back());
  }

  const auto qw = q.content_tokens();
  const auto ql = q.content_lemmas();
  if (!ql.empty()) {
    const auto checks = [&](const std::vector<std::string>& qs, const std::vector<std::string>& fs,
                            const Words& fset, std::string_view unit) {
      const std::string u(unit);
      emit_bool(out, g, "q_last_" + u + "_in_f", fset.contains(qs.back()));
      emit_bool(out, g, "q_last_" + u + "_first_in_f", !fs.empty() && qs.back() == fs.front());
      emit_bool(out, g, "q_last_" + u + "_last_in_f", !fs.empty() && qs.back() == fs.back());
      emit_bool(out, g, "q_first_" + u + "_first_in_f", !fs.empty() && qs.front() == fs.front());
    };
    checks(ql, fl, fl_set, "lemma");
    checks(qw, fw, fw_set, "word");
  }
  return out;
}

NamedFeatures extract_tfidf_rank(std::uint32_t rank, std::uint32_t ceiling) {
  if (rank < 1) throw std::invalid_argument("extract_tfidf_rank: rank must be >= 1");
  constexpr auto g = FeatureGroup::kTfidfRank;
  NamedFeatures out;
  out.push_back({"rank=" + (rank > ceiling ? std::to_string(ceiling) + "+" : std::to_string(rank)),
                 1.0, g});
  out.push_back({"bin50=" + std::to_string((rank + 49) / 50), 1.0, g});
  out.push_back({"bin100=" + std::to_string((rank + 99) / 100), 1.0, g});
  emit_bool(out, g, "top100", rank <= 100);
  emit_bool(out, g, "top500", rank <= 500);
  emit_bool(out, g, "top1000", rank <= 1000);
  return out;
}

namespace {

// Looks up every segment the mode needs; false when any is absent.
bool lookup_embedding(std::string_view qa_id, std::string_view fact_id,
                      const EmbeddingResource& resource, EmbeddingMode mode,
                      CoverageCounter* coverage, std::vector<float>& out) {
  std::vector<const std::vector<float>*> parts;
  if (mode == EmbeddingMode::kTriple) {
    parts.push_back(resource.find(qa_id, fact_id));
  } else {
    parts.push_back(resource.find(qa_id, "#q"));
    parts.push_back(resource.find(qa_id, "#ca"));
    parts.push_back(resource.find("#f", fact_id));
  }
  if (coverage) ++coverage->lookups;
  const bool hit = std::all_of(parts.begin(), parts.end(), [](auto* p) { return p != nullptr; });
  out.assign(parts.size() * kEmbeddingDim, 0.0f);
  if (!hit) {
    if (coverage) ++coverage->misses;
    return false;
  }
  for (std::size_t i = 0; i < parts.size(); ++i) {
    std::copy(parts[i]->begin(), parts[i]->end(),
              out.begin() + static_cast<std::ptrdiff_t>(i * kEmbeddingDim));
  }
  return true;
}

}  // namespace

std::vector<float> extract_embedding(std::string_view qa_id, std::string_view fact_id,
                                     const EmbeddingResource& resource, EmbeddingMode mode,
                                     CoverageCounter* coverage) {
  std::vector<float> out;
  lookup_embedding(qa_id, fact_id, resource, mode, coverage, out);
  return out;
}

// ---------------------------------------------------------------- extractor

FeatureExtractor::FeatureExtractor(FeatureConfig config, FeatureResources resources)
    : config_(config), resources_(resources) {
  const auto need = [&](FeatureGroup g, const void* p, std::string_view what) {
    if (config_.groups.contains(g) && p == nullptr) {
      throw Error("feature group '" + std::string(group_name(g)) + "' is enabled but no " +
                  std::string(what) + " was provided");
    }
  };
  need(FeatureGroup::kConcept, resources_.concepts, "concept resource");
  need(FeatureGroup::kOpenIe, resources_.triples, "triple resource");
  need(FeatureGroup::kEmbed, resources_.embeddings, "embedding resource");
  need(FeatureGroup::kTfidfRank, resources_.tfidf_ranks, "TF-IDF ranking");
  need(FeatureGroup::kMultihop, resources_.verbs, "verb lexicon");
}

std::size_t FeatureExtractor::embedding_width() const {
  if (!config_.groups.contains(FeatureGroup::kEmbed)) return 0;
  return config_.embedding_mode == EmbeddingMode::kTriple ? kEmbeddingDim : 3 * kEmbeddingDim;
}

NamedFeatures FeatureExtractor::named(const QaInstance& qa, const Fact& fact,
                                      std::size_t fact_index) const {
  NamedFeatures out;
  const auto append = [&](NamedFeatures more) {
    out.insert(out.end(), std::make_move_iterator(more.begin()),
               std::make_move_iterator(more.end()));
  };
  const auto& q = qa.processed_question;
  const auto& ca = qa.processed_answer;
  const auto& f = fact.processed;
  const auto& groups = config_.groups;
  if (groups.contains(FeatureGroup::kLex)) append(extract_lexical(q, ca, f, fact.table));
  if (groups.contains(FeatureGroup::kConcept)) {
    append(extract_concept(q, ca, f, *resources_.concepts, config_.concept_cutoff, &concept_cov_));
  }
  if (groups.contains(FeatureGroup::kOpenIe)) {
    append(extract_openie(TripleResource::question_key(qa.id), TripleResource::answer_key(qa.id),
                          fact.id, *resources_.triples, &openie_cov_));
  }
  if (groups.contains(FeatureGroup::kMultihop)) {
    append(extract_multihop(q, ca, f, *resources_.verbs));
  }
  if (groups.contains(FeatureGroup::kTfidfRank)) {
    ++rank_cov_.lookups;
    const auto rank = resources_.tfidf_ranks->rank(qa.id, fact_index);
    if (rank == 0) {
      ++rank_cov_.misses;
    } else {
      append(extract_tfidf_rank(rank, config_.rank_ceiling));
    }
  }
  return out;
}

void FeatureExtractor::observe(FeatureSpace& space, const QaInstance& qa, const Fact& fact,
                               std::size_t fact_index) const {
  for (const auto& nf : named(qa, fact, fact_index)) space.add(nf.name, nf.group);
}

FeatureVector FeatureExtractor::assemble(const QaInstance& qa, const Fact& fact,
                                         std::size_t fact_index, const FeatureSpace& space) const {
  FeatureVector v;
  for (const auto& nf : named(qa, fact, fact_index)) {
    if (auto idx = space.index(nf.name)) v.entries.emplace_back(*idx, static_cast<float>(nf.value));
  }
  const auto width = embedding_width();
  if (width > 0) {
    const auto [begin, end] = space.block(FeatureGroup::kEmbed);
    std::vector<float> dense;
    if (end - begin == width &&
        lookup_embedding(qa.id, fact.id, *resources_.embeddings, config_.embedding_mode,
                         &embedding_cov_, dense)) {
      for (std::uint32_t i = 0; i < width; ++i) v.entries.emplace_back(begin + i, dense[i]);
    }
  }
  std::sort(v.entries.begin(), v.entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  v.entries.erase(std::unique(v.entries.begin(), v.entries.end(),
                              [](const auto& a, const auto& b) { return a.first == b.first; }),
                  v.entries.end());
  return v;
}

CoverageReport FeatureExtractor::coverage() const {
  return {concept_cov_.lookups,   concept_cov_.misses,   openie_cov_.lookups, openie_cov_.misses,
          embedding_cov_.lookups, embedding_cov_.misses, rank_cov_.lookups,   rank_cov_.misses};
}

FeatureSpace build_space(const FeatureExtractor& extractor, const Tablestore& store,
                         std::span<const CandidateSet> training) {
  FeatureSpace space;
  for (const auto& c : training) {
    for (auto f : c.facts) extractor.observe(space, *c.qa, store[f], f);
  }
  if (const auto width = extractor.embedding_width(); width > 0) {
    space.reserve(kEmbedPrefix, width, FeatureGroup::kEmbed);
  }
  space.freeze();
  return space;
}

}  // namespace factrank
