#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "factrank/error.hpp"
#include "factrank/features.hpp"
#include "factrank/tfidf.hpp"
#include "support.hpp"

using namespace factrank;

namespace {

ProcessedText proc(std::string_view s) { return testing::processor().process(s); }

std::set<std::string> names(const NamedFeatures& fs) {
  std::set<std::string> out;
  for (const auto& f : fs) out.insert(f.name);
  return out;
}

bool has(const NamedFeatures& fs, const std::string& name) { return names(fs).count(name) == 1; }

std::size_t count_prefix(const NamedFeatures& fs, std::string_view prefix) {
  return static_cast<std::size_t>(std::count_if(
      fs.begin(), fs.end(), [&](const NamedFeature& f) { return f.name.starts_with(prefix); }));
}

std::vector<float> ramp(float start) {
  std::vector<float> v(kEmbeddingDim);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = start + 0.001f * static_cast<float>(i);
  return v;
}

// A small world with every resource filled in for two QA pairs.
struct World {
  Tablestore store = testing::make_store({{"f1", "KINDOF", "a rabbit is a kind of herbivore"},
                                          {"f2", "PROPERTY", "tea contains caffeine"},
                                          {"f3", "SYNONYMY", "hot means high temperature"},
                                          {"f4", "CAUSES", "heating ice causes melting"}});
  std::vector<QaInstance> qas = {
      testing::make_qa("q1", "Which animal eats plants?", "rabbit", {"f1"}),
      testing::make_qa("q2", "What is in hot tea?", "caffeine", {"f2", "f3"})};
  ConceptResource concepts = ConceptResource::parse(
      "rabbit\t1\tanimal\nrabbit\t2\therbivore\ntea\t1\tbeverage\n"
      "tea\tREL\tIsA beverage\ntea\tREL\tHasA caffeine\nplant\t1\torganism\n");
  TripleResource triples = TripleResource::parse(
      "q1#q\tanimal\teat\tplant\nq1#ca\trabbit\tbe\tanswer\nf1\trabbit\tbe kind of\therbivore\n"
      "f2\ttea\tcontain\tcaffeine\nq2#q\ttea\tcontain\tthing\n");
  EmbeddingResource embeddings;
  RankTable ranks;
  WordList verbs = WordList::default_verbs();

  World() {
    embeddings.add("q1", "f1", ramp(0.5f));
    embeddings.add("q2", "f2", ramp(-0.25f));
    const auto model = TfidfModel::fit(store);
    std::vector<RankedExplanation> rs;
    for (const auto& qa : qas) rs.push_back(rank_optimized(qa, model, store));
    ranks = RankTable(rs, store.size());
  }

  FeatureResources resources() const {
    return {&concepts, &triples, &embeddings, &ranks, &verbs};
  }

  std::vector<CandidateSet> candidates() const {
    return {{&qas[0], {0, 1, 2, 3}}, {&qas[1], {0, 1, 2, 3}}};
  }
};

}  // namespace

TEST_CASE("lexical features") {
  const auto fs = extract_lexical(proc("granite hard"), proc("rock"), proc("granite rock"), "KINDOF");
  CHECK(has(fs, "shared_qf=granite"));
  CHECK(has(fs, "shared_caf=rock"));
  CHECK_FALSE(has(fs, "shared_qf=rock"));
  CHECK(has(fs, "q_lemma=hard"));
  CHECK(has(fs, "f_lemma=granite"));
  CHECK(count_prefix(fs, "tabletype=") == 1);
  for (const auto& f : fs) {
    CHECK(f.value == 1.0);
    CHECK(f.group == FeatureGroup::kLex);
  }
  const auto syn = extract_lexical(proc("hot"), proc("warm"), proc("hot means warm"), "SYNONYMY");
  CHECK(has(syn, "tabletype=SYNONYMY"));
  CHECK(has(syn, "shared_qcaf=warm") == false);
  CHECK(has(syn, "q_affix:pre3=hot"));
  CHECK(has(syn, "shared_affix_qf:pre3=hot"));
  CHECK(has(syn, "shared_affix_caf:suf4=warm"));
}

TEST_CASE("shared q-ca-f lemmas need all three sides") {
  const auto fs = extract_lexical(proc("rabbit fur"), proc("rabbit"), proc("rabbit has fur"), "T");
  CHECK(has(fs, "shared_qcaf=rabbit"));
  CHECK_FALSE(has(fs, "shared_qcaf=fur"));
  CHECK(has(fs, "shared_qf=fur"));
}

TEST_CASE("concept features: rabbit and tea") {
  const World w;
  const auto fs = extract_concept(proc("What eats grass?"), proc("rabbit"),
                                  proc("a rabbit is a kind of herbivore"), w.concepts);
  CHECK(has(fs, "shared_concept_caf=herbivore"));
  CHECK(has(fs, "ca_concept=animal"));
  // Plain lemma overlap stays in the lexical group.
  CHECK_FALSE(has(fs, "shared_concept_caf=rabbit"));

  const auto tea = extract_concept(proc("hot"), proc("water"), proc("tea"), w.concepts);
  CHECK(has(tea, "f_rel=IsA_beverage"));
  CHECK(has(tea, "f_rel=HasA_caffeine"));
  for (const auto& f : tea) CHECK(f.group == FeatureGroup::kConcept);
}

TEST_CASE("concept cutoff, coverage and empty resource") {
  const World w;
  const auto one = extract_concept(proc("x"), proc("rabbit"), proc("y"), w.concepts, 1);
  CHECK(has(one, "ca_concept=animal"));
  CHECK_FALSE(has(one, "ca_concept=herbivore"));

  CoverageCounter cov;
  extract_concept(proc("rabbit zebra"), proc("tea"), proc("quartz"), w.concepts, 50, &cov);
  CHECK(cov.lookups == 4);
  CHECK(cov.misses == 2);

  const ConceptResource empty;
  CHECK(extract_concept(proc("rabbit"), proc("tea"), proc("rabbit tea"), empty).empty());
}

TEST_CASE("openie features") {
  TripleResource r;
  r.add("f", {{"hardness"}, {"be", "property", "of"}, {"material"}});
  r.add("q#q", {{"hardness"}, {"measure"}, {"rock"}});
  const auto fs = extract_openie("q#q", "q#ca", "f", r);
  CHECK(has(fs, "subject_f=hardness"));
  CHECK(has(fs, "object_f=material"));
  CHECK(has(fs, "predicate_f=property"));
  CHECK(has(fs, "shared_subject_qf=hardness"));
  CHECK_FALSE(has(fs, "shared_object_qf=material"));
  CHECK(count_prefix(fs, "subject_ca=") == 0);

  CoverageCounter cov;
  const auto no_q = extract_openie("none#q", "none#ca", "f", r, &cov);
  CHECK(count_prefix(no_q, "subject_q=") == 0);
  CHECK(count_prefix(no_q, "object_q=") == 0);
  CHECK(count_prefix(no_q, "shared_") == 0);
  CHECK(cov.lookups == 3);
  CHECK(cov.misses == 2);
}

TEST_CASE("multihop: desert and low rainfall") {
  const auto& verbs = WordList::default_verbs();
  const auto fs = extract_multihop(proc("Which environment gets little rain?"), proc("low rainfall"),
                                   proc("a desert environment has low rainfall"), verbs);
  CHECK(has(fs, "ca_words_in_f=true"));
  CHECK(has(fs, "ca_lemmas_in_f=true"));
  CHECK(has(fs, "ca_last_is_f_last=true"));
  CHECK(has(fs, "ca_first_is_f_first=false"));
}

TEST_CASE("multihop: last question word opens the fact") {
  const auto& verbs = WordList::default_verbs();
  const auto fs = extract_multihop(proc("A ship uses sonar to find an object"), proc("sound"),
                                   proc("an object reflects sound waves"), verbs);
  CHECK(has(fs, "q_last_lemma_first_in_f=true"));
  CHECK(has(fs, "q_last_word_first_in_f=true"));
  CHECK(has(fs, "q_last_lemma_in_f=true"));
  CHECK(has(fs, "q_first_lemma_first_in_f=false"));
  CHECK(has(fs, "q_len=5-9"));
  CHECK(has(fs, "ca_len=0-4"));
}

TEST_CASE("multihop: ca checks only for one or two words; verb positions and zones") {
  const auto& verbs = WordList::default_verbs();
  const auto three = extract_multihop(proc("what melts ice"), proc("the warm sun"),
                                      proc("the sun melts ice"), verbs);
  CHECK(count_prefix(three, "ca_words_in_f") == 0);
  CHECK(count_prefix(three, "ca_lemmas_in_f") == 0);
  // "melts" is the second word of the question and sits in the middle of f.
  CHECK(has(three, "q_verb_pos=1"));
  CHECK(has(three, "qf_verb_zone=middle"));

  const auto long_q = proc("one two three four five six seven eight nine ten melts");
  const auto fs = extract_multihop(long_q, proc("ice"), proc("ice"), verbs);
  CHECK(has(fs, "q_verb_pos=10+"));
  CHECK(has(fs, "q_verb_zone=last"));
  CHECK(has(fs, "q_len=10-14"));
  std::string thirty;
  for (int i = 0; i < 30; ++i) thirty += "word ";
  const auto huge = extract_multihop(proc(thirty), proc("x"), proc("y"), verbs);
  CHECK(count_prefix(huge, "q_len=") == 1);
  CHECK(has(huge, "q_len=25+"));
}

TEST_CASE("tfidf rank features") {
  const auto r1 = extract_tfidf_rank(1);
  CHECK(names(r1) == std::set<std::string>{"rank=1", "bin50=1", "bin100=1", "top100=true",
                                           "top500=true", "top1000=true"});
  const auto r101 = extract_tfidf_rank(101);
  CHECK(has(r101, "bin50=3"));
  CHECK(has(r101, "bin100=2"));
  CHECK(has(r101, "top100=false"));
  CHECK(has(r101, "top500=true"));
  const auto r1500 = extract_tfidf_rank(1500);
  CHECK(has(r1500, "rank=1000+"));
  CHECK(has(r1500, "top100=false"));
  CHECK(has(r1500, "top500=false"));
  CHECK(has(r1500, "top1000=false"));
  CHECK(has(extract_tfidf_rank(1000), "rank=1000"));
  CHECK(has(extract_tfidf_rank(1000), "top1000=true"));
  CHECK_THROWS_AS(extract_tfidf_rank(0), std::invalid_argument);
  // Bins match ceil(rank / width) for every rank up to 2000.
  for (std::uint32_t r = 1; r <= 2000; ++r) {
    const auto fs = extract_tfidf_rank(r);
    const auto b50 = static_cast<std::uint32_t>(std::ceil(r / 50.0));
    const auto b100 = static_cast<std::uint32_t>(std::ceil(r / 100.0));
    CHECK(has(fs, "bin50=" + std::to_string(b50)));
    CHECK(has(fs, "bin100=" + std::to_string(b100)));
  }
}

TEST_CASE("embedding lookups") {
  const World w;
  CoverageCounter cov;
  const auto hit = extract_embedding("q1", "f1", w.embeddings, EmbeddingMode::kTriple, &cov);
  CHECK(hit.size() == kEmbeddingDim);
  CHECK(hit == ramp(0.5f));
  const auto miss = extract_embedding("q1", "f4", w.embeddings, EmbeddingMode::kTriple, &cov);
  CHECK(miss == std::vector<float>(kEmbeddingDim, 0.0f));
  CHECK(cov.lookups == 2);
  CHECK(cov.misses == 1);
  CHECK(extract_embedding("q1", "f1", w.embeddings) == extract_embedding("q1", "f1", w.embeddings));

  EmbeddingResource seg;
  seg.add("q", "#q", ramp(1.0f));
  seg.add("q", "#ca", ramp(2.0f));
  seg.add("#f", "f", ramp(3.0f));
  const auto sep = extract_embedding("q", "f", seg, EmbeddingMode::kSeparate);
  REQUIRE(sep.size() == 3 * kEmbeddingDim);
  CHECK(sep[0] == 1.0f);
  CHECK(sep[kEmbeddingDim] == 2.0f);
  CHECK(sep[2 * kEmbeddingDim] == 3.0f);
}

TEST_CASE("feature space contract") {
  FeatureSpace s;
  s.add("b", FeatureGroup::kMultihop);
  s.add("a", FeatureGroup::kLex);
  s.add("c", FeatureGroup::kLex);
  s.add("a", FeatureGroup::kLex);
  CHECK(s.size() == 3);
  CHECK_THROWS_AS(s.index("a"), std::logic_error);
  CHECK_THROWS_AS(s.add("a", FeatureGroup::kConcept), std::logic_error);
  s.freeze();
  CHECK(*s.index("a") == 0);
  CHECK(*s.index("c") == 1);
  CHECK(*s.index("b") == 2);
  CHECK_FALSE(s.index("zzz"));
  CHECK_THROWS_AS(s.add("d", FeatureGroup::kLex), std::logic_error);
  CHECK(s.block(FeatureGroup::kLex) == std::pair<std::uint32_t, std::uint32_t>{0, 2});
  CHECK(s.group_size(FeatureGroup::kConcept) == 0);

  const auto again = FeatureSpace::parse(s.format());
  CHECK(again.format() == s.format());
  CHECK(again.digest() == s.digest());
  CHECK(*again.index("b") == 2);
  CHECK_THROWS_AS(FeatureSpace::parse("0\tlex\ta\n2\tlex\tb\n"), Error);
  CHECK_THROWS_AS(FeatureSpace::parse("0\tmultihop\ta\n1\tlex\tb\n"), Error);
  CHECK_THROWS_AS(FeatureSpace::parse("0\tlex\ta\n1\tlex\ta\n"), Error);
  CHECK_THROWS_AS(FeatureSpace::parse("0\tnope\ta\n"), Error);
}

TEST_CASE("build_space registers exactly the observed names") {
  const auto store = testing::make_store({{"f1", "T1", "ox"}, {"f2", "T2", "ax"}});
  const auto qa = testing::make_qa("q", "go", "");
  FeatureConfig cfg;
  cfg.groups = {FeatureGroup::kLex};
  const FeatureExtractor ex(cfg, {});
  const std::vector<CandidateSet> cands = {{&qa, {0, 1}}};
  const auto space = build_space(ex, store, cands);
  CHECK(space.size() == 5);
  for (auto n : {"q_lemma=go", "f_lemma=ox", "f_lemma=ax", "tabletype=T1", "tabletype=T2"}) {
    CHECK(space.index(n));
  }
  // Unseen names at assemble time are dropped.
  const auto dev = testing::make_qa("d", "zebra", "");
  const auto v = ex.assemble(dev, store[0], 0, space);
  REQUIRE(v.nnz() == 2);
  CHECK(v.entries[0].first == *space.index("f_lemma=ox"));
  CHECK(v.entries[1].first == *space.index("tabletype=T1"));
}

TEST_CASE("an enabled group without its resource is refused") {
  FeatureConfig cfg;
  CHECK_THROWS_AS(FeatureExtractor(cfg, {}), Error);
  cfg.groups = {FeatureGroup::kLex, FeatureGroup::kOpenIe};
  CHECK_THROWS_AS(FeatureExtractor(cfg, {}), Error);
}

TEST_CASE("assembled vectors over the full world") {
  const World w;
  FeatureConfig cfg;
  const FeatureExtractor ex(cfg, w.resources());
  const auto cands = w.candidates();
  const auto space = build_space(ex, w.store, cands);
  CHECK(space.group_size(FeatureGroup::kEmbed) == kEmbeddingDim);
  CHECK(space.name(space.block(FeatureGroup::kEmbed).first) == "embed:000");
  CHECK(space.name(space.block(FeatureGroup::kEmbed).second - 1) == "embed:767");

  // Blocks partition the space.
  std::uint32_t pos = 0;
  for (auto g : kAllGroups) {
    const auto [b, e] = space.block(g);
    CHECK(b == pos);
    for (auto i = b; i < e; ++i) CHECK(space.group(i) == g);
    pos = e;
  }
  CHECK(pos == space.size());

  for (const auto& qa : w.qas) {
    for (std::size_t f = 0; f < w.store.size(); ++f) {
      const auto v = ex.assemble(qa, w.store[f], f, space);
      CHECK(v == ex.assemble(qa, w.store[f], f, space));
      for (std::size_t k = 1; k < v.entries.size(); ++k) {
        CHECK(v.entries[k - 1].first < v.entries[k].first);
      }
      for (const auto& [i, x] : v.entries) CHECK(i < space.size());
      const auto [eb, ee] = space.block(FeatureGroup::kEmbed);
      const auto dense = std::count_if(v.entries.begin(), v.entries.end(),
                                       [&](const auto& e) { return e.first >= eb && e.first < ee; });
      const bool present = w.embeddings.find(qa.id, w.store[f].id) != nullptr;
      CHECK(dense == (present ? static_cast<long>(kEmbeddingDim) : 0));
    }
  }
  CHECK(ex.coverage().embedding_misses > 0);
}

TEST_CASE("disabling a group clears exactly its block") {
  const World w;
  FeatureConfig all;
  const FeatureExtractor full(all, w.resources());
  const auto cands = w.candidates();
  const auto space = build_space(full, w.store, cands);
  for (auto dropped : kAllGroups) {
    FeatureConfig cfg;
    cfg.groups.erase(dropped);
    const FeatureExtractor part(cfg, w.resources());
    const auto [b, e] = space.block(dropped);
    for (const auto& qa : w.qas) {
      for (std::size_t f = 0; f < w.store.size(); ++f) {
        auto expected = full.assemble(qa, w.store[f], f, space);
        std::erase_if(expected.entries, [&](const auto& x) { return x.first >= b && x.first < e; });
        CHECK(part.assemble(qa, w.store[f], f, space) == expected);
      }
    }
  }
  FeatureConfig none;
  none.groups = GroupSet{};
  const FeatureExtractor empty(none, {});
  CHECK(empty.assemble(w.qas[0], w.store[0], 0, space).entries.empty());
}

TEST_CASE("lex plus tfidf support is the union of both groups") {
  const World w;
  const auto cands = w.candidates();
  FeatureConfig both;
  both.groups = {FeatureGroup::kLex, FeatureGroup::kTfidfRank};
  const FeatureExtractor ex(both, w.resources());
  const auto space = build_space(ex, w.store, cands);
  FeatureConfig lex;
  lex.groups = {FeatureGroup::kLex};
  FeatureConfig rank;
  rank.groups = {FeatureGroup::kTfidfRank};
  const FeatureExtractor lx(lex, w.resources()), rx(rank, w.resources());
  const auto v = ex.assemble(w.qas[0], w.store[0], 0, space);
  const auto a = lx.assemble(w.qas[0], w.store[0], 0, space);
  const auto b = rx.assemble(w.qas[0], w.store[0], 0, space);
  std::set<std::uint32_t> got, want;
  for (const auto& [i, x] : v.entries) got.insert(i);
  for (const auto& [i, x] : a.entries) want.insert(i);
  for (const auto& [i, x] : b.entries) want.insert(i);
  CHECK(got == want);
  CHECK(b.nnz() == 6);
}

TEST_CASE("resource round trips") {
  const World w;
  CHECK(ConceptResource::parse(w.concepts.format()) == w.concepts);
  CHECK(TripleResource::parse(w.triples.format()) == w.triples);

  const auto dir = testing::scratch("resources");
  w.embeddings.write_binary(dir / "e.bin");
  CHECK(EmbeddingResource::load(dir / "e.bin") == w.embeddings);
  {
    std::ofstream out(dir / "e.tsv");
    out << w.embeddings.format_tsv();
  }
  CHECK(EmbeddingResource::load(dir / "e.tsv") == w.embeddings);

  const auto fixture = EmbeddingResource::load(testing::fixtures() / "embeddings.tsv");
  fixture.write_binary(dir / "f.bin");
  CHECK(EmbeddingResource::load(dir / "f.bin") == fixture);
  const auto concepts = ConceptResource::load(testing::fixtures() / "concepts.tsv");
  CHECK(ConceptResource::parse(concepts.format()) == concepts);
  const auto triples = TripleResource::load(testing::fixtures() / "triples.tsv");
  CHECK(TripleResource::parse(triples.format()) == triples);
}

TEST_CASE("concepts keep rank order and malformed resources are rejected") {
  const auto r = ConceptResource::parse("x\t3\tc\nx\t1\ta\nx\t2\tb\nx\t2\tb2\n");
  CHECK(r.find("x")->concepts == std::vector<std::string>{"a", "b", "b2", "c"});
  CHECK_THROWS_AS(ConceptResource::parse("x\tfirst\ta\n"), Error);
  CHECK_THROWS_AS(ConceptResource::parse("x\t1\n"), Error);
  CHECK_THROWS_AS(TripleResource::parse("k\ts\tp\n"), Error);

  EmbeddingResource e;
  CHECK_THROWS_AS(e.add("q", "f", std::vector<float>(767)), Error);
  const auto dir = testing::scratch("bad_embed");
  {
    std::ofstream out(dir / "short.tsv");
    out << "q\tf\t1 2 3\n";
  }
  CHECK_THROWS_AS(EmbeddingResource::load(dir / "short.tsv"), Error);
  {
    std::ofstream out(dir / "trunc.bin", std::ios::binary);
    out << "FREMBED1";
  }
  CHECK_THROWS_AS(EmbeddingResource::load(dir / "trunc.bin"), Error);
}
