#include <doctest.h>

#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "factrank/error.hpp"
#include "factrank/text.hpp"
#include "support.hpp"

using namespace factrank;

namespace {

std::vector<std::string> v(std::initializer_list<const char*> xs) { return {xs.begin(), xs.end()}; }

// Reads the shipped data file directly rather than through the library.
std::map<std::string, std::string> shipped_lexicon() {
  std::ifstream in(std::string(FACTRANK_FIXTURES) + "/../../data/lexicon.tsv");
  REQUIRE(in);
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    REQUIRE(tab != std::string::npos);
    out[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return out;
}

std::set<std::string> shipped_stopwords() {
  std::ifstream in(std::string(FACTRANK_FIXTURES) + "/../../data/stopwords.txt");
  REQUIRE(in);
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    out.insert(line);
  }
  return out;
}

// Middle window grown outward from the centre, left side first.
std::set<std::size_t> middle_window(std::size_t length) {
  const std::size_t width = (length + 3) / 4;
  const std::size_t centre = length / 2;
  std::set<std::size_t> w{centre};
  for (std::size_t step = 1; w.size() < width; ++step) {
    if (w.size() < width && centre >= step) w.insert(centre - step);
    if (w.size() < width && centre + step < length) w.insert(centre + step);
  }
  return w;
}

}  // namespace

TEST_CASE("tokenize lowercases and strips surrounding punctuation") {
  CHECK(tokenize("Granite is a hard material.") == v({"granite", "is", "a", "hard", "material"}));
  CHECK(tokenize("").empty());
  CHECK(tokenize("   \t ").empty());
  CHECK(tokenize("water vapor (gas)") == v({"water", "vapor", "gas"}));
  CHECK(tokenize("a well-known fact") == v({"a", "well-known", "fact"}));
  CHECK(tokenize("... !!") .empty());
}

TEST_CASE("tokenize is deterministic") {
  const std::string s = "The Sun's light, (mostly) visible -- reaches Earth!";
  CHECK(tokenize(s) == tokenize(s));
}

TEST_CASE("lemmatize: rules, lexicon and identity") {
  const Lemmatizer lem;
  CHECK(lem.lemmatize("rocks") == "rock");
  CHECK(lem.lemmatize("granite") == "granite");
  const auto lexicon = shipped_lexicon();
  REQUIRE(lexicon.count("is") == 1);
  CHECK(lem.lemmatize("is") == lexicon.at("is"));
  CHECK(lem.lemmatize("is") == "be");
}

TEST_CASE("lemmatize agrees with every shipped lexicon entry") {
  const Lemmatizer lem;
  const auto lexicon = shipped_lexicon();
  CHECK(lexicon.size() > 100);
  for (const auto& [form, lemma] : lexicon) {
    INFO(form);
    // Chains collapse, so the lexicon target itself may be rewritten once more
    // by another entry; it must never be touched by suffix rules.
    const auto expected = lexicon.count(lemma) ? lexicon.at(lemma) : lemma;
    CHECK(lem.lemmatize(form) == expected);
  }
}

TEST_CASE("lemmatize is idempotent") {
  const Lemmatizer lem;
  std::vector<std::string> words;
  for (const auto& [form, lemma] : shipped_lexicon()) {
    words.push_back(form);
    words.push_back(lemma);
  }
  for (auto w : {"stopped", "running", "berries", "boxes", "glasses", "flies", "ss", "s", "ies",
                 "eed", "ing", "bussed", "caresses", "studies", "measured", "heated"}) {
    words.emplace_back(w);
  }
  std::mt19937 gen(11);
  const std::string alphabet = "abcdeilnorsty";
  for (int i = 0; i < 5000; ++i) {
    std::string w;
    const int n = 1 + static_cast<int>(gen() % 9);
    for (int j = 0; j < n; ++j) w += alphabet[gen() % alphabet.size()];
    for (auto suffix : {"", "s", "es", "ies", "ing", "ed"}) words.push_back(w + suffix);
  }
  for (const auto& w : words) {
    const auto once = lem.lemmatize(w);
    INFO(w << " -> " << once);
    CHECK(lem.lemmatize(once) == once);
    CHECK(!once.empty());
  }
}

TEST_CASE("custom lexicon chains collapse and cycles are rejected") {
  const Lemmatizer chained({{"a1", "b1"}, {"b1", "c1"}});
  CHECK(chained.lemmatize("a1") == "c1");
  CHECK(chained.lemmatize("b1") == "c1");
  CHECK_THROWS_AS(Lemmatizer({{"x", "y"}, {"y", "x"}}), Error);
  CHECK_THROWS_AS(Lemmatizer({{"x", "x"}, {"y", "z"}, {"z", "y"}}), Error);
}

TEST_CASE("affixes") {
  const auto a = affixes("photosynthesis");
  CHECK(a.count("pre3=pho") == 1);
  CHECK(a.count("suf5=hesis") == 1);
  CHECK(a.size() == 6);
  CHECK(affixes("sun") == std::set<std::string>{"pre3=sun", "suf3=sun"});
  CHECK(affixes("at").empty());
  CHECK(affixes("").empty());
  CHECK(affixes("rock") == std::set<std::string>{"pre3=roc", "suf3=ock", "pre4=rock", "suf4=rock"});
}

TEST_CASE("zone_of examples") {
  CHECK(zone_of(0, 8) == Zone::kFirst);
  CHECK(zone_of(4, 8) == Zone::kMiddle);
  CHECK(zone_of(7, 8) == Zone::kLast);
  CHECK_THROWS_AS(zone_of(8, 8), std::out_of_range);
  CHECK_THROWS_AS(zone_of(0, 0), std::out_of_range);
}

TEST_CASE("zones partition every length up to 60") {
  for (std::size_t length = 1; length <= 60; ++length) {
    const auto window = middle_window(length);
    REQUIRE(window.size() == (length + 3) / 4);
    const auto lo = *window.begin();
    const auto hi = *window.rbegin();
    REQUIRE(hi - lo + 1 == window.size());
    std::size_t first = 0, middle = 0, last = 0;
    for (std::size_t i = 0; i < length; ++i) {
      const Zone expected = window.count(i) ? Zone::kMiddle : (i < lo ? Zone::kFirst : Zone::kLast);
      INFO("length " << length << " index " << i);
      CHECK(zone_of(i, length) == expected);
      switch (zone_of(i, length)) {
        case Zone::kFirst: ++first; break;
        case Zone::kMiddle: ++middle; break;
        case Zone::kLast: ++last; break;
      }
    }
    CHECK(first + middle + last == length);
    CHECK(middle >= 1);
  }
}

TEST_CASE("processed text is parallel and marks stopwords only") {
  const auto stop = shipped_stopwords();
  const auto& p = testing::processor();
  const std::vector<std::string> sentences = {
      "Which of these is a kind of beverage that has caffeine?",
      "A rabbit is a kind of herbivore.",
      "The students measured the temperature of the water every hour",
      "",
      "It was they who ran"};
  for (const auto& s : sentences) {
    const auto t = p.process(s);
    REQUIRE(t.tokens.size() == t.lemmas.size());
    REQUIRE(t.tokens.size() == t.content_mask.size());
    CHECK(t.length() == tokenize(s).size());
    for (std::size_t i = 0; i < t.length(); ++i) {
      INFO(t.tokens[i]);
      if (!t.content_mask[i]) CHECK(stop.count(t.tokens[i]) == 1);
      if (stop.count(t.tokens[i])) CHECK_FALSE(t.content_mask[i]);
      for (char c : t.lemmas[i]) CHECK_FALSE((c >= 'A' && c <= 'Z'));
    }
  }
}

TEST_CASE("content views follow the mask") {
  const auto t = testing::processor().process("The rocks are hard");
  CHECK(t.content_tokens() == v({"rocks", "hard"}));
  CHECK(t.content_lemmas() == v({"rock", "hard"}));
}

TEST_CASE("word lists parse comments and blanks") {
  const auto w = WordList::from_text("# header\nalpha\n\n  beta  \n#gamma\n");
  CHECK(w.size() == 2);
  CHECK(w.contains("alpha"));
  CHECK(w.contains("beta"));
  CHECK_FALSE(w.contains("gamma"));
  CHECK(WordList::default_verbs().contains("melt"));
}
