#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace factrank {

/// Tokenized sentence with parallel lemma and content (non-stopword) lists.
struct ProcessedText {
  std::vector<std::string> tokens;
  std::vector<std::string> lemmas;
  std::vector<bool> content_mask;

  std::size_t length() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }

  std::vector<std::string> content_lemmas() const;
  std::vector<std::string> content_tokens() const;

  bool operator==(const ProcessedText&) const = default;
};

enum class Zone { kFirst, kMiddle, kLast };

std::string_view zone_name(Zone zone);

/// Lowercases, splits on whitespace and strips leading/trailing punctuation
/// from each piece. Intra-word hyphens and apostrophes survive.
std::vector<std::string> tokenize(std::string_view text);

/// Tagged prefixes and suffixes of length 5, 4 and 3, e.g. "pre3=pho",
/// "suf5=hesis". Words shorter than n contribute nothing for that n.
std::set<std::string> affixes(std::string_view lemma);

/// Middle is the window of width ceil(length/4) centred at floor(length/2);
/// positions left of it are First, right of it Last.
/// Throws std::out_of_range unless 0 <= index < length.
Zone zone_of(std::size_t index, std::size_t length);

/// Lexicon lookup followed by suffix rules, iterated to a fixed point so that
/// lemmatize(lemmatize(t)) == lemmatize(t) for every input.
class Lemmatizer {
 public:
  /// Built from the shipped inflection table.
  Lemmatizer();
  /// Entries map inflected form to lemma. Chains (a->b, b->c) are collapsed;
  /// cycles are rejected with factrank::Error.
  explicit Lemmatizer(const std::vector<std::pair<std::string, std::string>>& entries);

  static Lemmatizer from_file(const std::filesystem::path& path);

  std::string lemmatize(std::string_view token) const;

  std::size_t lexicon_size() const { return lexicon_.size(); }

 private:
  std::unordered_map<std::string, std::string> lexicon_;
  std::unordered_set<std::string> pinned_;  // lexicon targets, never rewritten
};

/// A closed word list (stopwords, verbs). One entry per line; '#' comments.
class WordList {
 public:
  WordList() = default;
  explicit WordList(std::vector<std::string> words);

  static WordList from_file(const std::filesystem::path& path);
  static WordList from_text(std::string_view text);
  static WordList default_stopwords();
  static WordList default_verbs();

  bool contains(std::string_view word) const { return words_.contains(std::string(word)); }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

/// Bundles tokenizer, lemmatizer and stopword list into one processing step.
class TextProcessor {
 public:
  TextProcessor();
  TextProcessor(Lemmatizer lemmatizer, WordList stopwords);

  ProcessedText process(std::string_view text) const;

  const Lemmatizer& lemmatizer() const { return lemmatizer_; }
  const WordList& stopwords() const { return stopwords_; }

 private:
  Lemmatizer lemmatizer_;
  WordList stopwords_;
};

namespace data {
// Shipped defaults, compiled in from data/.
std::string_view lexicon_tsv();
std::string_view stopwords_txt();
std::string_view verbs_txt();
}  // namespace data

}  // namespace factrank
