#include "factrank/text.hpp"

#include <algorithm>
#include <optional>
#include <stdexcept>

#include "factrank/error.hpp"
#include "factrank/tsv.hpp"

namespace factrank {

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_alpha_word(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
}

bool has_vowel(std::string_view s) { return std::any_of(s.begin(), s.end(), is_vowel); }

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// "runn" -> "run", "stopp" -> "stop"; "add", "fall", "pass" are left alone.
std::string undouble(std::string stem) {
  const auto n = stem.size();
  if (n >= 4 && stem[n - 1] == stem[n - 2] && !is_vowel(stem[n - 1]) &&
      std::string_view("lsz").find(stem[n - 1]) == std::string_view::npos) {
    stem.pop_back();
  }
  return stem;
}

// One suffix-stripping step; nullopt when no rule applies. Every rule
// shortens its input, so iterating terminates.
std::optional<std::string> strip_once(std::string_view w) {
  if (ends_with(w, "'s")) return std::string(w.substr(0, w.size() - 2));
  if (ends_with(w, "s'")) return std::string(w.substr(0, w.size() - 1));
  if (!is_alpha_word(w) || w.size() < 4) return std::nullopt;

  const std::string s(w);
  const auto cut = [&](std::size_t k) { return s.substr(0, s.size() - k); };

  if (ends_with(s, "ies") && s.size() >= 5) return cut(3) + "y";
  if (ends_with(s, "sses")) return cut(2);
  if (s.size() >= 5 && (ends_with(s, "ches") || ends_with(s, "shes") || ends_with(s, "xes") ||
                        ends_with(s, "zzes"))) {
    return cut(2);
  }
  if (ends_with(s, "s") && !ends_with(s, "ss") && !ends_with(s, "us") && !ends_with(s, "is")) {
    return cut(1);
  }
  if (ends_with(s, "ing") && s.size() >= 5) {
    auto stem = cut(3);
    if (stem.size() >= 3 && has_vowel(stem)) return undouble(std::move(stem));
    return std::nullopt;
  }
  if (ends_with(s, "ied") && s.size() >= 5) return cut(3) + "y";
  if (ends_with(s, "ed") && !ends_with(s, "eed") && s.size() >= 5) {
    auto stem = cut(2);
    if (stem.size() >= 3 && has_vowel(stem)) return undouble(std::move(stem));
  }
  return std::nullopt;
}

std::vector<std::pair<std::string, std::string>> parse_lexicon(std::string_view text,
                                                               std::string_view source) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (tsv::trim(line).empty() || line.front() == '#') continue;
    const auto fields = tsv::split(line);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw Error(std::string(source) + ":" + std::to_string(line_no) +
                  ": expected inflected<TAB>lemma");
    }
    entries.emplace_back(fields[0], fields[1]);
  }
  return entries;
}

}  // namespace

std::vector<std::string> ProcessedText::content_lemmas() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < lemmas.size(); ++i) {
    if (content_mask[i]) out.push_back(lemmas[i]);
  }
  return out;
}

std::vector<std::string> ProcessedText::content_tokens() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (content_mask[i]) out.push_back(tokens[i]);
  }
  return out;
}

std::string_view zone_name(Zone zone) {
  switch (zone) {
    case Zone::kFirst: return "first";
    case Zone::kMiddle: return "middle";
    case Zone::kLast: return "last";
  }
  return "?";
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(static_cast<unsigned char>(text[j]))) ++j;
    auto piece = text.substr(i, j - i);
    i = j;
    std::size_t b = 0;
    std::size_t e = piece.size();
    while (b < e && !is_word_byte(static_cast<unsigned char>(piece[b]))) ++b;
    while (e > b && !is_word_byte(static_cast<unsigned char>(piece[e - 1]))) --e;
    if (b == e) continue;
    std::string token(piece.substr(b, e - b));
    for (auto& c : token) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    tokens.push_back(std::move(token));
  }
  return tokens;
}

std::set<std::string> affixes(std::string_view lemma) {
  std::set<std::string> out;
  for (std::size_t n : {5u, 4u, 3u}) {
    if (lemma.size() < n) continue;
    const auto tag = std::to_string(n) + "=";
    out.insert("pre" + tag + std::string(lemma.substr(0, n)));
    out.insert("suf" + tag + std::string(lemma.substr(lemma.size() - n)));
  }
  return out;
}

Zone zone_of(std::size_t index, std::size_t length) {
  if (index >= length) {
    throw std::out_of_range("zone_of: index " + std::to_string(index) + " outside length " +
                            std::to_string(length));
  }
  const std::size_t width = (length + 3) / 4;
  const std::size_t center = length / 2;
  const std::size_t begin = center - width / 2;
  if (index < begin) return Zone::kFirst;
  if (index < begin + width) return Zone::kMiddle;
  return Zone::kLast;
}

Lemmatizer::Lemmatizer() : Lemmatizer(parse_lexicon(data::lexicon_tsv(), "<shipped lexicon>")) {}

Lemmatizer::Lemmatizer(const std::vector<std::pair<std::string, std::string>>& entries) {
  const auto lower = [](std::string s) {
    for (auto& c : s) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return s;
  };
  for (const auto& [form, lemma] : entries) lexicon_[lower(form)] = lower(lemma);
  // Collapse chains so every target is a fixed point of the lexicon.
  for (auto& [form, lemma] : lexicon_) {
    std::string target = lemma;
    for (std::size_t hops = 0;; ++hops) {
      auto it = lexicon_.find(target);
      if (it == lexicon_.end() || it->second == target) break;
      if (hops > lexicon_.size()) throw Error("lexicon contains a cycle through '" + form + "'");
      target = it->second;
    }
    lemma = target;
  }
  for (const auto& [form, lemma] : lexicon_) pinned_.insert(lemma);
}

Lemmatizer Lemmatizer::from_file(const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::string>> entries;
  tsv::for_each_line(path, [&](std::size_t line_no, std::string_view line) {
    if (tsv::trim(line).empty() || line.front() == '#') return;
    const auto fields = tsv::split(line);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": expected inflected<TAB>lemma");
    }
    entries.emplace_back(fields[0], fields[1]);
  });
  return Lemmatizer(entries);
}

std::string Lemmatizer::lemmatize(std::string_view token) const {
  std::string current(token);
  for (auto& c : current) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  while (true) {
    if (pinned_.contains(current)) return current;
    if (auto it = lexicon_.find(current); it != lexicon_.end()) return it->second;
    auto next = strip_once(current);
    if (!next || next->empty()) return current;
    current = std::move(*next);
  }
}

WordList::WordList(std::vector<std::string> words) {
  for (auto& w : words) words_.insert(std::move(w));
}

WordList WordList::from_text(std::string_view text) {
  std::vector<std::string> words;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = tsv::trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    std::string w(line);
    for (auto& c : w) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    words.push_back(std::move(w));
  }
  return WordList(std::move(words));
}

WordList WordList::from_file(const std::filesystem::path& path) {
  std::string text;
  tsv::for_each_line(path, [&](std::size_t, std::string_view line) {
    text.append(line);
    text.push_back('\n');
  });
  return from_text(text);
}

WordList WordList::default_stopwords() { return from_text(data::stopwords_txt()); }
WordList WordList::default_verbs() { return from_text(data::verbs_txt()); }

TextProcessor::TextProcessor() : stopwords_(WordList::default_stopwords()) {}

TextProcessor::TextProcessor(Lemmatizer lemmatizer, WordList stopwords)
    : lemmatizer_(std::move(lemmatizer)), stopwords_(std::move(stopwords)) {}

ProcessedText TextProcessor::process(std::string_view text) const {
  ProcessedText out;
  out.tokens = tokenize(text);
  out.lemmas.reserve(out.tokens.size());
  out.content_mask.reserve(out.tokens.size());
  for (const auto& token : out.tokens) {
    out.lemmas.push_back(lemmatizer_.lemmatize(token));
    out.content_mask.push_back(!stopwords_.contains(token));
  }
  return out;
}

}  // namespace factrank
