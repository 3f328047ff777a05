#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "factrank/corpus.hpp"
#include "factrank/text.hpp"

namespace factrank::testing {

inline const TextProcessor& processor() {
  static const TextProcessor p;
  return p;
}

/// Store from (id, table, text) rows, processed with the shipped defaults.
inline Tablestore make_store(const std::vector<std::tuple<std::string, std::string, std::string>>& rows) {
  std::vector<Fact> facts;
  for (const auto& [id, table, text] : rows) facts.push_back(Fact{id, table, text, {}});
  Tablestore store(std::move(facts));
  store.process(processor());
  return store;
}

/// Store of n facts "f00".."f<n-1>" with placeholder text.
inline Tablestore numbered_store(std::size_t n) {
  std::vector<Fact> facts;
  for (std::size_t i = 0; i < n; ++i) {
    auto id = std::to_string(i);
    if (id.size() < 2) id = "0" + id;
    facts.push_back(Fact{"f" + id, "KINDOF", "fact number " + id, {}});
  }
  Tablestore store(std::move(facts));
  store.process(processor());
  return store;
}

inline QaInstance make_qa(std::string id, std::string question, std::string answer,
                          std::vector<std::string> gold_ids = {},
                          std::vector<std::string> distractors = {}) {
  QaInstance qa;
  qa.id = std::move(id);
  qa.question = std::move(question);
  qa.answer = std::move(answer);
  qa.distractors = std::move(distractors);
  if (!gold_ids.empty()) {
    GoldExplanation g;
    for (auto& f : gold_ids) g.entries.push_back({std::move(f), Role::kCentral});
    qa.gold = std::move(g);
  }
  qa.process(processor());
  return qa;
}

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::path(FACTRANK_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path fixtures() { return FACTRANK_FIXTURES; }

}  // namespace factrank::testing
