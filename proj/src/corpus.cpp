#include "factrank/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "factrank/error.hpp"
#include "factrank/tsv.hpp"

namespace factrank {

namespace fs = std::filesystem;

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  }
  return out;
}

// "[SKIP] UID" -> "UID"
std::string_view strip_bracket_tag(std::string_view header) {
  header = tsv::trim(header);
  if (!header.empty() && header.front() == '[') {
    const auto close = header.find(']');
    if (close != std::string_view::npos) header = tsv::trim(header.substr(close + 1));
  }
  return header;
}

std::string location(const fs::path& file, std::size_t line) {
  return file.string() + ":" + std::to_string(line);
}

}  // namespace

Tablestore::Tablestore(std::vector<Fact> facts) : facts_(std::move(facts)) {
  if (facts_.empty()) throw Error("tablestore is empty");
  by_id_.reserve(facts_.size());
  for (std::size_t i = 0; i < facts_.size(); ++i) {
    if (facts_[i].text.empty()) throw Error("fact '" + facts_[i].id + "' has empty text");
    if (!by_id_.emplace(facts_[i].id, i).second) {
      throw Error("duplicate fact id '" + facts_[i].id + "'");
    }
  }
}

std::optional<std::size_t> Tablestore::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

const Fact& Tablestore::at(std::string_view id) const {
  const auto i = find(id);
  if (!i) throw Error("unknown fact id '" + std::string(id) + "'");
  return facts_[*i];
}

std::vector<std::string> Tablestore::tables() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& f : facts_) {
    if (seen.insert(f.table).second) out.push_back(f.table);
  }
  return out;
}

void Tablestore::process(const TextProcessor& processor) {
  for (auto& f : facts_) f.processed = processor.process(f.text);
}

std::string_view role_token(Role role) {
  switch (role) {
    case Role::kCentral: return "CENTRAL";
    case Role::kGrounding: return "GROUNDING";
    case Role::kLexicalGlue: return "LEXGLUE";
  }
  return "?";
}

std::optional<Role> parse_role(std::string_view token) {
  const auto t = upper(token);
  if (t == "CENTRAL") return Role::kCentral;
  if (t == "GROUNDING") return Role::kGrounding;
  if (t == "LEXGLUE") return Role::kLexicalGlue;
  return std::nullopt;
}

std::vector<std::string> GoldExplanation::fact_ids() const {
  std::vector<std::string> ids;
  ids.reserve(entries.size());
  for (const auto& e : entries) ids.push_back(e.fact_id);
  return ids;
}

void QaInstance::process(const TextProcessor& processor) {
  processed_question = processor.process(question);
  processed_answer = processor.process(answer);
  processed_distractors.clear();
  for (const auto& d : distractors) processed_distractors.push_back(processor.process(d));
}

void SplitSet::check_disjoint() const {
  std::map<std::string, std::string_view> owner;
  const std::pair<std::string_view, const std::vector<QaInstance>*> splits[] = {
      {"train", &train}, {"dev", &dev}, {"test", &test}};
  for (const auto& [name, list] : splits) {
    for (const auto& qa : *list) {
      auto [it, fresh] = owner.emplace(qa.id, name);
      if (!fresh) {
        throw Error("qa id '" + qa.id + "' appears in both " + std::string(it->second) +
                    " and " + std::string(name));
      }
    }
  }
}

Tablestore load_tablestore(const fs::path& dir, const TableLoadOptions& options) {
  if (!fs::is_directory(dir)) throw Error("tablestore directory not found: " + dir.string());

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && upper(entry.path().extension().string()) == ".TSV") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    const auto ua = upper(a.filename().string());
    const auto ub = upper(b.filename().string());
    return ua != ub ? ua < ub : a.filename() < b.filename();
  });
  if (files.empty()) throw Error("no .tsv table files in " + dir.string());

  std::vector<Fact> facts;
  std::map<std::string, std::string> seen;  // id -> location
  const auto id_name = upper(options.id_column);

  for (const auto& file : files) {
    const auto table = upper(file.stem().string());
    std::vector<std::string> header;
    std::optional<std::size_t> id_col;
    std::vector<std::size_t> content_cols;

    tsv::for_each_line(file, [&](std::size_t line_no, std::string_view line) {
      if (line_no == 1) {
        header = tsv::split(line);
        for (std::size_t c = 0; c < header.size(); ++c) {
          if (upper(strip_bracket_tag(header[c])) == id_name) id_col = c;
        }
        if (!id_col) {
          throw Error(location(file, 1) + ": no id column '" + options.id_column + "'");
        }
        if (auto it = options.content_columns.find(table); it != options.content_columns.end()) {
          for (const auto& wanted : it->second) {
            bool found = false;
            for (std::size_t c = 0; c < header.size(); ++c) {
              if (tsv::trim(header[c]) == tsv::trim(wanted)) {
                content_cols.push_back(c);
                found = true;
              }
            }
            if (!found) throw Error(location(file, 1) + ": no content column '" + wanted + "'");
          }
          std::sort(content_cols.begin(), content_cols.end());
        } else {
          for (std::size_t c = 0; c < header.size(); ++c) {
            const auto h = tsv::trim(header[c]);
            if (c != *id_col && !(h.starts_with("["))) content_cols.push_back(c);
          }
        }
        return;
      }
      const auto cells = tsv::split(line);
      if (std::all_of(cells.begin(), cells.end(),
                      [](const std::string& c) { return tsv::trim(c).empty(); })) {
        return;
      }
      const auto cell = [&](std::size_t c) -> std::string_view {
        return c < cells.size() ? tsv::trim(cells[c]) : std::string_view{};
      };
      Fact fact;
      fact.id = std::string(cell(*id_col));
      fact.table = table;
      if (fact.id.empty()) throw Error(location(file, line_no) + ": row without fact id");
      for (auto c : content_cols) {
        const auto v = cell(c);
        if (v.empty()) continue;
        if (!fact.text.empty()) fact.text.push_back(' ');
        fact.text.append(v);
      }
      if (fact.text.empty()) {
        throw Error(location(file, line_no) + ": fact '" + fact.id + "' has empty text");
      }
      auto [it, fresh] = seen.emplace(fact.id, location(file, line_no));
      if (!fresh) {
        throw Error("duplicate fact id '" + fact.id + "' at " + it->second + " and " +
                    location(file, line_no));
      }
      facts.push_back(std::move(fact));
    });
  }
  return Tablestore(std::move(facts));
}

void write_tablestore(const Tablestore& store, const fs::path& dir) {
  fs::create_directories(dir);
  std::map<std::string, std::string> files;
  for (const auto& f : store.facts()) {
    if (f.text.find_first_of("\t\n") != std::string::npos || f.id.find_first_of("\t\n") != std::string::npos) {
      throw Error("fact '" + f.id + "' cannot be written as TSV");
    }
    auto& body = files[f.table];
    if (body.empty()) body = "[SKIP] UID\tTEXT\n";
    body += f.id + "\t" + f.text + "\n";
  }
  for (const auto& [table, body] : files) tsv::write_file(dir / (table + ".tsv"), body);
}

std::vector<QaInstance> load_split(const fs::path& path, const Tablestore& store) {
  if (!fs::is_regular_file(path)) throw Error("split file not found: " + path.string());
  std::vector<QaInstance> out;
  std::set<std::string> ids;
  tsv::for_each_line(path, [&](std::size_t line_no, std::string_view line) {
    if (tsv::trim(line).empty()) return;
    const auto fields = tsv::split(line);
    if (line_no == 1 && tsv::trim(fields[0]) == "qa_id") return;
    const auto where = location(path, line_no);
    if (fields.size() < 3 || fields.size() > 5) {
      throw Error(where + ": expected 3 to 5 tab-separated fields, got " +
                  std::to_string(fields.size()));
    }
    QaInstance qa;
    qa.id = std::string(tsv::trim(fields[0]));
    qa.question = std::string(tsv::trim(fields[1]));
    qa.answer = std::string(tsv::trim(fields[2]));
    if (qa.id.empty()) throw Error(where + ": empty qa_id");
    if (qa.question.empty() || qa.answer.empty()) {
      throw Error(where + ": qa '" + qa.id + "' has empty question or answer");
    }
    if (!ids.insert(qa.id).second) throw Error(where + ": duplicate qa_id '" + qa.id + "'");

    if (fields.size() >= 4) {
      const auto answer_key = upper(qa.answer);
      for (const auto& choice : tsv::split(fields[3], ';')) {
        const auto c = tsv::trim(choice);
        if (c.empty() || upper(c) == answer_key) continue;
        qa.distractors.emplace_back(c);
      }
    }
    if (fields.size() == 5 && !tsv::trim(fields[4]).empty()) {
      GoldExplanation gold;
      std::set<std::string> gold_ids;
      std::istringstream words{std::string(fields[4])};
      std::string word;
      while (words >> word) {
        const auto bar = word.rfind('|');
        if (bar == std::string::npos || bar == 0) {
          throw Error(where + ": malformed gold entry '" + word + "' (want fact_id|ROLE)");
        }
        const auto id = word.substr(0, bar);
        const auto role = parse_role(std::string_view(word).substr(bar + 1));
        if (!role) {
          throw Error(where + ": unknown role '" + word.substr(bar + 1) + "' in qa '" + qa.id + "'");
        }
        if (!store.find(id)) {
          throw Error(where + ": qa '" + qa.id + "' references unknown fact '" + id + "'");
        }
        if (!gold_ids.insert(id).second) {
          throw Error(where + ": qa '" + qa.id + "' repeats fact '" + id + "'");
        }
        gold.entries.push_back({id, *role});
      }
      if (gold.size() > GoldExplanation::kMaxLength) {
        throw Error(where + ": qa '" + qa.id + "' has " + std::to_string(gold.size()) +
                    " gold facts (max 21)");
      }
      qa.gold = std::move(gold);
    }
    out.push_back(std::move(qa));
  });
  return out;
}

std::string format_split(const std::vector<QaInstance>& instances) {
  std::string out = "qa_id\tquestion\tanswer\tchoices\tgold\n";
  for (const auto& qa : instances) {
    out += qa.id + "\t" + qa.question + "\t" + qa.answer + "\t";
    for (std::size_t i = 0; i < qa.distractors.size(); ++i) {
      if (i) out += ";";
      out += qa.distractors[i];
    }
    out += "\t";
    if (qa.gold) {
      for (std::size_t i = 0; i < qa.gold->entries.size(); ++i) {
        if (i) out += " ";
        out += qa.gold->entries[i].fact_id + "|" + std::string(role_token(qa.gold->entries[i].role));
      }
    }
    out += "\n";
  }
  return out;
}

CorpusStats corpus_stats(const std::vector<QaInstance>& instances, const Tablestore& store) {
  CorpusStats s;
  std::map<std::string, std::size_t> by_table;
  for (const auto& qa : instances) {
    if (!qa.gold || qa.gold->entries.empty()) {
      ++s.skipped_without_gold;
      continue;
    }
    ++s.qa_pairs;
    s.gold_facts += qa.gold->size();
    ++s.length_histogram[qa.gold->size()];
    for (const auto& e : qa.gold->entries) {
      ++s.facts_by_role[e.role];
      ++by_table[store.at(e.fact_id).table];
    }
  }
  if (s.qa_pairs == 0) throw Error("corpus_stats: no instances with gold explanations");
  const auto n = static_cast<double>(s.qa_pairs);
  s.facts_per_qa = static_cast<double>(s.gold_facts) / n;
  for (auto role : {Role::kCentral, Role::kGrounding, Role::kLexicalGlue}) {
    s.facts_by_role.try_emplace(role, 0);
    s.facts_per_qa_by_role[role] = static_cast<double>(s.facts_by_role[role]) / n;
  }
  for (const auto& [table, count] : by_table) {
    s.table_shares.emplace_back(table, 100.0 * static_cast<double>(count) /
                                           static_cast<double>(s.gold_facts));
  }
  std::sort(s.table_shares.begin(), s.table_shares.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return s;
}

std::string format_stats(const CorpusStats& s) {
  std::string out;
  char buf[256];
  const auto line = [&](const char* fmt, auto... args) {
    std::snprintf(buf, sizeof buf, fmt, args...);
    out += buf;
  };
  line("qa_pairs\t%zu\n", s.qa_pairs);
  line("skipped_without_gold\t%zu\n", s.skipped_without_gold);
  line("gold_facts\t%zu\n", s.gold_facts);
  line("facts_per_qa\t%.4f\n", s.facts_per_qa);
  for (const auto& [role, count] : s.facts_by_role) {
    line("role\t%s\t%zu\t%.4f\n", std::string(role_token(role)).c_str(), count,
         s.facts_per_qa_by_role.at(role));
  }
  for (const auto& [len, count] : s.length_histogram) line("length\t%zu\t%zu\n", len, count);
  for (const auto& [table, share] : s.table_shares) {
    line("table\t%s\t%.2f\n", table.c_str(), share);
  }
  return out;
}

}  // namespace factrank
