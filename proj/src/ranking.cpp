#include "factrank/ranking.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>

#include "factrank/error.hpp"
#include "factrank/tsv.hpp"

namespace factrank {

std::vector<std::string> RankedExplanation::fact_ids(const Tablestore& store) const {
  std::vector<std::string> ids;
  ids.reserve(entries.size());
  for (const auto& e : entries) ids.push_back(store[e.fact].id);
  return ids;
}

void sort_by_score(std::vector<ScoredFact>& entries, const Tablestore& store) {
  std::sort(entries.begin(), entries.end(), [&](const ScoredFact& a, const ScoredFact& b) {
    if (a.score != b.score) return a.score > b.score;
    return store[a.fact].id < store[b.fact].id;
  });
}

bool is_permutation_of_store(const RankedExplanation& ranking, const Tablestore& store) {
  if (ranking.entries.size() != store.size()) return false;
  std::vector<bool> seen(store.size(), false);
  for (const auto& e : ranking.entries) {
    if (e.fact >= store.size() || seen[e.fact]) return false;
    seen[e.fact] = true;
  }
  return true;
}

std::string format_ranking_dump(const std::vector<RankedExplanation>& rankings,
                                const Tablestore& store) {
  std::string out;
  char buf[64];
  for (const auto& r : rankings) {
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
      std::snprintf(buf, sizeof buf, "\t%zu\t%.17g\n", i + 1, r.entries[i].score);
      out += r.qa_id;
      out += '\t';
      out += store[r.entries[i].fact].id;
      out += buf;
    }
  }
  return out;
}

void write_ranking_dump(const std::filesystem::path& path,
                        const std::vector<RankedExplanation>& rankings, const Tablestore& store) {
  tsv::write_file(path, format_ranking_dump(rankings, store));
}

std::vector<RankedExplanation> read_ranking_dump(const std::filesystem::path& path,
                                                 const Tablestore& store) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error("ranking dump not found: " + path.string());
  }
  std::vector<RankedExplanation> out;
  std::map<std::string, std::size_t, std::less<>> slot;
  std::vector<std::vector<std::pair<std::size_t, ScoredFact>>> rows;
  tsv::for_each_line(path, [&](std::size_t line_no, std::string_view line) {
    if (tsv::trim(line).empty()) return;
    const auto where = path.string() + ":" + std::to_string(line_no);
    const auto f = tsv::split(line);
    if (f.size() != 4) throw Error(where + ": expected qa_id, fact_id, rank, score");
    const auto fact = store.find(f[1]);
    if (!fact) throw Error(where + ": unknown fact '" + f[1] + "'");
    std::size_t rank = 0;
    auto [p, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), rank);
    if (ec != std::errc() || p != f[2].data() + f[2].size() || rank == 0) {
      throw Error(where + ": bad rank '" + f[2] + "'");
    }
    char* end = nullptr;
    const double score = std::strtod(f[3].c_str(), &end);
    if (end == f[3].c_str() || *end != '\0') throw Error(where + ": bad score '" + f[3] + "'");
    auto [it, fresh] = slot.emplace(f[0], out.size());
    if (fresh) {
      out.push_back({f[0], {}});
      rows.emplace_back();
    }
    rows[it->second].push_back({rank, {*fact, score}});
  });
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& r = rows[i];
    std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (r[j].first != j + 1) {
        throw Error(path.string() + ": ranks for '" + out[i].qa_id + "' are not 1..n");
      }
      out[i].entries.push_back(r[j].second);
    }
    if (!is_permutation_of_store(out[i], store)) {
      throw Error(path.string() + ": ranking for '" + out[i].qa_id +
                  "' is not a permutation of the tablestore");
    }
  }
  return out;
}

RankTable::RankTable(const std::vector<RankedExplanation>& rankings, std::size_t store_size) {
  for (const auto& r : rankings) {
    std::vector<std::uint32_t> ranks(store_size, 0);
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
      if (r.entries[i].fact < store_size) ranks[r.entries[i].fact] = static_cast<std::uint32_t>(i + 1);
    }
    ranks_[r.qa_id] = std::move(ranks);
  }
}

std::uint32_t RankTable::rank(const std::string& qa_id, std::size_t fact) const {
  auto it = ranks_.find(qa_id);
  if (it == ranks_.end() || fact >= it->second.size()) return 0;
  return it->second[fact];
}

}  // namespace factrank
