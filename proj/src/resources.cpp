#include "factrank/resources.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "factrank/binary_io.hpp"
#include "factrank/error.hpp"
#include "factrank/tsv.hpp"

namespace factrank {

namespace {

constexpr std::string_view kEmbedMagic = "FREMBED1";

std::string lowercase(std::string s) {
  for (auto& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

std::string underscored(std::string s) {
  std::replace(s.begin(), s.end(), ' ', '_');
  return s;
}

void for_each_text_line(std::string_view text,
                        const std::function<void(std::size_t, std::string_view)>& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(line_no, line);
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  for (auto& w : tsv::split(s, ' ')) {
    if (!w.empty()) out.push_back(std::move(w));
  }
  return out;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += ' ';
    out += parts[i];
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- concepts

ConceptResource ConceptResource::parse(std::string_view text, std::string_view source) {
  struct Ranked {
    long rank;
    std::size_t seq;
    std::string name;
  };
  std::map<std::string, std::vector<Ranked>> ranked;
  ConceptResource r;
  std::size_t seq = 0;
  for_each_text_line(text, [&](std::size_t line_no, std::string_view line) {
    if (tsv::trim(line).empty() || line.front() == '#') return;
    const auto where = std::string(source) + ":" + std::to_string(line_no);
    const auto f = tsv::split(line);
    if (f.size() != 3 || tsv::trim(f[0]).empty() || tsv::trim(f[2]).empty()) {
      throw Error(where + ": expected term<TAB>rank|REL<TAB>value");
    }
    auto term = lowercase(std::string(tsv::trim(f[0])));
    auto value = underscored(std::string(tsv::trim(f[2])));
    if (f[1] == "REL") {
      r.add_relation(std::move(term), std::move(value));
      return;
    }
    long rank = 0;
    auto [p, ec] = std::from_chars(f[1].data(), f[1].data() + f[1].size(), rank);
    if (ec != std::errc() || p != f[1].data() + f[1].size()) {
      throw Error(where + ": rank must be an integer or REL, got '" + f[1] + "'");
    }
    ranked[std::move(term)].push_back({rank, seq++, std::move(value)});
  });
  for (auto& [term, list] : ranked) {
    std::stable_sort(list.begin(), list.end(),
                     [](const Ranked& a, const Ranked& b) { return a.rank < b.rank; });
    for (auto& c : list) r.add_concept(term, std::move(c.name));
  }
  return r;
}

ConceptResource ConceptResource::load(const std::filesystem::path& path) {
  return parse(read_text(path), path.string());
}

std::string ConceptResource::format() const {
  std::string out;
  for (const auto& [term, entry] : entries_) {
    for (std::size_t i = 0; i < entry.concepts.size(); ++i) {
      out += term + "\t" + std::to_string(i + 1) + "\t" + entry.concepts[i] + "\n";
    }
    for (const auto& rel : entry.relations) out += term + "\tREL\t" + rel + "\n";
  }
  return out;
}

void ConceptResource::add_concept(std::string term, std::string concept_name) {
  entries_[std::move(term)].concepts.push_back(std::move(concept_name));
}

void ConceptResource::add_relation(std::string term, std::string relation) {
  entries_[std::move(term)].relations.push_back(std::move(relation));
}

const ConceptResource::Entry* ConceptResource::find(std::string_view term) const {
  auto it = entries_.find(term);
  return it == entries_.end() ? nullptr : &it->second;
}

// ----------------------------------------------------------------- triples

std::string TripleResource::question_key(std::string_view qa_id) {
  return std::string(qa_id) + "#q";
}

std::string TripleResource::answer_key(std::string_view qa_id) {
  return std::string(qa_id) + "#ca";
}

TripleResource TripleResource::parse(std::string_view text, std::string_view source) {
  TripleResource r;
  for_each_text_line(text, [&](std::size_t line_no, std::string_view line) {
    if (tsv::trim(line).empty() || line.front() == '#') return;
    const auto f = tsv::split(line);
    if (f.size() != 4 || tsv::trim(f[0]).empty()) {
      throw Error(std::string(source) + ":" + std::to_string(line_no) +
                  ": expected key<TAB>subject<TAB>predicate<TAB>object");
    }
    r.add(std::string(tsv::trim(f[0])), {words(f[1]), words(f[2]), words(f[3])});
  });
  return r;
}

TripleResource TripleResource::load(const std::filesystem::path& path) {
  return parse(read_text(path), path.string());
}

std::string TripleResource::format() const {
  std::string out;
  for (const auto& [key, triples] : entries_) {
    for (const auto& t : triples) {
      out += key + "\t" + join(t.subject) + "\t" + join(t.predicate) + "\t" + join(t.object) + "\n";
    }
  }
  return out;
}

void TripleResource::add(std::string key, Triple triple) {
  entries_[std::move(key)].push_back(std::move(triple));
}

const std::vector<TripleResource::Triple>* TripleResource::find(std::string_view key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

// -------------------------------------------------------------- embeddings

std::string EmbeddingResource::key(std::string_view qa_id, std::string_view fact_id) {
  std::string k(qa_id);
  k += '\t';
  k += fact_id;
  return k;
}

void EmbeddingResource::add(std::string_view qa_id, std::string_view fact_id,
                            std::vector<float> values) {
  if (values.size() != kEmbeddingDim) {
    throw Error("embedding for (" + std::string(qa_id) + ", " + std::string(fact_id) + ") has " +
                std::to_string(values.size()) + " values, expected " +
                std::to_string(kEmbeddingDim));
  }
  entries_[key(qa_id, fact_id)] = std::move(values);
}

const std::vector<float>* EmbeddingResource::find(std::string_view qa_id,
                                                  std::string_view fact_id) const {
  auto it = entries_.find(key(qa_id, fact_id));
  return it == entries_.end() ? nullptr : &it->second;
}

void EmbeddingResource::write_binary(const std::filesystem::path& path) const {
  std::ostringstream out(std::ios::binary);
  bin::put_magic(out, kEmbedMagic);
  bin::put<std::uint64_t>(out, entries_.size());
  bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(kEmbeddingDim));
  for (const auto& [k, values] : entries_) {
    bin::put_string(out, k);
    for (float v : values) bin::put<float>(out, v);
  }
  tsv::write_file(path, out.str());
}

EmbeddingResource EmbeddingResource::load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  try {
    bin::expect_magic(in, kEmbedMagic, "embedding");
    const auto count = bin::get<std::uint64_t>(in);
    const auto dim = bin::get<std::uint32_t>(in);
    if (dim != kEmbeddingDim) {
      throw Error("dimension " + std::to_string(dim) + ", expected " +
                  std::to_string(kEmbeddingDim));
    }
    EmbeddingResource r;
    for (std::uint64_t i = 0; i < count; ++i) {
      auto k = bin::get_string(in);
      const auto tab = k.find('\t');
      if (tab == std::string::npos) throw Error("record " + std::to_string(i) + " has a bad key");
      std::vector<float> values(kEmbeddingDim);
      for (auto& v : values) v = bin::get<float>(in);
      r.add(std::string_view(k).substr(0, tab), std::string_view(k).substr(tab + 1),
            std::move(values));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw Error("trailing bytes");
    return r;
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

EmbeddingResource EmbeddingResource::load_tsv(const std::filesystem::path& path) {
  EmbeddingResource r;
  tsv::for_each_line(path, [&](std::size_t line_no, std::string_view line) {
    if (tsv::trim(line).empty() || line.front() == '#') return;
    const auto where = path.string() + ":" + std::to_string(line_no);
    const auto f = tsv::split(line);
    if (f.size() != 3) throw Error(where + ": expected qa_id<TAB>fact_id<TAB>values");
    std::vector<float> values;
    values.reserve(kEmbeddingDim);
    for (const auto& w : words(f[2])) {
      char* end = nullptr;
      const float v = std::strtof(w.c_str(), &end);
      if (end == w.c_str() || *end != '\0') throw Error(where + ": bad value '" + w + "'");
      values.push_back(v);
    }
    try {
      r.add(f[0], f[1], std::move(values));
    } catch (const Error& e) {
      throw Error(where + ": " + e.what());
    }
  });
  return r;
}

EmbeddingResource EmbeddingResource::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string head(kEmbedMagic.size(), '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  if (in.gcount() == static_cast<std::streamsize>(head.size()) && head == kEmbedMagic) {
    return load_binary(path);
  }
  return load_tsv(path);
}

std::string EmbeddingResource::format_tsv() const {
  std::string out;
  char buf[32];
  for (const auto& [k, values] : entries_) {
    out += k;
    out += '\t';
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::snprintf(buf, sizeof buf, i == 0 ? "%.9g" : " %.9g", static_cast<double>(values[i]));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace factrank
