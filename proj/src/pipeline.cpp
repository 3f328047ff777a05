#include "factrank/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "factrank/binary_io.hpp"
#include "factrank/error.hpp"
#include "factrank/tsv.hpp"

namespace factrank {

using json = nlohmann::json;

namespace {

// ------------------------------------------------------------------ helpers

std::size_t worker_count(std::size_t jobs) {
  std::size_t n = std::thread::hardware_concurrency();
  if (const char* env = std::getenv("FACTRANK_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) n = static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

// Runs fn(i) for i in [0, n) on a few threads. Results must be written to
// per-index slots, so the outcome does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const auto workers = worker_count(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < workers; ++t) {
    threads.emplace_back([&] {
      while (true) {
        const auto i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string read_file(const fs::path& path, std::string_view what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing " + std::string(what) + ": " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require(const fs::path& path, std::string_view what, std::string_view hint) {
  if (!fs::exists(path)) {
    throw Error("missing " + std::string(what) + ": " + path.string() + " (" + std::string(hint) +
                ")");
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// -------------------------------------------------------------- config JSON

[[noreturn]] void config_error(std::string_view key, std::string_view what) {
  throw Error("config: '" + std::string(key) + "' " + std::string(what));
}

void check_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!obj.is_object()) config_error(where, "must be an object");
  for (const auto& [k, v] : obj.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      config_error(std::string(where).empty() ? k : std::string(where) + "." + k, "is not a known key");
    }
  }
}

template <typename T>
void read(const json& obj, std::string_view key, std::string_view where, T& out) {
  if (!obj.contains(key)) return;
  const auto full = std::string(where).empty() ? std::string(key) : std::string(where) + "." + std::string(key);
  try {
    const auto& v = obj.at(std::string(key));
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) config_error(full, "must be a number");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0)) {
        config_error(full, "must be a non-negative integer");
      }
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) config_error(full, "must be a string");
    }
    out = v.get<T>();
  } catch (const json::exception& e) {
    config_error(full, std::string("has the wrong type: ") + e.what());
  }
}

void read_train(const json& obj, std::string_view where, TrainConfig& cfg) {
  check_keys(obj, where,
             {"mode", "C", "epsilon", "negatives", "max_epochs", "tolerance",
              "violation_tolerance", "pair_cap"});
  std::string mode(mode_name(cfg.mode));
  read(obj, "mode", where, mode);
  cfg.mode = parse_mode(mode);
  read(obj, "C", where, cfg.C);
  read(obj, "epsilon", where, cfg.epsilon);
  read(obj, "negatives", where, cfg.negatives);
  read(obj, "max_epochs", where, cfg.max_epochs);
  read(obj, "tolerance", where, cfg.tolerance);
  read(obj, "violation_tolerance", where, cfg.violation_tolerance);
  read(obj, "pair_cap", where, cfg.pair_cap);
}

FeatureGroup group_of(const std::string& name, std::string_view where) {
  const auto g = parse_group(name);
  if (!g) config_error(where, "names unknown feature group '" + name + "'");
  return *g;
}

// "a.b.c=value": value is parsed as JSON when possible, else taken as a string.
void apply_override(json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error("override '" + assignment + "' is not of the form key=value");
  }
  const auto key = assignment.substr(0, eq);
  const auto text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw Error("override '" + assignment + "' has an empty key segment");
    if (!node->is_object()) throw Error("override '" + assignment + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

std::vector<QaInstance> gold_instances(const std::vector<QaInstance>& xs) {
  std::vector<QaInstance> out;
  for (const auto& x : xs) {
    if (x.gold) out.push_back(x);
  }
  return out;
}

// ------------------------------------------------------------ bundle codec

constexpr std::string_view kBundleMagic = "FRCORPUS";
constexpr std::uint32_t kBundleVersion = 1;

void put_strings(std::ostream& out, const std::vector<std::string>& xs) {
  bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(xs.size()));
  for (const auto& s : xs) bin::put_string(out, s);
}

std::vector<std::string> get_strings(std::istream& in) {
  const auto n = bin::get<std::uint32_t>(in);
  std::vector<std::string> xs;
  xs.reserve(std::min<std::uint32_t>(n, 1u << 16));
  for (std::uint32_t i = 0; i < n; ++i) xs.push_back(bin::get_string(in));
  return xs;
}

void put_text(std::ostream& out, const ProcessedText& t) {
  put_strings(out, t.tokens);
  put_strings(out, t.lemmas);
  for (bool b : t.content_mask) bin::put<std::uint8_t>(out, b ? 1 : 0);
}

ProcessedText get_text(std::istream& in) {
  ProcessedText t;
  t.tokens = get_strings(in);
  t.lemmas = get_strings(in);
  if (t.lemmas.size() != t.tokens.size()) throw Error("token/lemma count mismatch");
  t.content_mask.resize(t.tokens.size());
  for (std::size_t i = 0; i < t.tokens.size(); ++i) t.content_mask[i] = bin::get<std::uint8_t>(in) != 0;
  return t;
}

void put_instances(std::ostream& out, const std::vector<QaInstance>& xs) {
  bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(xs.size()));
  for (const auto& qa : xs) {
    bin::put_string(out, qa.id);
    bin::put_string(out, qa.question);
    bin::put_string(out, qa.answer);
    put_strings(out, qa.distractors);
    bin::put<std::uint8_t>(out, qa.gold ? 1 : 0);
    if (qa.gold) {
      bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(qa.gold->size()));
      for (const auto& e : qa.gold->entries) {
        bin::put_string(out, e.fact_id);
        bin::put<std::uint8_t>(out, static_cast<std::uint8_t>(e.role));
      }
    }
    put_text(out, qa.processed_question);
    put_text(out, qa.processed_answer);
    bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(qa.processed_distractors.size()));
    for (const auto& d : qa.processed_distractors) put_text(out, d);
  }
}

std::vector<QaInstance> get_instances(std::istream& in, const Tablestore& store) {
  const auto n = bin::get<std::uint32_t>(in);
  std::vector<QaInstance> xs;
  for (std::uint32_t i = 0; i < n; ++i) {
    QaInstance qa;
    qa.id = bin::get_string(in);
    qa.question = bin::get_string(in);
    qa.answer = bin::get_string(in);
    qa.distractors = get_strings(in);
    if (bin::get<std::uint8_t>(in) != 0) {
      GoldExplanation gold;
      const auto m = bin::get<std::uint32_t>(in);
      if (m > GoldExplanation::kMaxLength) throw Error("gold explanation too long");
      for (std::uint32_t j = 0; j < m; ++j) {
        GoldEntry e;
        e.fact_id = bin::get_string(in);
        const auto role = bin::get<std::uint8_t>(in);
        if (role > 2) throw Error("bad role byte");
        e.role = static_cast<Role>(role);
        if (!store.find(e.fact_id)) throw Error("gold fact '" + e.fact_id + "' not in store");
        gold.entries.push_back(std::move(e));
      }
      qa.gold = std::move(gold);
    }
    qa.processed_question = get_text(in);
    qa.processed_answer = get_text(in);
    const auto d = bin::get<std::uint32_t>(in);
    for (std::uint32_t j = 0; j < d; ++j) qa.processed_distractors.push_back(get_text(in));
    xs.push_back(std::move(qa));
  }
  return xs;
}

std::vector<RankedExplanation> iterated_ranks(const RunConfig& config, const Corpus& corpus,
                                              std::string_view split, const Artifacts& out) {
  const auto path = out.tfidf_ranks(split);
  if (fs::exists(path)) {
    spdlog::info("reading cached TF-IDF ranks {}", path.string());
    auto cached = read_ranking_dump(path, corpus.store);
    if (cached.size() == corpus.split(split).size()) return cached;
    spdlog::warn("{} does not cover split '{}'; recomputing", path.string(), split);
  }
  auto ranks = tfidf_rankings(corpus, split, "tfidf-iterated", config.iterated_depth);
  write_ranking_dump(path, ranks, corpus.store);
  return ranks;
}

}  // namespace

// ------------------------------------------------------------------- config

RunConfig RunConfig::from_json_text(std::string_view text, const fs::path& base_dir,
                                    const std::vector<std::string>& overrides) {
  json root = json::parse(text, nullptr, false, true);
  if (root.is_discarded()) throw Error("config: not valid JSON");
  if (!root.is_object()) throw Error("config: top level must be an object");
  for (const auto& o : overrides) apply_override(root, o);

  check_keys(root, "",
             {"seed", "paths", "tables", "features", "tfidf", "train", "pointwise", "pairwise",
              "tune", "eval", "ablation"});
  RunConfig c;
  if (!root.contains("seed")) throw Error("config: 'seed' is required");
  read(root, "seed", "", c.seed);

  const auto resolve = [&](const std::string& p) -> fs::path {
    if (p.empty()) return {};
    const fs::path path(p);
    return path.is_absolute() ? path : (base_dir / path).lexically_normal();
  };
  if (root.contains("paths")) {
    const auto& p = root["paths"];
    check_keys(p, "paths",
               {"tablestore", "train", "dev", "test", "concepts", "triples", "embeddings",
                "lexicon", "stopwords", "verbs", "out"});
    const auto path_field = [&](std::string_view key, fs::path& out) {
      std::string s;
      read(p, key, "paths", s);
      if (p.contains(key)) out = resolve(s);
    };
    path_field("tablestore", c.paths.tablestore);
    path_field("train", c.paths.train);
    path_field("dev", c.paths.dev);
    path_field("test", c.paths.test);
    path_field("concepts", c.paths.concepts);
    path_field("triples", c.paths.triples);
    path_field("embeddings", c.paths.embeddings);
    path_field("lexicon", c.paths.lexicon);
    path_field("stopwords", c.paths.stopwords);
    path_field("verbs", c.paths.verbs);
    path_field("out", c.paths.out);
  }
  if (!root.contains("paths") || !root["paths"].contains("out")) c.paths.out = resolve("out");

  if (root.contains("tables")) {
    const auto& t = root["tables"];
    check_keys(t, "tables", {"id_column", "content_columns"});
    read(t, "id_column", "tables", c.tables.id_column);
    if (t.contains("content_columns")) {
      try {
        c.tables.content_columns =
            t["content_columns"].get<std::map<std::string, std::vector<std::string>>>();
      } catch (const json::exception&) {
        config_error("tables.content_columns", "must map table names to column lists");
      }
    }
  }

  if (root.contains("features")) {
    const auto& f = root["features"];
    check_keys(f, "features", {"groups", "concept_cutoff", "rank_ceiling", "embedding_mode"});
    if (f.contains("groups")) {
      if (!f["groups"].is_array()) config_error("features.groups", "must be a list");
      c.features.groups = GroupSet{};
      for (const auto& g : f["groups"]) {
        if (!g.is_string()) config_error("features.groups", "must list group names");
        c.features.groups.insert(group_of(g.get<std::string>(), "features.groups"));
      }
    }
    read(f, "concept_cutoff", "features", c.features.concept_cutoff);
    read(f, "rank_ceiling", "features", c.features.rank_ceiling);
    std::string mode = "triple";
    read(f, "embedding_mode", "features", mode);
    if (mode == "triple") {
      c.features.embedding_mode = EmbeddingMode::kTriple;
    } else if (mode == "separate") {
      c.features.embedding_mode = EmbeddingMode::kSeparate;
    } else {
      config_error("features.embedding_mode", "must be 'triple' or 'separate'");
    }
  }

  if (root.contains("tfidf")) {
    check_keys(root["tfidf"], "tfidf", {"iterated_depth"});
    read(root["tfidf"], "iterated_depth", "tfidf", c.iterated_depth);
  }

  if (root.contains("train")) read_train(root["train"], "train", c.train);
  c.train.seed = c.seed;
  c.pointwise = c.train;
  c.pointwise.mode = TrainMode::kPointwise;
  if (root.contains("pointwise")) read_train(root["pointwise"], "pointwise", c.pointwise);
  c.pointwise.mode = TrainMode::kPointwise;
  c.pairwise = c.train;
  c.pairwise.mode = TrainMode::kPairwise;
  if (root.contains("pairwise")) read_train(root["pairwise"], "pairwise", c.pairwise);
  c.pairwise.mode = TrainMode::kPairwise;

  c.tune_grid = {{c.train.C}, {c.train.negatives}};
  if (root.contains("tune")) {
    const auto& t = root["tune"];
    check_keys(t, "tune", {"C", "negatives"});
    try {
      if (t.contains("C")) c.tune_grid.C = t["C"].get<std::vector<double>>();
      if (t.contains("negatives")) c.tune_grid.negatives = t["negatives"].get<std::vector<std::size_t>>();
    } catch (const json::exception&) {
      config_error("tune", "grids must be numeric lists");
    }
  }

  if (root.contains("eval")) {
    const auto& e = root["eval"];
    check_keys(e, "eval", {"split", "k_grid"});
    read(e, "split", "eval", c.eval_split);
    if (e.contains("k_grid")) {
      try {
        c.k_grid = e["k_grid"].get<std::vector<std::size_t>>();
      } catch (const json::exception&) {
        config_error("eval.k_grid", "must be a list of positive integers");
      }
    }
  }

  c.ablation.base = FeatureGroup::kLex;
  c.ablation.addons = {FeatureGroup::kConcept, FeatureGroup::kOpenIe, FeatureGroup::kMultihop,
                       FeatureGroup::kTfidfRank, FeatureGroup::kEmbed};
  c.ablation.learners = {"pointwise", "pairwise"};
  if (root.contains("ablation")) {
    const auto& a = root["ablation"];
    check_keys(a, "ablation", {"base", "addons", "learners"});
    std::string base(group_name(c.ablation.base));
    read(a, "base", "ablation", base);
    c.ablation.base = group_of(base, "ablation.base");
    try {
      if (a.contains("addons")) {
        c.ablation.addons.clear();
        for (const auto& g : a["addons"].get<std::vector<std::string>>()) {
          c.ablation.addons.push_back(group_of(g, "ablation.addons"));
        }
      }
      if (a.contains("learners")) c.ablation.learners = a["learners"].get<std::vector<std::string>>();
    } catch (const json::exception&) {
      config_error("ablation", "addons and learners must be string lists");
    }
    for (const auto& l : c.ablation.learners) parse_mode(l);
  }

  try {
    c.train.validate();
    c.pointwise.validate();
    c.pairwise.validate();
  } catch (const std::invalid_argument& e) {
    throw Error(std::string("config: ") + e.what());
  }
  if (c.k_grid.empty() || std::count(c.k_grid.begin(), c.k_grid.end(), 0u) > 0) {
    config_error("eval.k_grid", "must be a non-empty list of positive integers");
  }
  if (c.eval_split != "train" && c.eval_split != "dev" && c.eval_split != "test") {
    config_error("eval.split", "must be train, dev or test");
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& path, const std::vector<std::string>& overrides) {
  const auto text = read_file(path, "config file");
  try {
    return from_json_text(text, path.parent_path(), overrides);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void RunConfig::validate() const {
  const auto need = [](const fs::path& p, std::string_view what) {
    if (p.empty()) throw Error("config: no " + std::string(what) + " path given");
    if (!fs::exists(p)) throw Error(std::string(what) + " not found: " + p.string());
  };
  const auto maybe = [](const fs::path& p, std::string_view what) {
    if (!p.empty() && !fs::exists(p)) throw Error(std::string(what) + " not found: " + p.string());
  };
  need(paths.tablestore, "tablestore directory");
  need(paths.train, "train split");
  need(paths.dev, "dev split");
  maybe(paths.test, "test split");
  maybe(paths.lexicon, "lexicon");
  maybe(paths.stopwords, "stopword list");
  maybe(paths.verbs, "verb lexicon");
  GroupSet used = features.groups;
  for (auto g : ablation.addons) used.insert(g);
  used.insert(ablation.base);
  if (used.contains(FeatureGroup::kConcept)) need(paths.concepts, "concept resource");
  if (used.contains(FeatureGroup::kOpenIe)) need(paths.triples, "triple resource");
  if (used.contains(FeatureGroup::kEmbed)) need(paths.embeddings, "embedding resource");
}

fs::path RunConfig::split_path(std::string_view split) const {
  if (split == "train") return paths.train;
  if (split == "dev") return paths.dev;
  if (split == "test") return paths.test;
  throw Error("unknown split '" + std::string(split) + "' (train|dev|test)");
}

// ------------------------------------------------------------------- corpus

const std::vector<QaInstance>& Corpus::split(std::string_view name) const {
  if (name == "train") return splits.train;
  if (name == "dev") return splits.dev;
  if (name == "test") return splits.test;
  throw Error("unknown split '" + std::string(name) + "' (train|dev|test)");
}

TextProcessor make_processor(const RunConfig& config) {
  auto lemmatizer =
      config.paths.lexicon.empty() ? Lemmatizer() : Lemmatizer::from_file(config.paths.lexicon);
  auto stopwords = config.paths.stopwords.empty() ? WordList::default_stopwords()
                                                  : WordList::from_file(config.paths.stopwords);
  return TextProcessor(std::move(lemmatizer), std::move(stopwords));
}

Corpus load_corpus(const RunConfig& config) {
  const auto processor = make_processor(config);
  Corpus c{load_tablestore(config.paths.tablestore, config.tables), {}};
  c.store.process(processor);
  const auto load = [&](const fs::path& p) {
    auto xs = load_split(p, c.store);
    for (auto& qa : xs) qa.process(processor);
    return xs;
  };
  c.splits.train = load(config.paths.train);
  c.splits.dev = load(config.paths.dev);
  if (!config.paths.test.empty()) c.splits.test = load(config.paths.test);
  c.splits.check_disjoint();
  return c;
}

void write_bundle(const fs::path& path, const Corpus& corpus) {
  std::ostringstream out(std::ios::binary);
  bin::put_magic(out, kBundleMagic);
  bin::put<std::uint32_t>(out, kBundleVersion);
  bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(corpus.store.size()));
  for (const auto& f : corpus.store.facts()) {
    bin::put_string(out, f.id);
    bin::put_string(out, f.table);
    bin::put_string(out, f.text);
    put_text(out, f.processed);
  }
  put_instances(out, corpus.splits.train);
  put_instances(out, corpus.splits.dev);
  put_instances(out, corpus.splits.test);
  tsv::write_file(path, out.str());
}

Corpus read_bundle(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing corpus bundle: " + path.string() + " (run `factrank ingest` first)");
  try {
    bin::expect_magic(in, kBundleMagic, "corpus bundle");
    const auto version = bin::get<std::uint32_t>(in);
    if (version != kBundleVersion) throw Error("unsupported bundle version " + std::to_string(version));
    const auto n = bin::get<std::uint32_t>(in);
    std::vector<Fact> facts;
    facts.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      Fact f;
      f.id = bin::get_string(in);
      f.table = bin::get_string(in);
      f.text = bin::get_string(in);
      f.processed = get_text(in);
      facts.push_back(std::move(f));
    }
    Corpus c{Tablestore(std::move(facts)), {}};
    c.splits.train = get_instances(in, c.store);
    c.splits.dev = get_instances(in, c.store);
    c.splits.test = get_instances(in, c.store);
    if (in.peek() != std::char_traits<char>::eof()) throw Error("trailing bytes");
    c.splits.check_disjoint();
    return c;
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- artifacts

fs::path Artifacts::tfidf_ranks(std::string_view split) const {
  return root / "tfidf" / ("iterated." + std::string(split) + ".tsv");
}

fs::path Artifacts::predictions(std::string_view system, std::string_view split) const {
  return root / "predictions" / (std::string(system) + "." + std::string(split) + ".tsv");
}

fs::path Artifacts::eval_json(std::string_view system, std::string_view split) const {
  return root / "eval" / (std::string(system) + "." + std::string(split) + ".json");
}

fs::path Artifacts::eval_curves(std::string_view system, std::string_view split) const {
  return root / "eval" / (std::string(system) + "." + std::string(split) + ".curves.csv");
}

fs::path Artifacts::eval_by_length(std::string_view system, std::string_view split) const {
  return root / "eval" / (std::string(system) + "." + std::string(split) + ".by_length.csv");
}

// -------------------------------------------------------------------- tfidf

std::vector<RankedExplanation> tfidf_rankings(const Corpus& corpus, std::string_view split,
                                              std::string_view system, std::size_t depth) {
  const auto& xs = corpus.split(split);
  const auto& store = corpus.store;
  std::vector<RankedExplanation> out(xs.size());
  if (system == "tfidf-baseline") {
    const auto model = TfidfModel::fit(store, TermView::kSurface);
    parallel_for(xs.size(), [&](std::size_t i) { out[i] = rank_baseline(xs[i], model, store); });
  } else if (system == "tfidf-optimized") {
    const auto model = TfidfModel::fit(store, TermView::kContentLemmas);
    parallel_for(xs.size(), [&](std::size_t i) { out[i] = rank_optimized(xs[i], model, store); });
  } else if (system == "tfidf-iterated") {
    const auto model = TfidfModel::fit(store, TermView::kContentLemmas);
    const auto d = depth == 0 ? store.size() : std::min(depth, store.size());
    parallel_for(xs.size(), [&](std::size_t i) { out[i] = rank_iterated(xs[i], model, store, d); });
  } else {
    throw Error("unknown TF-IDF system '" + std::string(system) + "'");
  }
  spdlog::info("{}: ranked {} instances of '{}'", system, xs.size(), split);
  return out;
}

// ---------------------------------------------------------------- resources

ResourceSet load_resources(const RunConfig& config, const Corpus& corpus, const Artifacts& out) {
  ResourceSet r;
  const auto& groups = config.features.groups;
  if (groups.contains(FeatureGroup::kConcept)) {
    r.concepts = std::make_unique<ConceptResource>(ConceptResource::load(config.paths.concepts));
    spdlog::info("concept resource: {} terms", r.concepts->size());
  }
  if (groups.contains(FeatureGroup::kOpenIe)) {
    r.triples = std::make_unique<TripleResource>(TripleResource::load(config.paths.triples));
    spdlog::info("triple resource: {} sentences", r.triples->size());
  }
  if (groups.contains(FeatureGroup::kEmbed)) {
    r.embeddings =
        std::make_unique<EmbeddingResource>(EmbeddingResource::load(config.paths.embeddings));
    spdlog::info("embedding resource: {} vectors", r.embeddings->size());
  }
  r.verbs = config.paths.verbs.empty() ? WordList::default_verbs()
                                       : WordList::from_file(config.paths.verbs);
  if (groups.contains(FeatureGroup::kTfidfRank)) {
    for (std::string_view split : {"train", "dev", "test"}) {
      if (corpus.split(split).empty()) continue;
      r.ranks.emplace(std::string(split),
                      RankTable(iterated_ranks(config, corpus, split, out), corpus.store.size()));
    }
  }
  return r;
}

// --------------------------------------------------------------- experiment

Experiment::Experiment(const RunConfig& config, const Corpus& corpus, const ResourceSet& resources)
    : config_(config), corpus_(corpus), resources_(resources) {}

FeatureResources Experiment::feature_resources(std::string_view split) const {
  FeatureResources r;
  r.concepts = resources_.concepts.get();
  r.triples = resources_.triples.get();
  r.embeddings = resources_.embeddings.get();
  r.verbs = &resources_.verbs;
  if (auto it = resources_.ranks.find(split); it != resources_.ranks.end()) r.tfidf_ranks = &it->second;
  return r;
}

TrainedSystem Experiment::train(GroupSet groups, const TrainConfig& config) const {
  const auto& store = corpus_.store;
  FeatureConfig fc = config_.features;
  fc.groups = groups;
  FeatureExtractor extractor(fc, feature_resources("train"));

  std::vector<CandidateSet> candidates;
  std::vector<const QaInstance*> used;
  for (const auto& qa : corpus_.splits.train) {
    if (!qa.gold) continue;
    CandidateSet c{&qa, sample_negatives(qa, store, config.negatives, config.seed)};
    for (const auto& e : qa.gold->entries) c.facts.push_back(*store.find(e.fact_id));
    std::sort(c.facts.begin(), c.facts.end());
    candidates.push_back(std::move(c));
  }
  if (candidates.empty()) throw Error("training split has no instances with gold explanations");

  TrainedSystem sys;
  sys.space = build_space(extractor, store, candidates);
  spdlog::info("feature space ({}): {} features", groups.to_string(), sys.space.size());
  for (auto g : kAllGroups) {
    if (sys.space.group_size(g) > 0) {
      spdlog::info("  {}: {}", group_name(g), sys.space.group_size(g));
    }
  }

  std::vector<QueryGroup> qgroups(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t i) {
    const auto& c = candidates[i];
    const auto targets = assign_rank_targets(*c.qa->gold, store);
    auto& g = qgroups[i];
    g.qa_id = c.qa->id;
    for (auto f : c.facts) {
      g.vectors.push_back(extractor.assemble(*c.qa, store[f], f, sys.space));
      g.targets.push_back(targets[f]);
    }
  });
  sys.model = factrank::train(qgroups, sys.space.size(), config);
  sys.coverage = extractor.coverage();
  return sys;
}

std::vector<RankedExplanation> Experiment::predict(const TrainedSystem& system,
                                                   std::string_view split, GroupSet groups) const {
  const auto& store = corpus_.store;
  const auto& xs = corpus_.split(split);
  FeatureConfig fc = config_.features;
  fc.groups = groups;
  FeatureExtractor extractor(fc, feature_resources(split));
  if (system.model.weights.size() != system.space.size()) {
    throw Error("model dimension " + std::to_string(system.model.weights.size()) +
                " does not match feature space size " + std::to_string(system.space.size()));
  }
  std::vector<RankedExplanation> out(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) {
    std::vector<FeatureVector> vectors(store.size());
    for (std::size_t f = 0; f < store.size(); ++f) {
      vectors[f] = extractor.assemble(xs[i], store[f], f, system.space);
    }
    out[i] = rank_tablestore(system.model, xs[i].id, vectors, store);
  });
  const auto cov = extractor.coverage();
  if (cov.embedding_misses > 0) {
    spdlog::warn("{}: {} of {} embedding lookups missed", split, cov.embedding_misses,
                 cov.embedding_lookups);
  }
  return out;
}

double Experiment::split_map(const TrainedSystem& system, std::string_view split,
                             GroupSet groups) const {
  const auto& xs = corpus_.split(split);
  if (std::none_of(xs.begin(), xs.end(), [](const QaInstance& qa) { return qa.gold.has_value(); })) {
    return std::nan("");
  }
  return evaluate(predict(system, split, groups), xs, corpus_.store, config_.k_grid).map;
}

// ------------------------------------------------------------------- stages

namespace {

Artifacts artifacts(const RunConfig& config) { return Artifacts{config.paths.out}; }

json coverage_json(const CoverageReport& c) {
  return {{"concept", {{"lookups", c.concept_lookups}, {"misses", c.concept_misses}}},
          {"openie", {{"lookups", c.openie_lookups}, {"misses", c.openie_misses}}},
          {"embedding", {{"lookups", c.embedding_lookups}, {"misses", c.embedding_misses}}},
          {"tfidf_rank", {{"lookups", c.rank_lookups}, {"misses", c.rank_misses}}}};
}

json train_json(const TrainConfig& t) {
  return {{"mode", std::string(mode_name(t.mode))},
          {"C", t.C},
          {"epsilon", t.epsilon},
          {"negatives", t.negatives},
          {"max_epochs", t.max_epochs},
          {"tolerance", t.tolerance},
          {"violation_tolerance", t.violation_tolerance},
          {"pair_cap", t.pair_cap}};
}

void check_system(std::string_view system) {
  if (std::find(std::begin(kSystems), std::end(kSystems), system) == std::end(kSystems)) {
    throw Error("unknown system '" + std::string(system) +
                "' (model|tfidf-baseline|tfidf-optimized|tfidf-iterated)");
  }
}

}  // namespace

CorpusStats run_ingest(const RunConfig& config) {
  config.validate();
  const auto out = artifacts(config);
  const auto corpus = load_corpus(config);
  write_bundle(out.bundle(), corpus);
  std::vector<QaInstance> annotated = corpus.splits.train;
  annotated.insert(annotated.end(), corpus.splits.dev.begin(), corpus.splits.dev.end());
  auto stats = corpus_stats(annotated, corpus.store);
  std::string text = "facts\t" + std::to_string(corpus.store.size()) + "\n";
  text += "train\t" + std::to_string(corpus.splits.train.size()) + "\n";
  text += "dev\t" + std::to_string(corpus.splits.dev.size()) + "\n";
  text += "test\t" + std::to_string(corpus.splits.test.size()) + "\n";
  text += format_stats(stats);
  tsv::write_file(out.stats(), text);
  spdlog::info("wrote {} ({} facts)", out.bundle().string(), corpus.store.size());
  return stats;
}

void run_train(const RunConfig& config) {
  config.validate();
  const auto out = artifacts(config);
  const auto corpus = read_bundle(out.bundle());
  const auto resources = load_resources(config, corpus, out);
  const Experiment experiment(config, corpus, resources);
  const auto sys = experiment.train(config.features.groups, config.train);

  sys.model.save(out.model());
  tsv::write_file(out.space(), sys.space.format());
  json meta;
  meta["created_utc"] = utc_timestamp();
  meta["train"] = train_json(config.train);
  meta["seed"] = config.seed;
  meta["groups"] = config.features.groups.to_string();
  meta["dimension"] = sys.space.size();
  for (auto g : kAllGroups) meta["group_sizes"][std::string(group_name(g))] = sys.space.group_size(g);
  meta["epochs"] = sys.model.epochs;
  meta["objective_history"] = sys.model.objective_history;
  meta["coverage"] = coverage_json(sys.coverage);
  meta["config_digest"] = sys.model.config_digest;
  tsv::write_file(out.train_meta(), meta.dump(2) + "\n");
  spdlog::info("wrote {}", out.model().string());
}

void run_predict(const RunConfig& config, std::string_view system, std::string_view split) {
  check_system(system);
  config.validate();
  const auto out = artifacts(config);
  const auto corpus = read_bundle(out.bundle());
  std::vector<RankedExplanation> rankings;
  if (system == "model") {
    require(out.model(), "model", "run `factrank train` first");
    require(out.space(), "feature space", "run `factrank train` first");
    TrainedSystem sys{FeatureSpace::parse(read_file(out.space(), "feature space")),
                      LinearModel::load(out.model()), {}};
    const auto resources = load_resources(config, corpus, out);
    const Experiment experiment(config, corpus, resources);
    rankings = experiment.predict(sys, split, config.features.groups);
  } else if (system == "tfidf-iterated") {
    rankings = iterated_ranks(config, corpus, split, out);
  } else {
    rankings = tfidf_rankings(corpus, split, system, config.iterated_depth);
  }
  write_ranking_dump(out.predictions(system, split), rankings, corpus.store);
  spdlog::info("wrote {}", out.predictions(system, split).string());
}

EvalReport run_evaluate(const RunConfig& config, std::string_view system, std::string_view split) {
  check_system(system);
  const auto out = artifacts(config);
  const auto corpus = read_bundle(out.bundle());
  const auto preds = out.predictions(system, split);
  require(preds, "predictions",
          "run `factrank predict --system " + std::string(system) + " --split " +
              std::string(split) + "` first");
  const auto& xs = corpus.split(split);
  if (std::none_of(xs.begin(), xs.end(), [](const QaInstance& qa) { return qa.gold.has_value(); })) {
    throw Error("split '" + std::string(split) + "' has no gold explanations to evaluate against");
  }
  const auto report = evaluate(read_ranking_dump(preds, corpus.store), xs, corpus.store,
                               config.k_grid, std::string(system));
  tsv::write_file(out.eval_json(system, split), report.to_json());
  tsv::write_file(out.eval_curves(system, split), report.curves_csv());
  tsv::write_file(out.eval_by_length(system, split), report.by_length_csv());
  spdlog::info("{} on {}: mAP {:.4f} over {} instances", system, split, report.map,
               report.ap.size());
  return report;
}

TuneResult run_tune(const RunConfig& config) {
  config.validate();
  const auto out = artifacts(config);
  const auto corpus = read_bundle(out.bundle());
  const auto resources = load_resources(config, corpus, out);
  const Experiment experiment(config, corpus, resources);
  const auto groups = config.features.groups;
  auto result = tune(config.tune_grid, config.train, [&](const TrainConfig& cfg) {
    return experiment.split_map(experiment.train(groups, cfg), config.eval_split, groups);
  });

  std::string table = "C\tnegatives\t" + config.eval_split + "_map\n";
  char buf[96];
  for (const auto& p : result.table) {
    std::snprintf(buf, sizeof buf, "%.17g\t%zu\t%.10f\n", p.C, p.negatives, p.dev_map);
    table += buf;
  }
  tsv::write_file(out.tune_table(), table);
  json best;
  best["train"] = train_json(result.best);
  best["seed"] = config.seed;
  best["split"] = config.eval_split;
  best["map"] = result.best_map;
  tsv::write_file(out.tune_best(), best.dump(2) + "\n");
  return result;
}

std::vector<AblationRow> run_ablate(const RunConfig& config) {
  config.validate();
  const auto out = artifacts(config);
  const auto corpus = read_bundle(out.bundle());
  RunConfig wide = config;
  wide.features.groups = GroupSet{config.ablation.base};
  for (auto g : config.ablation.addons) wide.features.groups.insert(g);
  const auto resources = load_resources(wide, corpus, out);
  const Experiment experiment(wide, corpus, resources);
  const auto rows = ablation_run(config.ablation, [&](const GroupSet& groups, const std::string& learner) {
    const auto& cfg = parse_mode(learner) == TrainMode::kPointwise ? config.pointwise : config.pairwise;
    const auto sys = experiment.train(groups, cfg);
    const double dev = experiment.split_map(sys, "dev", groups);
    const double test = experiment.split_map(sys, "test", groups);
    spdlog::info("ablation {} / {}: dev {:.4f} test {:.4f}", groups.to_string(), learner, dev, test);
    return std::pair{dev, test};
  });
  tsv::write_file(out.ablation(), format_ablation_csv(rows));
  return rows;
}

void run_report(const RunConfig& config) {
  const auto out = artifacts(config);
  const auto corpus = read_bundle(out.bundle());
  const auto dir = out.report_dir();
  std::vector<QaInstance> annotated = gold_instances(corpus.splits.train);
  const auto dev = gold_instances(corpus.splits.dev);
  annotated.insert(annotated.end(), dev.begin(), dev.end());
  const auto stats = corpus_stats(annotated, corpus.store);
  char buf[256];

  std::string hist = "gold_length,instances\n";
  for (const auto& [len, n] : stats.length_histogram) {
    std::snprintf(buf, sizeof buf, "%zu,%zu\n", len, n);
    hist += buf;
  }
  tsv::write_file(dir / "length_histogram.csv", hist);

  std::string shares = "table,percentage\n";
  for (const auto& [table, pct] : stats.table_shares) {
    std::snprintf(buf, sizeof buf, ",%.4f\n", pct);
    shares += table + buf;
  }
  tsv::write_file(dir / "table_shares.csv", shares);

  // Share of each table among the facts found at each gold position.
  std::map<std::size_t, std::map<std::string, std::size_t>> by_position;
  std::map<std::size_t, std::size_t> position_totals;
  for (const auto& qa : annotated) {
    for (std::size_t i = 0; i < qa.gold->size(); ++i) {
      ++by_position[i + 1][corpus.store.at(qa.gold->entries[i].fact_id).table];
      ++position_totals[i + 1];
    }
  }
  std::string props = "position,table,count,proportion\n";
  for (const auto& [pos, tables] : by_position) {
    for (const auto& [table, n] : tables) {
      std::snprintf(buf, sizeof buf, "%zu,%s,%zu,%.6f\n", pos, table.c_str(), n,
                    static_cast<double>(n) / static_cast<double>(position_totals[pos]));
      props += buf;
    }
  }
  tsv::write_file(dir / "table_rank_proportions.csv", props);

  std::string curves = "system,split,variant,k,precision,recall\n";
  std::string lengths = "system,split,gold_length,map\n";
  std::size_t found = 0;
  for (auto system : kSystems) {
    for (std::string_view split : {"train", "dev", "test"}) {
      const auto path = out.eval_json(system, split);
      if (!fs::exists(path)) continue;
      ++found;
      const auto j = json::parse(read_file(path, "evaluation report"));
      const std::string prefix = std::string(system) + "," + std::string(split) + ",";
      for (std::string_view variant : {"exact_position", "set_based"}) {
        for (const auto& p : j.at("curves").at(std::string(variant))) {
          std::snprintf(buf, sizeof buf, ",%zu,%.10f,%.10f\n", p.at("k").get<std::size_t>(),
                        p.at("precision").get<double>(), p.at("recall").get<double>());
          curves += prefix + std::string(variant) + buf;
        }
      }
      for (const auto& [len, m] : j.at("map_by_length").items()) {
        std::snprintf(buf, sizeof buf, ",%.10f\n", m.get<double>());
        lengths += prefix + len + buf;
      }
    }
  }
  if (found == 0) spdlog::warn("no evaluation reports under {}; curve files hold headers only", out.root.string());
  tsv::write_file(dir / "pr_curves.csv", curves);
  tsv::write_file(dir / "map_by_length.csv", lengths);
  tsv::write_file(dir / "corpus_stats.txt", format_stats(stats));
  spdlog::info("wrote report files under {}", dir.string());
}

}  // namespace factrank
