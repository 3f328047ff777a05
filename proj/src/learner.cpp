#include "factrank/learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "factrank/binary_io.hpp"
#include "factrank/error.hpp"
#include "factrank/tsv.hpp"

namespace factrank {

namespace {

constexpr std::string_view kModelMagic = "FRMODEL1";
constexpr std::uint32_t kModelVersion = 1;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

double sparse_dot(const FeatureVector& a, const FeatureVector& b) {
  double s = 0.0;
  auto i = a.entries.begin();
  auto j = b.entries.begin();
  while (i != a.entries.end() && j != b.entries.end()) {
    if (i->first < j->first) {
      ++i;
    } else if (j->first < i->first) {
      ++j;
    } else {
      s += static_cast<double>(i->second) * j->second;
      ++i;
      ++j;
    }
  }
  return s;
}

void axpy(double a, const FeatureVector& x, std::span<double> w) {
  for (const auto& [i, v] : x.entries) w[i] += a * v;
}

void check_dims(std::span<const FeatureVector> xs, std::size_t dim) {
  for (const auto& x : xs) {
    if (!x.entries.empty() && x.entries.back().first >= dim) {
      throw std::invalid_argument("feature index " + std::to_string(x.entries.back().first) +
                                  " outside model dimension " + std::to_string(dim));
    }
  }
}

double squared(std::span<const double> w) {
  double s = 0.0;
  for (double v : w) s += v * v;
  return s;
}

// Epoch bookkeeping shared by both solvers: records the objective of the
// best iterate seen so far and decides when to stop.
class Progress {
 public:
  Progress(const TrainConfig& config, std::string_view what) : config_(config), what_(what) {}

  // Returns true when training should stop.
  bool end_epoch(double objective, double max_violation, std::span<const double> w, double b) {
    ++epochs_;
    if (!std::isfinite(objective)) {
      throw Error(std::string(what_) + ": objective became non-finite at epoch " +
                  std::to_string(epochs_) + " (C=" + std::to_string(config_.C) + ")");
    }
    if (objective < best_) {
      best_ = objective;
      best_w_.assign(w.begin(), w.end());
      best_b_ = b;
    }
    history_.push_back(best_);
    const bool stalled = std::isfinite(last_) &&
                         (last_ - objective) >= 0.0 &&
                         (last_ - objective) < config_.tolerance * std::max(std::abs(last_), 1e-300);
    last_ = objective;
    spdlog::debug("{} epoch {}: objective {:.10g}, max violation {:.3g}", what_, epochs_, objective,
                  max_violation);
    return max_violation < config_.violation_tolerance || stalled ||
           epochs_ >= config_.max_epochs;
  }

  LinearModel finish(std::size_t dim, TrainMode mode) {
    LinearModel m;
    m.weights = best_w_.empty() ? std::vector<double>(dim, 0.0) : std::move(best_w_);
    m.bias = best_b_;
    m.mode = mode;
    m.config_digest = config_.digest();
    m.objective_history = std::move(history_);
    m.epochs = epochs_;
    spdlog::info("{}: {} epochs, objective {:.10g}", what_, epochs_, best_);
    return m;
  }

 private:
  const TrainConfig& config_;
  std::string_view what_;
  std::size_t epochs_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
  double last_ = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> best_w_;
  double best_b_ = 0.0;
  std::vector<double> history_;
};

// Dual coordinate descent for the L1-loss linear SVM over pairs. `Pairs`
// supplies, per pair p: margin(p, w) = label * (w . d_p), norm2(p) = |d_p|^2,
// and update(p, coef, w) adding coef * label * d_p to w.
template <typename Pairs>
LinearModel solve_pairwise(const Pairs& pairs, std::size_t dim, const TrainConfig& config) {
  config.validate();
  const std::size_t n = pairs.size();
  std::vector<double> w(dim, 0.0);
  std::vector<double> alpha(n, 0.0);
  std::vector<double> q(n);
  for (std::size_t p = 0; p < n; ++p) q[p] = pairs.norm2(p);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed, "epochs/pairwise");
  Progress progress(config, "pairwise");
  const double C = config.C;

  while (true) {
    rng.shuffle(std::span(order));
    double max_violation = 0.0;
    for (auto p : order) {
      if (q[p] <= 0.0) continue;  // a zero difference cannot be separated
      const double g = pairs.margin(p, w) - 1.0;
      double pg = g;
      if (alpha[p] <= 0.0) {
        pg = std::min(g, 0.0);
      } else if (alpha[p] >= C) {
        pg = std::max(g, 0.0);
      }
      max_violation = std::max(max_violation, std::abs(pg));
      if (pg == 0.0) continue;
      const double next = std::clamp(alpha[p] - g / q[p], 0.0, C);
      const double delta = next - alpha[p];
      alpha[p] = next;
      if (delta != 0.0) pairs.update(p, delta, w);
    }
    double loss = 0.0;
    for (std::size_t p = 0; p < n; ++p) loss += std::max(0.0, 1.0 - pairs.margin(p, w));
    const double objective = 0.5 * squared(w) + C * loss;
    if (progress.end_epoch(objective, max_violation, w, 0.0)) break;
  }
  return progress.finish(dim, TrainMode::kPairwise);
}

struct MaterializedPairs {
  std::span<const LabeledDifference> pairs;

  std::size_t size() const { return pairs.size(); }
  double margin(std::size_t p, std::span<const double> w) const {
    return pairs[p].label * pairs[p].difference.dot(w);
  }
  double norm2(std::size_t p) const { return pairs[p].difference.squared_norm(); }
  void update(std::size_t p, double coef, std::span<double> w) const {
    axpy(coef * pairs[p].label, pairs[p].difference, w);
  }
};

// Pairs referenced by candidate index; differences are never built.
struct IndexedPairs {
  struct Ref {
    const FeatureVector* a;
    const FeatureVector* b;
    int label;
  };
  std::vector<Ref> refs;

  std::size_t size() const { return refs.size(); }
  double margin(std::size_t p, std::span<const double> w) const {
    const auto& r = refs[p];
    return r.label * (r.a->dot(w) - r.b->dot(w));
  }
  double norm2(std::size_t p) const {
    const auto& r = refs[p];
    return r.a->squared_norm() + r.b->squared_norm() - 2.0 * sparse_dot(*r.a, *r.b);
  }
  void update(std::size_t p, double coef, std::span<double> w) const {
    const auto& r = refs[p];
    axpy(coef * r.label, *r.a, w);
    axpy(-coef * r.label, *r.b, w);
  }
};

}  // namespace

// ------------------------------------------------------------------ targets

RankTargets assign_rank_targets(const GoldExplanation& gold, const Tablestore& store) {
  RankTargets t{std::vector<std::uint32_t>(store.size(), 1)};
  const auto n = static_cast<std::uint32_t>(gold.entries.size());
  for (std::uint32_t k = 0; k < n; ++k) {
    const auto& id = gold.entries[k].fact_id;
    const auto pos = store.find(id);
    if (!pos) throw Error("gold fact '" + id + "' is not in the tablestore");
    if (t.targets[*pos] != 1) throw Error("gold fact '" + id + "' repeats");
    t.targets[*pos] = n + 1 - k;
  }
  return t;
}

std::vector<std::size_t> sample_negatives(const QaInstance& qa, const Tablestore& store,
                                          std::size_t count, std::uint64_t seed) {
  std::vector<bool> is_gold(store.size(), false);
  if (qa.gold) {
    for (const auto& e : qa.gold->entries) {
      const auto pos = store.find(e.fact_id);
      if (!pos) throw Error("gold fact '" + e.fact_id + "' is not in the tablestore");
      is_gold[*pos] = true;
    }
  }
  std::vector<std::size_t> pool;
  pool.reserve(store.size());
  for (std::size_t f = 0; f < store.size(); ++f) {
    if (!is_gold[f]) pool.push_back(f);
  }
  if (count > pool.size()) {
    throw std::invalid_argument("cannot sample " + std::to_string(count) + " negatives for '" +
                                qa.id + "': only " + std::to_string(pool.size()) +
                                " non-gold facts");
  }
  // Partial Fisher-Yates: the first k draws do not depend on count.
  Rng rng(seed, "negatives/" + qa.id);
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

// ------------------------------------------------------------------- config

std::string_view mode_name(TrainMode mode) {
  return mode == TrainMode::kPointwise ? "pointwise" : "pairwise";
}

TrainMode parse_mode(std::string_view name) {
  if (name == "pointwise") return TrainMode::kPointwise;
  if (name == "pairwise") return TrainMode::kPairwise;
  throw Error("unknown training mode '" + std::string(name) + "' (pointwise|pairwise)");
}

void TrainConfig::validate() const {
  const auto bad = [](const std::string& what) { throw std::invalid_argument("train config: " + what); };
  if (!(C > 0.0) || !std::isfinite(C)) bad("C must be positive and finite");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) bad("epsilon must be >= 0");
  if (negatives < 1) bad("negatives must be >= 1");
  if (max_epochs < 1) bad("max_epochs must be >= 1");
  if (!(tolerance >= 0.0)) bad("tolerance must be >= 0");
  if (!(violation_tolerance > 0.0)) bad("violation_tolerance must be > 0");
  if (pair_cap < 1) bad("pair_cap must be >= 1");
}

std::string TrainConfig::canonical() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "mode=%s;C=%.17g;epsilon=%.17g;negatives=%zu;seed=%llu;max_epochs=%zu;"
                "tolerance=%.17g;violation_tolerance=%.17g;pair_cap=%zu",
                std::string(mode_name(mode)).c_str(), C, epsilon, negatives,
                static_cast<unsigned long long>(seed), max_epochs, tolerance, violation_tolerance,
                pair_cap);
  return buf;
}

std::uint64_t TrainConfig::digest() const { return fnv1a(canonical()); }

// -------------------------------------------------------------------- model

double LinearModel::score(const FeatureVector& x) const { return x.dot(weights) + bias; }

void LinearModel::save(const std::filesystem::path& path) const {
  std::ostringstream out(std::ios::binary);
  bin::put_magic(out, kModelMagic);
  bin::put<std::uint32_t>(out, kModelVersion);
  bin::put<std::uint64_t>(out, weights.size());
  bin::put<std::uint8_t>(out, static_cast<std::uint8_t>(mode));
  bin::put<std::uint64_t>(out, config_digest);
  for (double v : weights) bin::put<double>(out, v);
  bin::put<double>(out, bias);
  tsv::write_file(path, out.str());
}

LinearModel LinearModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("model file not found: " + path.string());
  try {
    bin::expect_magic(in, kModelMagic, "model");
    const auto version = bin::get<std::uint32_t>(in);
    if (version != kModelVersion) throw Error("unsupported model version " + std::to_string(version));
    const auto dim = bin::get<std::uint64_t>(in);
    const auto size = std::filesystem::file_size(path);
    if (dim > size / 8) throw Error("dimension " + std::to_string(dim) + " exceeds file size");
    LinearModel m;
    const auto mode = bin::get<std::uint8_t>(in);
    if (mode > 1) throw Error("unknown mode byte " + std::to_string(mode));
    m.mode = static_cast<TrainMode>(mode);
    m.config_digest = bin::get<std::uint64_t>(in);
    m.weights.resize(dim);
    for (auto& v : m.weights) {
      v = bin::get<double>(in);
      if (!std::isfinite(v)) throw Error("non-finite weight");
    }
    m.bias = bin::get<double>(in);
    if (!std::isfinite(m.bias)) throw Error("non-finite bias");
    if (in.peek() != std::char_traits<char>::eof()) throw Error("trailing bytes");
    return m;
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

// -------------------------------------------------------------------- pairs

std::vector<PairIndex> make_pair_indices(std::span<const double> targets, std::size_t cap,
                                         Rng& rng) {
  std::vector<PairIndex> pairs;
  for (std::uint32_t i = 0; i < targets.size(); ++i) {
    for (std::uint32_t j = i + 1; j < targets.size(); ++j) {
      if (targets[i] == targets[j]) continue;
      PairIndex p = rng.coin() ? PairIndex{i, j, 1} : PairIndex{j, i, 1};
      p.label = targets[p.first] > targets[p.second] ? 1 : -1;
      pairs.push_back(p);
    }
  }
  if (pairs.size() > cap) {
    std::vector<std::size_t> pick(pairs.size());
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    for (std::size_t i = 0; i < cap; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(pick.size() - i));
      std::swap(pick[i], pick[j]);
    }
    pick.resize(cap);
    std::sort(pick.begin(), pick.end());
    std::vector<PairIndex> kept;
    kept.reserve(cap);
    for (auto k : pick) kept.push_back(pairs[k]);
    pairs = std::move(kept);
  }
  return pairs;
}

std::vector<LabeledDifference> make_pairs(const QueryGroup& group, std::size_t cap,
                                          std::uint64_t seed) {
  Rng rng(seed, "pairs/" + group.qa_id);
  std::vector<LabeledDifference> out;
  for (const auto& p : make_pair_indices(group.targets, cap, rng)) {
    const auto& a = group.vectors[p.first].entries;
    const auto& b = group.vectors[p.second].entries;
    FeatureVector d;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() || j < b.size()) {
      if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
        d.entries.push_back(a[i++]);
      } else if (i == a.size() || b[j].first < a[i].first) {
        d.entries.emplace_back(b[j].first, -b[j].second);
        ++j;
      } else {
        const float v = a[i].second - b[j].second;
        if (v != 0.0f) d.entries.emplace_back(a[i].first, v);
        ++i;
        ++j;
      }
    }
    out.push_back({std::move(d), p.label});
  }
  return out;
}

// --------------------------------------------------------------- objectives

double svr_objective(std::span<const double> w, double b, std::span<const FeatureVector> x,
                     std::span<const double> y, double C, double epsilon) {
  double loss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    loss += std::max(0.0, std::abs(y[i] - (x[i].dot(w) + b)) - epsilon);
  }
  return 0.5 * (squared(w) + b * b) + C * loss;
}

void svr_subgradient(std::span<const double> w, double b, std::span<const FeatureVector> x,
                     std::span<const double> y, double C, double epsilon,
                     std::span<double> grad_w, double& grad_b) {
  std::copy(w.begin(), w.end(), grad_w.begin());
  grad_b = b;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (x[i].dot(w) + b);
    if (std::abs(r) <= epsilon) continue;
    const double s = r > 0.0 ? -C : C;
    axpy(s, x[i], grad_w);
    grad_b += s;
  }
}

double ranking_objective(std::span<const double> w, std::span<const LabeledDifference> pairs,
                         double C) {
  double loss = 0.0;
  for (const auto& p : pairs) loss += std::max(0.0, 1.0 - p.label * p.difference.dot(w));
  return 0.5 * squared(w) + C * loss;
}

void ranking_subgradient(std::span<const double> w, std::span<const LabeledDifference> pairs,
                         double C, std::span<double> grad_w) {
  std::copy(w.begin(), w.end(), grad_w.begin());
  for (const auto& p : pairs) {
    if (p.label * p.difference.dot(w) < 1.0) axpy(-C * p.label, p.difference, grad_w);
  }
}

// ----------------------------------------------------------------- training

LinearModel train_pointwise(std::span<const QueryGroup> groups, std::size_t dim,
                            const TrainConfig& config) {
  config.validate();
  std::vector<const FeatureVector*> xs;
  std::vector<double> ys;
  for (const auto& g : groups) {
    if (g.vectors.size() != g.targets.size()) {
      throw std::invalid_argument("query group '" + g.qa_id + "' has mismatched targets");
    }
    check_dims(g.vectors, dim);
    for (std::size_t i = 0; i < g.vectors.size(); ++i) {
      xs.push_back(&g.vectors[i]);
      ys.push_back(g.targets[i]);
    }
  }
  const std::size_t n = xs.size();
  const double C = config.C;
  const double eps = config.epsilon;
  std::vector<double> w(dim, 0.0);
  double b = 0.0;
  std::vector<double> beta(n, 0.0);
  std::vector<double> q(n);
  // The bias is an extra feature fixed at 1, hence the +1.
  for (std::size_t i = 0; i < n; ++i) q[i] = xs[i]->squared_norm() + 1.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed, "epochs/pointwise");
  Progress progress(config, "pointwise");

  while (true) {
    rng.shuffle(std::span(order));
    double max_violation = 0.0;
    for (auto i : order) {
      const double g = xs[i]->dot(w) + b - ys[i];
      const double gp = g + eps;
      const double gn = g - eps;
      double violation = 0.0;
      if (beta[i] == 0.0) {
        if (gp < 0.0) {
          violation = -gp;
        } else if (gn > 0.0) {
          violation = gn;
        }
      } else if (beta[i] >= C) {
        if (gp > 0.0) violation = gp;
      } else if (beta[i] <= -C) {
        if (gn < 0.0) violation = -gn;
      } else if (beta[i] > 0.0) {
        violation = std::abs(gp);
      } else {
        violation = std::abs(gn);
      }
      max_violation = std::max(max_violation, violation);

      double d;
      if (gp < q[i] * beta[i]) {
        d = -gp / q[i];
      } else if (gn > q[i] * beta[i]) {
        d = -gn / q[i];
      } else {
        d = -beta[i];
      }
      const double next = std::clamp(beta[i] + d, -C, C);
      const double delta = next - beta[i];
      beta[i] = next;
      if (delta != 0.0) {
        axpy(delta, *xs[i], w);
        b += delta;
      }
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      loss += std::max(0.0, std::abs(ys[i] - (xs[i]->dot(w) + b)) - eps);
    }
    const double objective = 0.5 * (squared(w) + b * b) + C * loss;
    if (progress.end_epoch(objective, max_violation, w, b)) break;
  }
  return progress.finish(dim, TrainMode::kPointwise);
}

LinearModel train_pairwise(std::span<const QueryGroup> groups, std::size_t dim,
                           const TrainConfig& config) {
  config.validate();
  IndexedPairs pairs;
  for (const auto& g : groups) {
    if (g.vectors.size() != g.targets.size()) {
      throw std::invalid_argument("query group '" + g.qa_id + "' has mismatched targets");
    }
    check_dims(g.vectors, dim);
    Rng rng(config.seed, "pairs/" + g.qa_id);
    for (const auto& p : make_pair_indices(g.targets, config.pair_cap, rng)) {
      pairs.refs.push_back({&g.vectors[p.first], &g.vectors[p.second], p.label});
    }
  }
  spdlog::debug("pairwise: {} pairs over {} queries", pairs.size(), groups.size());
  return solve_pairwise(pairs, dim, config);
}

LinearModel train_pairwise(std::span<const LabeledDifference> pairs, std::size_t dim,
                           const TrainConfig& config) {
  for (const auto& p : pairs) check_dims(std::span(&p.difference, 1), dim);
  return solve_pairwise(MaterializedPairs{pairs}, dim, config);
}

LinearModel train(std::span<const QueryGroup> groups, std::size_t dim, const TrainConfig& config) {
  return config.mode == TrainMode::kPointwise ? train_pointwise(groups, dim, config)
                                              : train_pairwise(groups, dim, config);
}

RankedExplanation rank_tablestore(const LinearModel& model, std::string_view qa_id,
                                  std::span<const FeatureVector> vectors, const Tablestore& store) {
  if (vectors.size() != store.size()) {
    throw std::invalid_argument("rank_tablestore: " + std::to_string(vectors.size()) +
                                " vectors for a store of " + std::to_string(store.size()));
  }
  check_dims(vectors, model.weights.size());
  RankedExplanation out{std::string(qa_id), {}};
  out.entries.reserve(vectors.size());
  for (std::size_t f = 0; f < vectors.size(); ++f) out.entries.push_back({f, model.score(vectors[f])});
  sort_by_score(out.entries, store);
  return out;
}

// ------------------------------------------------------------------- tuning

TuneResult tune(const TuneGrid& grid, const TrainConfig& base,
                const std::function<double(const TrainConfig&)>& dev_map) {
  if (grid.C.empty() || grid.negatives.empty()) throw std::invalid_argument("tune: empty grid");
  TuneResult result;
  bool have_best = false;
  for (double c : grid.C) {
    for (auto n : grid.negatives) {
      TrainConfig cfg = base;
      cfg.C = c;
      cfg.negatives = n;
      const double map = dev_map(cfg);
      result.table.push_back({c, n, map});
      spdlog::info("tune: C={} negatives={} dev mAP={:.6f}", c, n, map);
      if (std::isnan(map)) continue;
      const bool better =
          !have_best || map > result.best_map ||
          (map == result.best_map &&
           (c < result.best.C || (c == result.best.C && n < result.best.negatives)));
      if (better) {
        result.best = cfg;
        result.best_map = map;
        have_best = true;
      }
    }
  }
  if (!have_best) throw Error("tune: no grid point produced a finite dev mAP");
  return result;
}

}  // namespace factrank
