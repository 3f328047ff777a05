#include "factrank/eval.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "factrank/error.hpp"

namespace factrank {

double average_precision(std::span<const std::string> ranked, std::span<const std::string> gold) {
  if (gold.empty()) throw std::invalid_argument("average_precision: empty gold");
  const std::set<std::string_view> wanted(gold.begin(), gold.end());
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked.size() && hits < wanted.size(); ++i) {
    if (wanted.contains(ranked[i])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(wanted.size());
}

double mean_ap(std::span<const double> aps) {
  if (aps.empty()) return 0.0;
  double s = 0.0;
  for (double a : aps) s += a;
  return s / static_cast<double>(aps.size());
}

PrecisionRecall pr_at_k_exact(std::span<const std::string> ranked,
                              std::span<const std::string> gold, std::size_t k) {
  if (k == 0) throw std::invalid_argument("pr_at_k: k must be >= 1");
  PrecisionRecall r;
  const auto limit = std::min({k, gold.size(), ranked.size()});
  for (std::size_t i = 0; i < limit; ++i) {
    if (ranked[i] == gold[i]) ++r.hits;
  }
  r.precision = static_cast<double>(r.hits) / static_cast<double>(k);
  r.recall = gold.empty() ? 0.0 : static_cast<double>(r.hits) / static_cast<double>(gold.size());
  return r;
}

PrecisionRecall pr_at_k_set(std::span<const std::string> ranked,
                            std::span<const std::string> gold, std::size_t k) {
  if (k == 0) throw std::invalid_argument("pr_at_k: k must be >= 1");
  PrecisionRecall r;
  const std::set<std::string_view> wanted(gold.begin(), gold.end());
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
    if (wanted.contains(ranked[i])) ++r.hits;
  }
  r.precision = static_cast<double>(r.hits) / static_cast<double>(k);
  r.recall = wanted.empty() ? 0.0 : static_cast<double>(r.hits) / static_cast<double>(wanted.size());
  return r;
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("incomplete beta: a, b must be > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("incomplete beta: x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - regularized_incomplete_beta(b, a, 1.0 - x);

  const double front =
      std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
               b * std::log1p(-x)) / a;
  // Modified Lentz evaluation of the continued fraction.
  constexpr double tiny = 1e-300;
  double f = 1.0, c = 1.0, d = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const int m = i / 2;
    double numerator;
    if (i == 0) {
      numerator = 1.0;
    } else if (i % 2 == 0) {
      numerator = (m * (b - m) * x) / ((a + 2.0 * m - 1.0) * (a + 2.0 * m));
    } else {
      numerator = -((a + m) * (a + b + m) * x) / ((a + 2.0 * m) * (a + 2.0 * m + 1.0));
    }
    d = 1.0 + numerator * d;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    c = 1.0 + numerator / c;
    if (std::abs(c) < tiny) c = tiny;
    const double cd = c * d;
    f *= cd;
    if (std::abs(1.0 - cd) < 1e-15) return front * (f - 1.0);
  }
  throw std::runtime_error("incomplete beta: continued fraction did not converge");
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("student t: df must be > 0");
  if (std::isnan(t)) throw std::invalid_argument("student t: t is NaN");
  if (std::isinf(t)) return 0.0;
  return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired_t_test: length mismatch");
  if (a.size() < 2) throw std::invalid_argument("paired_t_test: need at least 2 pairs");
  const auto n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  TTestResult r;
  r.df = a.size() - 1;
  const double se = std::sqrt(ss / (n - 1.0) / n);
  if (se == 0.0) {
    if (mean == 0.0) throw std::invalid_argument("zero variance");
    r.t = mean > 0.0 ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.t = mean / se;
  r.p = student_t_two_sided_p(r.t, static_cast<double>(r.df));
  return r;
}

double kendall_tau(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("kendall_tau: length mismatch");
  // tau-b, so that ties on either side shrink the denominator.
  double concordant = 0.0, discordant = 0.0, ties_a = 0.0, ties_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      if (da == 0.0 && db == 0.0) continue;
      if (da == 0.0) {
        ties_a += 1.0;
      } else if (db == 0.0) {
        ties_b += 1.0;
      } else if ((da > 0.0) == (db > 0.0)) {
        concordant += 1.0;
      } else {
        discordant += 1.0;
      }
    }
  }
  const double denom =
      std::sqrt((concordant + discordant + ties_a) * (concordant + discordant + ties_b));
  return denom == 0.0 ? 0.0 : (concordant - discordant) / denom;
}

std::vector<std::size_t> default_k_grid() {
  std::vector<std::size_t> k;
  for (std::size_t i = 2; i <= 50; i += 2) k.push_back(i);
  return k;
}

std::map<std::size_t, double> map_by_length(std::span<const double> aps,
                                            std::span<const std::size_t> gold_lengths) {
  if (aps.size() != gold_lengths.size()) throw std::invalid_argument("map_by_length: size mismatch");
  std::map<std::size_t, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < aps.size(); ++i) {
    auto& [sum, n] = acc[gold_lengths[i]];
    sum += aps[i];
    ++n;
  }
  std::map<std::size_t, double> out;
  for (const auto& [len, v] : acc) out[len] = v.first / static_cast<double>(v.second);
  return out;
}

EvalReport evaluate(const std::vector<RankedExplanation>& rankings,
                    const std::vector<QaInstance>& instances, const Tablestore& store,
                    const std::vector<std::size_t>& k_grid, std::string system) {
  std::unordered_map<std::string, const RankedExplanation*> by_id;
  for (const auto& r : rankings) by_id[r.qa_id] = &r;
  std::unordered_map<std::string, const QaInstance*> known;
  for (const auto& qa : instances) known[qa.id] = &qa;
  for (const auto& r : rankings) {
    if (!known.contains(r.qa_id)) throw Error("ranking for unknown QA id '" + r.qa_id + "'");
  }

  EvalReport report;
  report.system = std::move(system);
  std::vector<double> ep(k_grid.size()), er(k_grid.size()), sp(k_grid.size()), sr(k_grid.size());
  for (const auto& qa : instances) {
    if (!qa.gold) continue;
    auto it = by_id.find(qa.id);
    if (it == by_id.end()) throw Error("no ranking for QA id '" + qa.id + "'");
    const auto ranked = it->second->fact_ids(store);
    const auto gold = qa.gold->fact_ids();
    report.qa_ids.push_back(qa.id);
    report.ap.push_back(average_precision(ranked, gold));
    report.gold_lengths.push_back(gold.size());
    for (std::size_t j = 0; j < k_grid.size(); ++j) {
      const auto e = pr_at_k_exact(ranked, gold, k_grid[j]);
      const auto s = pr_at_k_set(ranked, gold, k_grid[j]);
      ep[j] += e.precision;
      er[j] += e.recall;
      sp[j] += s.precision;
      sr[j] += s.recall;
    }
  }
  const auto n = static_cast<double>(report.ap.size());
  report.map = mean_ap(report.ap);
  for (std::size_t j = 0; j < k_grid.size(); ++j) {
    const double scale = n > 0 ? 1.0 / n : 0.0;
    report.exact_curve.push_back({k_grid[j], ep[j] * scale, er[j] * scale});
    report.set_curve.push_back({k_grid[j], sp[j] * scale, sr[j] * scale});
  }
  report.map_by_length = map_by_length(report.ap, report.gold_lengths);
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["system"] = system;
  j["instances"] = qa_ids.size();
  j["map"] = map;
  const auto curve = [](const std::vector<CurvePoint>& points) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : points) {
      arr.push_back({{"k", p.k}, {"precision", p.precision}, {"recall", p.recall}});
    }
    return arr;
  };
  j["curves"]["exact_position"] = curve(exact_curve);
  j["curves"]["set_based"] = curve(set_curve);
  auto lengths = nlohmann::ordered_json::object();
  for (const auto& [len, m] : map_by_length) lengths[std::to_string(len)] = m;
  j["map_by_length"] = lengths;
  auto per = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < qa_ids.size(); ++i) {
    per.push_back({{"qa_id", qa_ids[i]}, {"ap", ap[i]}, {"gold_length", gold_lengths[i]}});
  }
  j["per_instance"] = per;
  return j.dump(2) + "\n";
}

std::string EvalReport::curves_csv() const {
  std::string out = "variant,k,precision,recall\n";
  char buf[128];
  const auto rows = [&](std::string_view name, const std::vector<CurvePoint>& points) {
    for (const auto& p : points) {
      std::snprintf(buf, sizeof buf, ",%zu,%.10f,%.10f\n", p.k, p.precision, p.recall);
      out += name;
      out += buf;
    }
  };
  rows("exact_position", exact_curve);
  rows("set_based", set_curve);
  return out;
}

std::string EvalReport::by_length_csv() const {
  std::map<std::size_t, std::size_t> counts;
  for (auto len : gold_lengths) ++counts[len];
  std::string out = "gold_length,instances,map\n";
  char buf[96];
  for (const auto& [len, m] : map_by_length) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.10f\n", len, counts[len], m);
    out += buf;
  }
  return out;
}

std::vector<AblationRow> ablation_run(
    const AblationSpec& spec,
    const std::function<std::pair<double, double>(const GroupSet&, const std::string&)>& run) {
  std::vector<GroupSet> sets{GroupSet{spec.base}};
  for (auto g : spec.addons) {
    GroupSet s{spec.base};
    s.insert(g);
    sets.push_back(s);
  }
  std::vector<AblationRow> rows;
  for (const auto& s : sets) {
    for (const auto& learner : spec.learners) {
      const auto [dev, test] = run(s, learner);
      rows.push_back({s, learner, dev, test});
    }
  }
  return rows;
}

std::string format_ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "groups,learner,dev_map,test_map\n";
  const auto num = [](double v) {
    if (std::isnan(v)) return std::string("nan");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    out += r.groups.to_string() + "," + r.learner + "," + num(r.dev_map) + "," + num(r.test_map) + "\n";
  }
  return out;
}

}  // namespace factrank
