#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <set>

#include <json.hpp>

#include "factrank/error.hpp"
#include "factrank/eval.hpp"
#include "support.hpp"

using namespace factrank;

namespace {

using Ids = std::vector<std::string>;

// Precision at each rank times relevance, summed and divided by |gold|.
double ap_oracle(const Ids& ranked, const Ids& gold) {
  const std::set<std::string> g(gold.begin(), gold.end());
  double total = 0.0;
  for (std::size_t k = 1; k <= ranked.size(); ++k) {
    if (!g.count(ranked[k - 1])) continue;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) hits += g.count(ranked[i]);
    total += static_cast<double>(hits) / static_cast<double>(k);
  }
  return total / static_cast<double>(g.size());
}

// Simpson integration of the t density over [0, |t|].
double t_p_oracle(double t, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * std::numbers::pi);
  const auto pdf = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const int n = 20000;
  const double h = std::abs(t) / n;
  double s = pdf(0) + pdf(std::abs(t));
  for (int i = 1; i < n; ++i) s += pdf(i * h) * (i % 2 ? 4 : 2);
  return 1.0 - 2.0 * s * h / 3.0;
}

Ids ids(std::size_t n, const char* prefix = "f") {
  Ids out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

RankedExplanation ranking_of(const std::string& qa, const Tablestore& store, const Ids& order) {
  RankedExplanation r{qa, {}};
  double score = static_cast<double>(order.size());
  for (const auto& id : order) r.entries.push_back({*store.find(id), score--});
  return r;
}

}  // namespace

TEST_CASE("average precision examples") {
  CHECK(average_precision(Ids{"a", "b", "c"}, Ids{"a"}) == 1.0);
  CHECK(average_precision(Ids{"x", "a", "y", "b"}, Ids{"a", "b"}) == doctest::Approx((0.5 + 0.5) / 2));
  CHECK(average_precision(Ids{"a", "x", "b"}, Ids{"a", "b"}) == doctest::Approx((1.0 + 2.0 / 3) / 2));
  // Missing gold counts as a miss.
  CHECK(average_precision(Ids{"a", "x"}, Ids{"a", "b"}) == doctest::Approx(0.5));
  CHECK(average_precision(Ids{"x", "y"}, Ids{"a"}) == 0.0);
  CHECK_THROWS_AS(average_precision(Ids{"a"}, Ids{}), std::invalid_argument);
}

TEST_CASE("average precision agrees with a brute-force oracle") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 400; ++trial) {
    auto ranked = ids(1 + gen() % 40);
    std::shuffle(ranked.begin(), ranked.end(), gen);
    auto pool = ids(45);
    std::shuffle(pool.begin(), pool.end(), gen);
    const Ids gold(pool.begin(), pool.begin() + static_cast<long>(1 + gen() % 10));
    const double ap = average_precision(ranked, gold);
    CHECK(ap == doctest::Approx(ap_oracle(ranked, gold)).epsilon(1e-12));
    CHECK(ap >= 0.0);
    CHECK(ap <= 1.0);
  }
}

TEST_CASE("perfect rankings score one and mean_ap averages") {
  auto all = ids(30);
  const Ids gold(all.begin(), all.begin() + 7);
  CHECK(average_precision(all, gold) == 1.0);
  CHECK(mean_ap(std::vector<double>{1.0, 0.5, 0.0}) == doctest::Approx(0.5));
  CHECK(mean_ap(std::vector<double>{}) == 0.0);
}

TEST_CASE("precision and recall at k") {
  const Ids ranked{"a", "b", "c", "d"};
  const Ids gold{"b", "a", "d"};
  const auto e = pr_at_k_exact(ranked, gold, 2);
  CHECK(e.hits == 0);
  const auto s = pr_at_k_set(ranked, gold, 2);
  CHECK(s.hits == 2);
  CHECK(s.precision == 1.0);
  CHECK(s.recall == doctest::Approx(2.0 / 3));

  const auto e2 = pr_at_k_exact(Ids{"b", "x", "d"}, gold, 4);
  CHECK(e2.hits == 2);
  CHECK(e2.precision == 0.5);
  CHECK(e2.recall == doctest::Approx(2.0 / 3));
  CHECK_THROWS_AS(pr_at_k_set(ranked, gold, 0), std::invalid_argument);
}

TEST_CASE("exact hits never exceed set hits and set recall grows with k") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 300; ++trial) {
    auto ranked = ids(30);
    std::shuffle(ranked.begin(), ranked.end(), gen);
    auto gold = ids(30);
    std::shuffle(gold.begin(), gold.end(), gen);
    gold.resize(1 + gen() % 8);
    double last_recall = 0.0;
    for (std::size_t k = 1; k <= 30; ++k) {
      const auto e = pr_at_k_exact(ranked, gold, k);
      const auto s = pr_at_k_set(ranked, gold, k);
      CHECK(e.hits <= s.hits);
      CHECK(s.recall >= last_recall);
      last_recall = s.recall;
    }
    CHECK(last_recall == 1.0);
  }
}

TEST_CASE("paired t-test") {
  const std::vector<double> a{0.5, 0.75, 1.0};
  CHECK_THROWS_AS(paired_t_test(a, a), std::invalid_argument);
  const std::vector<double> shifted{0.75, 1.0, 1.25};
  const auto r = paired_t_test(shifted, a);
  CHECK(std::isinf(r.t));
  CHECK(r.t > 0);
  CHECK(r.p == 0.0);

  // d = {1, 2, 3, 6}: mean 3, sd sqrt(14/3), t = 3 / (sd / 2).
  const std::vector<double> x{1, 2, 3, 6}, zero{0, 0, 0, 0};
  const auto t = paired_t_test(x, zero);
  CHECK(t.df == 3);
  CHECK(t.t == doctest::Approx(3.0 / (std::sqrt(14.0 / 3.0) / 2.0)));
  CHECK(t.p == doctest::Approx(t_p_oracle(t.t, 3)).epsilon(1e-6));
  const auto flipped = paired_t_test(zero, x);
  CHECK(flipped.t == doctest::Approx(-t.t));
  CHECK(flipped.p == doctest::Approx(t.p));
}

TEST_CASE("t distribution tail agrees with numerical integration") {
  for (double df : {1.0, 2.0, 3.0, 5.0, 10.0, 30.0, 200.0}) {
    for (double t : {0.05, 0.5, 1.0, 2.0, 3.5, 8.0}) {
      INFO("df " << df << " t " << t);
      CHECK(std::abs(student_t_two_sided_p(t, df) - t_p_oracle(t, df)) < 1e-6);
      CHECK(student_t_two_sided_p(-t, df) == student_t_two_sided_p(t, df));
    }
  }
  CHECK(student_t_two_sided_p(0.0, 4) == doctest::Approx(1.0));
  CHECK(regularized_incomplete_beta(2, 3, 0) == 0.0);
  CHECK(regularized_incomplete_beta(2, 3, 1) == 1.0);
  // I_x(1, 1) = x and I_x(a, 1) = x^a.
  CHECK(regularized_incomplete_beta(1, 1, 0.3) == doctest::Approx(0.3));
  CHECK(regularized_incomplete_beta(2.5, 1, 0.4) == doctest::Approx(std::pow(0.4, 2.5)));
}

TEST_CASE("kendall tau-b") {
  const std::vector<double> a{1, 2, 3, 4};
  CHECK(kendall_tau(a, a) == 1.0);
  CHECK(kendall_tau(a, std::vector<double>{4, 3, 2, 1}) == -1.0);
  CHECK(kendall_tau(a, std::vector<double>{1, 2, 4, 3}) == doctest::Approx(4.0 / 6));
  // One tie in b: C=5, D=0, pairs untied in a = 6, in b = 5.
  CHECK(kendall_tau(a, std::vector<double>{1, 2, 3, 3}) == doctest::Approx(5.0 / std::sqrt(30.0)));
  CHECK(kendall_tau(std::vector<double>{1, 1}, std::vector<double>{1, 1}) == 0.0);
  CHECK_THROWS_AS(kendall_tau(a, std::vector<double>{1}), std::invalid_argument);
}

TEST_CASE("evaluate over a split") {
  const auto store = testing::numbered_store(6);
  std::vector<QaInstance> split = {testing::make_qa("Q1", "q", "a", {"f01", "f03"}),
                                   testing::make_qa("Q2", "q", "a", {"f05"}),
                                   testing::make_qa("Q3", "q", "a")};
  std::vector<RankedExplanation> rankings = {
      ranking_of("Q1", store, {"f01", "f00", "f03", "f02", "f04", "f05"}),
      ranking_of("Q2", store, {"f00", "f05", "f01", "f02", "f03", "f04"}),
      ranking_of("Q3", store, {"f00", "f01", "f02", "f03", "f04", "f05"})};
  const auto report = evaluate(rankings, split, store, {1, 2, 4}, "model");
  CHECK(report.qa_ids == Ids{"Q1", "Q2"});
  CHECK(report.ap[0] == doctest::Approx((1.0 + 2.0 / 3) / 2));
  CHECK(report.ap[1] == doctest::Approx(0.5));
  CHECK(report.map == doctest::Approx(((1.0 + 2.0 / 3) / 2 + 0.5) / 2));
  REQUIRE(report.set_curve.size() == 3);
  CHECK(report.set_curve[1].k == 2);
  CHECK(report.set_curve[1].precision == doctest::Approx((0.5 + 0.5) / 2));
  CHECK(report.exact_curve[0].precision == doctest::Approx(0.5));
  CHECK(report.map_by_length.at(1) == doctest::Approx(0.5));
  CHECK(report.map_by_length.at(2) == doctest::Approx(report.ap[0]));

  const auto json = nlohmann::json::parse(report.to_json());
  CHECK(json["system"] == "model");
  CHECK(json["instances"] == 2);
  CHECK(json["curves"]["exact_position"].size() == 3);
  CHECK(json["curves"]["set_based"].size() == 3);
  CHECK(json["per_instance"][1]["qa_id"] == "Q2");
  CHECK(json["map_by_length"].contains("2"));

  const auto csv = report.curves_csv();
  CHECK(csv.rfind("variant,k,precision,recall\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
  char row[64];
  std::snprintf(row, sizeof row, "2,1,%.10f\n", report.ap[0]);
  CHECK(report.by_length_csv() == std::string("gold_length,instances,map\n1,1,0.5000000000\n") + row);

  auto stray = rankings;
  stray.push_back(ranking_of("Q9", store, {"f00", "f01", "f02", "f03", "f04", "f05"}));
  CHECK_THROWS_AS(evaluate(stray, split, store), Error);
  const std::vector<RankedExplanation> missing(rankings.begin() + 1, rankings.end());
  CHECK_THROWS_AS(evaluate(missing, split, store), Error);
}

TEST_CASE("map by length") {
  const std::vector<double> aps{0.2, 0.4, 1.0};
  const std::vector<std::size_t> lens{3, 3, 5};
  const auto m = map_by_length(aps, lens);
  CHECK(m.size() == 2);
  CHECK(m.at(3) == doctest::Approx(0.3));
  CHECK(m.at(5) == 1.0);
  CHECK_THROWS_AS(map_by_length(aps, std::vector<std::size_t>{1}), std::invalid_argument);
}

TEST_CASE("ablation runs base then each addon per learner") {
  AblationSpec spec;
  spec.base = FeatureGroup::kLex;
  spec.addons = {FeatureGroup::kConcept, FeatureGroup::kTfidfRank};
  spec.learners = {"pointwise", "pairwise"};
  std::vector<std::string> calls;
  const auto rows = ablation_run(spec, [&](const GroupSet& g, const std::string& learner) {
    calls.push_back(g.to_string() + "/" + learner);
    return std::pair{0.25, std::nan("")};
  });
  CHECK(calls == Ids{"lex/pointwise", "lex/pairwise", "lex+conceptnet/pointwise", "lex+conceptnet/pairwise",
                     "lex+tfidf/pointwise", "lex+tfidf/pairwise"});
  CHECK(rows.size() == 6);
  const auto csv = format_ablation_csv(rows);
  CHECK(csv.rfind("groups,learner,dev_map,test_map\nlex,pointwise,0.250000,nan\n", 0) == 0);

  spec.addons.clear();
  CHECK(ablation_run(spec, [](const GroupSet&, const std::string&) { return std::pair{0.0, 0.0}; }).size() == 2);
}
