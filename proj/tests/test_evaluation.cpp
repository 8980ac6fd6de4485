#include <algorithm>

#include "doctest.h"
#include "pens/error.hpp"
#include "pens/evaluation.hpp"
#include "pens/rng.hpp"

using namespace pens;

namespace {

/// A ranking over `n` labels with `gold` at 1-based `position`.
PredictionRanking ranking_with_gold_at(const std::string& id, std::size_t n, std::size_t gold,
                                       std::size_t position) {
  PredictionRanking r;
  r.doc_id = id;
  for (std::size_t l = 0; l < n; ++l) {
    if (l != gold) r.labels.push_back(l);
  }
  r.labels.insert(r.labels.begin() + static_cast<std::ptrdiff_t>(position - 1), gold);
  for (std::size_t i = 0; i < n; ++i) r.probabilities.push_back(1.0 / static_cast<double>(i + 2));
  return r;
}

struct RandomCase {
  std::vector<PredictionRanking> rankings;
  GoldLabels gold;
  std::size_t labels = 0;
};

RandomCase random_case(Rng& rng) {
  RandomCase c;
  c.labels = 2 + uniform_index(rng, 20);
  const std::size_t docs = 1 + uniform_index(rng, 30);
  for (std::size_t d = 0; d < docs; ++d) {
    ProbabilityVector p(c.labels);
    for (auto& v : p) v = static_cast<double>(uniform_index(rng, 5));
    const std::string id = "doc" + std::to_string(d);
    c.rankings.push_back(rank_labels(id, p));
    c.gold[id] = uniform_index(rng, c.labels);
  }
  return c;
}

/// Accuracy given in hundredths of a percent, e.g. pct(5365) is 53.65%.
Ratio pct(std::int64_t hundredths) { return {hundredths, 10000}; }

}  // namespace

TEST_CASE("ratio arithmetic and rendering") {
  CHECK(Ratio(2, 4) == Ratio(1, 2));
  CHECK(Ratio(1, -2).num() == -1);
  CHECK(Ratio(1, -2).den() == 2);
  CHECK(Ratio(1, 3) + Ratio(1, 6) == Ratio(1, 2));
  CHECK(Ratio(1, 3) < Ratio(1, 2));
  CHECK_THROWS_AS(Ratio(1, 0), Error);
  CHECK(render(Ratio(3, 4), 2) == "0.75");
  CHECK(render(Ratio(1, 8), 2) == "0.13");
  CHECK(render(Ratio(-1, 8), 2) == "-0.13");
  CHECK(render(Ratio(2, 3), 0) == "1");
  CHECK(render(Ratio(-1, 1000), 2) == "0.00");
  CHECK(render_percent(Ratio(3, 4)) == "75.00");
  CHECK(render(Ratio(5, 1), 3) == "5.000");
}

TEST_CASE("ranking sorts by probability with ascending-index ties") {
  const ProbabilityVector p = {0.1, 0.4, 0.1, 0.4};
  const auto r = rank_labels("d", p);
  CHECK(r.labels == std::vector<std::size_t>{1, 3, 0, 2});
  CHECK(r.probabilities == std::vector<double>{0.4, 0.4, 0.1, 0.1});
  CHECK(r.top() == 1);
}

TEST_CASE("accuracy examples") {
  std::vector<PredictionRanking> rankings;
  GoldLabels gold;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string id = "d" + std::to_string(i);
    rankings.push_back(ranking_with_gold_at(id, 5, i, i < 3 ? 1 : 2));
    gold[id] = i;
  }
  CHECK(accuracy(rankings, gold) == Ratio(3, 4));
  rankings[3] = ranking_with_gold_at("d3", 5, 3, 1);
  CHECK(accuracy(rankings, gold) == Ratio(1, 1));
  gold.erase("d2");
  CHECK_THROWS_AS(accuracy(rankings, gold), Error);
  CHECK_THROWS_AS(accuracy({}, gold), Error);
}

TEST_CASE("recall at n examples") {
  std::vector<PredictionRanking> rankings;
  GoldLabels gold;
  const std::array<std::size_t, 4> positions = {1, 2, 4, 11};
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string id = "d" + std::to_string(i);
    rankings.push_back(ranking_with_gold_at(id, 12, i, positions[i]));
    gold[id] = i;
  }
  CHECK(recall_at_n(rankings, gold, 3) == Ratio(1, 2));
  CHECK(recall_at_n(rankings, gold, 12) == Ratio(1, 1));
  CHECK(recall_at_n(rankings, gold, 100) == Ratio(1, 1));
  CHECK(recall_at_n(rankings, gold, 11) == Ratio(1, 1));
  CHECK(recall_at_n(rankings, gold, 10) == Ratio(3, 4));
  CHECK_THROWS_AS(recall_at_n(rankings, gold, 0), Error);
}

TEST_CASE("metric identities on random rankings") {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    auto c = random_case(rng);
    CHECK(recall_at_n(c.rankings, c.gold, 1) == accuracy(c.rankings, c.gold));
    Ratio previous(0, 1);
    for (std::size_t n = 1; n <= c.labels; ++n) {
      const auto r = recall_at_n(c.rankings, c.gold, n);
      CHECK(r >= previous);
      CHECK(r <= Ratio(1, 1));
      previous = r;
    }
    CHECK(previous == Ratio(1, 1));

    const auto report = evaluate(c.rankings, c.gold);
    CHECK(report.recall_at.at(1) == report.accuracy);
    shuffle(c.rankings.begin(), c.rankings.end(), rng);
    const auto shuffled = evaluate(c.rankings, c.gold);
    CHECK(shuffled.accuracy == report.accuracy);
    CHECK(shuffled.recall_at == report.recall_at);
    CHECK(shuffled.confusion == report.confusion);
  }
}

TEST_CASE("evaluation report serialisation") {
  std::vector<PredictionRanking> rankings = {ranking_with_gold_at("a", 3, 0, 1),
                                             ranking_with_gold_at("b", 3, 1, 2)};
  const GoldLabels gold = {{"a", 0}, {"b", 1}};
  const auto report = evaluate(rankings, gold);
  CHECK(report.num_docs == 2);
  CHECK(report.accuracy == Ratio(1, 2));
  CHECK(report.recall_at.at(3) == Ratio(1, 1));
  CHECK(report.confusion.at({0, 0}) == 1);
  CHECK(report_to_csv(report) ==
        "metric,value\naccuracy,0.500000\nr_at_1,0.500000\nr_at_3,1.000000\n"
        "r_at_5,1.000000\nr_at_10,1.000000\nnum_docs,2\n");
  const std::vector<std::string> names = {"A01B", "G06F", "H04L"};
  const auto json = report_to_json(report, names);
  CHECK(json.find("\"accuracy\": 0.5") != std::string::npos);
  CHECK(json.find("\"accuracy_exact\": \"1/2\"") != std::string::npos);
  CHECK(json.find("\"gold\": \"G06F\"") != std::string::npos);
}

TEST_CASE("improvement rows") {
  const auto cnn = improvement_row("cnn",
                                   {pct(5365), pct(5299),
                                    pct(5154)},
                                   pct(5954));
  CHECK(render(cnn.mean * Ratio(100, 1), 4) == "52.7267");
  CHECK(cnn.mean_percent() == "52.73");
  CHECK(cnn.improvement_percent() == "12.92");
  const auto bilstm = improvement_row("bilstm",
                                      {pct(5983), pct(5940),
                                       pct(5831)},
                                      pct(6457));
  CHECK(bilstm.improvement_percent() == "9.11");
  const auto flat = improvement_row("x", {Ratio(1, 2), Ratio(1, 4), Ratio(3, 4)}, Ratio(1, 2));
  CHECK(flat.improvement_percent() == "0.00");
  CHECK(flat.mean == (flat.members[0] + flat.members[1] + flat.members[2]) / Ratio(3, 1));
}

TEST_CASE("improvement table from reports and its CSV") {
  ArchitectureReports reports;
  reports.architecture = "gru";
  for (std::size_t i = 0; i < 3; ++i) reports.members[i].accuracy = Ratio(static_cast<std::int64_t>(i + 1), 10);
  reports.ensemble.accuracy = Ratio(3, 10);
  const std::vector<ArchitectureReports> all = {reports};
  const auto rows = improvement_table(all);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].improvement_pct == Ratio(50, 1));
  CHECK(improvement_to_csv(rows) ==
        "architecture,member_1,member_2,member_3,mean,ensemble,improvement_pct\n"
        "gru,10.00,20.00,30.00,20.00,30.00,50.00\n");
}
