#include "doctest.h"
#include "foal/eval.hpp"
#include "support.hpp"

#include <cmath>
#include <sstream>

using namespace foal;

namespace {

Triplet tri(int a, int o, Sentiment s = Sentiment::Positive) { return {{a, a}, {o, o}, s}; }

}  // namespace

TEST_CASE("exact-match F1 examples") {
  std::vector<std::vector<Triplet>> gold{{tri(0, 1), tri(2, 3, Sentiment::Negative)}, {tri(1, 0)}};
  EvalReport same = exact_match_f1(gold, gold);
  CHECK(same.precision == 1.0);
  CHECK(same.recall == 1.0);
  CHECK(same.f1 == 1.0);

  EvalReport none = exact_match_f1({{}, {}}, gold);
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);
  CHECK(none.num_gold == 3);

  std::vector<std::vector<Triplet>> g2{{tri(0, 1), tri(2, 3)}};
  std::vector<std::vector<Triplet>> p2{{tri(0, 1), tri(2, 3, Sentiment::Neutral)}};
  EvalReport half = exact_match_f1(p2, g2);
  CHECK(half.precision == 0.5);
  CHECK(half.recall == 0.5);
  CHECK(half.f1 == 0.5);

  std::vector<std::vector<Triplet>> dup{{tri(0, 1), tri(0, 1)}};
  EvalReport d = exact_match_f1(dup, g2);
  CHECK(d.num_pred == 1);
  CHECK(d.num_correct == 1);

  CHECK(exact_match_f1({{}}, {{}}).f1 == 0.0);
  CHECK_THROWS_AS(exact_match_f1({{}}, gold), std::invalid_argument);
}

TEST_CASE("F1 agrees with a set-intersection count") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> k(0, 3), pos(0, 3), pol(0, 2);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::vector<Triplet>> pred(3), gold(3);
    for (int s = 0; s < 3; ++s) {
      for (int i = k(rng); i > 0; --i) gold[s].push_back(tri(pos(rng), pos(rng), static_cast<Sentiment>(pol(rng))));
      for (int i = k(rng); i > 0; --i) pred[s].push_back(tri(pos(rng), pos(rng), static_cast<Sentiment>(pol(rng))));
    }
    EvalReport r = exact_match_f1(pred, gold);
    auto o = foal::testing::brute_f1(pred, gold);
    CHECK(r.num_correct == o.correct);
    CHECK(std::abs(r.f1 - o.f1) <= 1e-12);
  }
}

TEST_CASE("MMD closed forms") {
  ad::Matrix x(1, 3), y(1, 3);
  x << 0.5, -1.0, 2.0;
  y << 1.5, 0.0, 1.0;
  for (double sigma : {0.5, 1.0, 3.0}) {
    const double want = std::sqrt(2.0 - 2.0 * std::exp(-(x - y).squaredNorm() / (2 * sigma * sigma)));
    CHECK(mmd(x, y, sigma) == doctest::Approx(want).epsilon(1e-12));
  }
  // one distinct pair: the median heuristic is the distance itself
  CHECK(median_heuristic_bandwidth(x, y) == doctest::Approx((x - y).norm()).epsilon(1e-14));
  CHECK(median_heuristic_bandwidth(x, x) == 1.0);
  CHECK(rbf_kernel(x.row(0), x.row(0), 2.0) == 1.0);
  CHECK(mmd(x, x) == 0.0);
  CHECK_THROWS(mmd(ad::Matrix(0, 3), y));
  CHECK_THROWS(mmd(x, ad::Matrix::Zero(1, 2)));
  CHECK_THROWS(mmd(x, y, 0.0));
}

TEST_CASE("MMD is symmetric and matches a naive sum") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    ad::Matrix X = foal::testing::random_matrix(rng, 4 + trial % 5, 3);
    ad::Matrix Y = foal::testing::random_matrix(rng, 6, 3, 2.0);
    CHECK(std::abs(mmd(X, Y) - mmd(Y, X)) <= 1e-12);
    CHECK(mmd(X, X) <= 1e-12);
    CHECK(std::abs(mmd(X, Y, 1.3) - foal::testing::brute_mmd(X, Y, 1.3)) <= 1e-9);
  }
}

TEST_CASE("discrepancy report") {
  SyntheticSpec spec;
  spec.n_sentences = 6;
  auto c = generate_synthetic_corpus(2, spec);
  EncoderConfig ec;
  ec.hidden_size = 12;
  ModelConfig mc;
  mc.ffn_hidden = 10;
  Model model(ec, mc, Hyperparams{});

  DiscrepancyReport same = discrepancy_report(model, c.source, c.source);
  CHECK(same.phrase.domain_mmd <= 1e-6);
  CHECK(same.pair.domain_mmd <= 1e-6);
  CHECK(same.phrase.intra_class_mmd <= 1e-6);
  CHECK(same.phrase.inter_class_mmd > 0.0);

  DiscrepancyReport cross = discrepancy_report(model, c.source, c.target);
  CHECK(cross.phrase.domain_mmd > 0.0);

  std::ostringstream table;
  print_table(table, cross);
  CHECK(table.str().find("phrase") != std::string::npos);
  auto j = to_json(cross);
  CHECK(j["phrase"]["domain_mmd"].get<double>() == cross.phrase.domain_mmd);

  DomainFeatures f = extract_features(model, c.source);
  CHECK(f.phrase.vectors.size() == f.phrase.labels.size());
  std::ostringstream dump;
  dump_features(dump, f, "src");
  std::istringstream lines(dump.str());
  std::string first;
  std::getline(lines, first);
  auto rec = nlohmann::json::parse(first);
  CHECK(rec.contains("vector"));
  CHECK(rec["domain"] == "src");
  CHECK(rec.contains("granularity"));
  CHECK(rec.contains("class"));
}

TEST_CASE("a class missing in one domain is skipped with a note") {
  ClassedFeatures a, b;
  a.vectors = {Eigen::RowVectorXd::Constant(2, 1.0), Eigen::RowVectorXd::Constant(2, -1.0)};
  a.labels = {0, 1};
  b.vectors = {Eigen::RowVectorXd::Constant(2, 0.5)};
  b.labels = {0};
  std::vector<std::string> notes;
  LevelDiscrepancy d = level_discrepancy(a, b, 2, "phrase", notes);
  CHECK(notes.size() >= 1);
  CHECK(d.intra_class_mmd == doctest::Approx(mmd(a.matrix_of(0), b.matrix_of(0))).epsilon(1e-12));
}

TEST_CASE("evaluating an untrained model produces a report") {
  SyntheticSpec spec;
  spec.n_sentences = 5;
  auto c = generate_synthetic_corpus(0, spec);
  EncoderConfig ec;
  ec.hidden_size = 8;
  ModelConfig mc;
  mc.ffn_hidden = 6;
  Model model(ec, mc, Hyperparams{});
  EvalReport r = evaluate(model, c.source);
  CHECK(r.f1 >= 0.0);
  CHECK(r.f1 <= 1.0);
  CHECK(r.num_gold == dataset_statistics(c.source).num_positive + dataset_statistics(c.source).num_negative +
                          dataset_statistics(c.source).num_neutral);
}
