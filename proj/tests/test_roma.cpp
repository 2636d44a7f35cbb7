#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ovxai/roma.hpp"
#include "test_util.hpp"

using namespace ovxai;
namespace rm = ovxai::roma;

TEST(PredictiveIndex, WorkedExamples) {
  EXPECT_NEAR(rm::predictive_index(50, 30, Stratum::pre), -2.4765, 1e-3);
  EXPECT_NEAR(rm::predictive_index(200, 100, Stratum::post), 0.7913, 1e-3);
  EXPECT_EQ(rm::predictive_index(1, 1, Stratum::pre), -12.0);
  EXPECT_EQ(rm::predictive_index(1, 1, Stratum::post), -8.09);
}

TEST(PredictiveIndex, NonPositiveMarkerIsDomainError) {
  EXPECT_THROW(rm::predictive_index(0, 10, Stratum::pre), DomainError);
  EXPECT_THROW(rm::predictive_index(10, -1, Stratum::post), DomainError);
  EXPECT_THROW(rm::predictive_index(std::nan(""), 10, Stratum::post), DomainError);
}

TEST(Probability, WorkedExamples) {
  EXPECT_EQ(rm::roma_probability(0), 50.0);
  EXPECT_NEAR(rm::roma_probability(-2.4765), 7.75, 0.02);
  EXPECT_NEAR(rm::roma_probability(0.7913), 68.81, 0.02);
  EXPECT_NEAR(rm::roma_probability(rm::predictive_index(50, 30, Stratum::pre)), 7.75, 0.02);
  EXPECT_NEAR(rm::roma_probability(rm::predictive_index(200, 100, Stratum::post)), 68.81, 0.02);
}

TEST(Probability, OverflowSafe) {
  EXPECT_EQ(rm::roma_probability(1000), 100.0);
  EXPECT_EQ(rm::roma_probability(-1000), 0.0);
  EXPECT_FALSE(std::isnan(rm::roma_probability(800)));
}

TEST(Classify, WorkedExamples) {
  const auto std_c = rm::standard_cutoffs();
  EXPECT_EQ(rm::classify(7.75, Stratum::pre, std_c), rm::Risk::low);
  EXPECT_EQ(rm::classify(68.81, Stratum::post, std_c), rm::Risk::high);
  EXPECT_EQ(rm::classify(13.1, Stratum::pre, std_c), rm::Risk::high);
  EXPECT_EQ(rm::classify(27.7, Stratum::post, std_c), rm::Risk::high);
  EXPECT_EQ(rm::classify(14.0, Stratum::pre, rm::terlikowska_cutoffs()), rm::Risk::low);
}

TEST(Classify, CutoffLookup) {
  EXPECT_EQ(rm::cutoffs_by_label("standard").pre_pct, 13.1);
  EXPECT_EQ(rm::cutoffs_by_label("terlikowska").post_pct, 33.4);
  EXPECT_THROW(rm::cutoffs_by_label("other"), ConfigError);
}

TEST(Properties, MonotoneAndComplementOnFuzzedInputs) {
  Rng rng(42);
  for (int t = 0; t < 10000; ++t) {
    const Stratum s = bernoulli(rng, 0.5) ? Stratum::pre : Stratum::post;
    const double he4 = std::exp(uniform01(rng) * 8.0 - 1.0);
    const double ca = std::exp(uniform01(rng) * 9.0 - 1.0);
    const double k = 1.0 + uniform01(rng) * 2.0;
    const double pi = rm::predictive_index(he4, ca, s);
    EXPECT_GT(rm::predictive_index(he4 * k, ca, s), pi);
    EXPECT_GT(rm::predictive_index(he4, ca * k, s), pi);
    const double x = standard_normal(rng) * 5;
    const double y = x + 0.01 + uniform01(rng);
    EXPECT_LT(rm::roma_probability(x), rm::roma_probability(y));
    EXPECT_NEAR(rm::roma_probability(x) + rm::roma_probability(-x), 100.0, 1e-9);
    const double prob = rm::roma_probability(pi);
    rm::CutoffSet lo{10, 20, "a"}, hi{15, 30, "b"};
    if (rm::classify(prob, s, lo) == rm::Risk::low) EXPECT_EQ(rm::classify(prob, s, hi), rm::Risk::low);
  }
}

namespace {

Dataset marker_dataset(const std::vector<std::array<double, 2>>& markers, const std::vector<int>& y) {
  std::vector<std::vector<double>> rows;
  for (auto& m : markers) rows.push_back({m[0], m[1]});
  auto d = ovxai::testing::make_dataset(rows, y);
  d.schema.features[0].name = "HE4";
  d.schema.features[1].name = "CA125";
  return d;
}

}  // namespace

TEST(Evaluate, PerfectSeparationGivesUnitMetrics) {
  auto d = marker_dataset({{30, 10}, {40, 12}, {500, 900}, {800, 300}}, {0, 0, 1, 1});
  auto ev = rm::evaluate_stratum(d, Stratum::pre, rm::standard_cutoffs());
  EXPECT_EQ(ev.metrics.accuracy, 1.0);
  EXPECT_EQ(ev.metrics.sensitivity, 1.0);
  EXPECT_EQ(ev.metrics.specificity, 1.0);
  EXPECT_EQ(ev.metrics.mcc, 1.0);
  EXPECT_EQ(ev.metrics.roc_auc, 1.0);
  EXPECT_EQ(ev.scored, 4u);
}

TEST(Evaluate, NonPositiveMarkersExcludedAndCounted) {
  auto d = marker_dataset({{30, 10}, {0, 12}, {500, 900}, {800, -3}, {60, 20}}, {0, 0, 1, 1, 1});
  auto ev = rm::evaluate_stratum(d, Stratum::post, rm::standard_cutoffs());
  EXPECT_EQ(ev.scored, 3u);
  EXPECT_EQ(ev.excluded, 2u);
  EXPECT_EQ(ev.cm.total(), 3u);
}

TEST(Evaluate, TerlikowskaNeverRaisesSensitivity) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::array<double, 2>> m;
    std::vector<int> y;
    for (int i = 0; i < 40; ++i) {
      y.push_back(i % 2);
      m.push_back({std::exp(3.5 + standard_normal(rng) + y.back()), std::exp(3 + 2 * standard_normal(rng))});
    }
    auto d = marker_dataset(m, y);
    for (Stratum s : {Stratum::pre, Stratum::post}) {
      auto a = rm::evaluate_stratum(d, s, rm::standard_cutoffs());
      auto b = rm::evaluate_stratum(d, s, rm::terlikowska_cutoffs());
      EXPECT_LE(b.metrics.sensitivity, a.metrics.sensitivity);
      EXPECT_EQ(a.metrics.roc_auc, b.metrics.roc_auc);
    }
  }
}

TEST(Evaluate, DeterministicAndUsesStratumFormula) {
  auto d = marker_dataset({{50, 30}, {200, 100}, {70, 35}, {300, 800}}, {0, 1, 0, 1});
  d.stratum = std::vector<Stratum>{Stratum::pre, Stratum::post, Stratum::pre, Stratum::post};
  auto a = rm::evaluate_roma(d, rm::standard_cutoffs());
  auto b = rm::evaluate_roma(d, rm::standard_cutoffs());
  EXPECT_EQ(a.average, b.average);
  ASSERT_EQ(a.pre.scores.size(), 2u);
  EXPECT_NEAR(a.pre.scores[0].result.probability_pct, 7.75, 0.02);
  EXPECT_EQ(a.pre.scores[0].result.risk, rm::Risk::low);
  EXPECT_NEAR(a.post.scores[0].result.probability_pct, 68.81, 0.02);
  EXPECT_EQ(a.post.scores[0].result.risk, rm::Risk::high);
  EXPECT_EQ(a.post.scores[0].row_id, 1u);
}

TEST(Evaluate, MissingMarkerColumnIsSchemaError) {
  auto d = ovxai::testing::make_dataset({{1.0}, {2.0}}, {0, 1});
  EXPECT_THROW(rm::evaluate_stratum(d, Stratum::pre, rm::standard_cutoffs()), SchemaError);
}

TEST(ScoresCsv, Layout) {
  rm::PatientScore s;
  s.row_id = 4;
  s.label = 1;
  s.result = rm::score(1, 1, Stratum::pre, rm::standard_cutoffs());
  std::ostringstream os;
  rm::write_scores_csv(os, {s});
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "id,stratum,label,PI,probability_pct,risk");
  EXPECT_NE(os.str().find("4,pre,1,-12,"), std::string::npos);
  EXPECT_NE(os.str().find(",low\n"), std::string::npos);
}
