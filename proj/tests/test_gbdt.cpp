#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "ovxai/gbdt.hpp"

using namespace ovxai;
namespace gb = ovxai::gbdt;

namespace {

Matrix random_matrix(std::size_t n, std::size_t p, Rng& rng, int levels = 0) {
  Matrix x(n, p);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < p; ++c)
      x(r, c) = levels > 0 ? static_cast<double>(uniform_index(rng, levels)) : standard_normal(rng);
  return x;
}

std::vector<int> noisy_labels(const Matrix& x, Rng& rng) {
  std::vector<int> y(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r)
    y[r] = (x(r, 0) + 0.5 * x(r, 1 % x.cols()) + standard_normal(rng) > 0) ? 1 : 0;
  y[0] = 0;
  y[1] = 1;
  return y;
}

// Rows reaching each node of a tree.
std::vector<std::vector<std::size_t>> rows_per_node(const gb::Tree& t, const Matrix& x) {
  std::vector<std::vector<std::size_t>> out(t.nodes.size());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    int i = 0;
    out[0].push_back(r);
    while (!t.nodes[i].is_leaf()) {
      const auto& n = t.nodes[i];
      i = x(r, n.feature) < n.threshold ? n.left : n.right;
      out[i].push_back(r);
    }
  }
  return out;
}

// Exhaustive oracle: for each distinct cut position, sum both sides directly.
std::optional<std::pair<double, double>> brute_split(const std::vector<double>& v,
                                                     const std::vector<double>& g,
                                                     const std::vector<double>& h, double lambda,
                                                     double gamma, double mcw) {
  std::optional<std::pair<double, double>> best;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k - 1] == v[k]) continue;
    double gl = 0, hl = 0, gr = 0, hr = 0;
    for (std::size_t i = 0; i < v.size(); ++i) (i < k ? gl : gr) += g[i], (i < k ? hl : hr) += h[i];
    if (hl < mcw || hr < mcw) continue;
    const double gain =
        0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) -
               (gl + gr) * (gl + gr) / (hl + hr + lambda)) - gamma;
    if (gain <= 0) continue;
    if (!best || gain > best->second + 1e-12) best = {(v[k - 1] + v[k]) / 2, gain};
  }
  return best;
}

}  // namespace

TEST(LeafWeight, Examples) {
  EXPECT_NEAR(gb::leaf_weight(-2, 2, 1, 1), 2.0 / 3.0, 1e-9);
  EXPECT_EQ(gb::leaf_weight(0, 2, 1, 0.3), 0.0);
  EXPECT_NEAR(gb::leaf_weight(-2, 2, 1, 0.3), 0.2, 1e-9);
  EXPECT_THROW(gb::leaf_weight(1, 0, 0, 1), NumericError);
}

TEST(SplitGain, HandExample) {
  EXPECT_NEAR(gb::split_gain(-2, 2, 3, 3, 1, 0), 0.5 * (4.0 / 3 + 9.0 / 4 - 1.0 / 6), 1e-12);
  EXPECT_NEAR(gb::split_gain(-2, 2, 3, 3, 1, 0), 1.70833, 1e-5);
}

TEST(BestSplit, HandExampleThroughScan) {
  // Two rows left (G=-2, H=2), three rows right (G=3, H=3).
  std::vector<double> v{0, 1, 2, 3, 4}, g{-1, -1, 1, 1, 1}, h{1, 1, 1, 1, 1};
  auto s = gb::best_split(v, g, h, 1, 0, 1);
  ASSERT_TRUE(s);
  EXPECT_NEAR(s->gain, 1.7083333333333333, 1e-9);
  EXPECT_DOUBLE_EQ(s->threshold, 1.5);
  EXPECT_EQ(s->left_count, 2u);
}

TEST(BestSplit, IdenticalValuesGiveNone) {
  std::vector<double> v{3, 3, 3}, g{-1, 0.5, 1}, h{1, 1, 1};
  EXPECT_FALSE(gb::best_split(v, g, h, 1, 0, 0));
}

TEST(BestSplit, LargeGammaGivesNone) {
  std::vector<double> v{0, 1, 2, 3, 4}, g{-1, -1, 1, 1, 1}, h{1, 1, 1, 1, 1};
  EXPECT_FALSE(gb::best_split(v, g, h, 1, 100, 1));
}

TEST(BestSplit, TieKeepsSmallerThreshold) {
  // Symmetric gradients make the two cuts equally good.
  std::vector<double> v{0, 1, 2}, g{-1, 0, 1}, h{1, 1, 1};
  auto cut1 = gb::split_gain(-1, 1, 1, 2, 1, 0), cut2 = gb::split_gain(-1, 2, 1, 1, 1, 0);
  ASSERT_EQ(cut1, cut2);
  auto s = gb::best_split(v, g, h, 1, 0, 0);
  ASSERT_TRUE(s);
  EXPECT_DOUBLE_EQ(s->threshold, 0.5);
}

TEST(BestSplit, MisalignedInputsRejected) {
  std::vector<double> v{0, 1}, g{1}, h{1, 1};
  EXPECT_THROW(gb::best_split(v, g, h, 1, 0, 0), InputError);
}

TEST(BestSplit, MatchesExhaustiveOracle) {
  Rng rng(99);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 2 + uniform_index(rng, 20);
    std::vector<double> v(n), g(n), h(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = static_cast<double>(uniform_index(rng, 6));
      g[i] = standard_normal(rng);
      h[i] = 0.05 + uniform01(rng) * 0.2;
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> sv, sg, sh;
    for (auto i : idx) sv.push_back(v[i]), sg.push_back(g[i]), sh.push_back(h[i]);
    const double mcw = uniform01(rng) * 0.5;
    auto got = gb::best_split(sv, sg, sh, 1.0, 0.0, mcw);
    auto want = brute_split(sv, sg, sh, 1.0, 0.0, mcw);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (got) {
      EXPECT_NEAR(got->gain, want->second, 1e-9);
      EXPECT_DOUBLE_EQ(got->threshold, want->first);
    }
  }
}

TEST(Fit, ZeroRoundsPredictsHalf) {
  Matrix x(4, 1);
  for (int i = 0; i < 4; ++i) x(i, 0) = i;
  gb::Params p;
  p.n_rounds = 0;
  auto e = gb::fit(x, std::vector<int>{0, 1, 0, 1}, p);
  EXPECT_EQ(e.bias, 0.0);
  for (double v : {-10.0, 0.0, 3.0, 99.0}) EXPECT_EQ(e.predict_proba(std::vector<double>{v}), 0.5);
}

TEST(Fit, SeparableOneDimensional) {
  // Four rows: the hessian mass at the root is 4 * 0.25 = 1.0, below twice
  // the default min_child_weight, so the defaults cannot split. With the
  // child-weight floor lifted a stump recovers the threshold.
  Matrix x(4, 1);
  const double xs[] = {-2, -1, 1, 2};
  for (int i = 0; i < 4; ++i) x(i, 0) = xs[i];
  const std::vector<int> y{0, 0, 1, 1};
  gb::Params p;
  p.min_child_weight = 0.0;
  auto e = gb::fit(x, y, p);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(e.predict_label(x.row(i)), y[i]);
  EXPECT_DOUBLE_EQ(e.trees[0].nodes[0].threshold, 0.0);
}

TEST(Fit, SeparableOneDimensionalDefaultsOnReplicatedRows) {
  Matrix x(16, 1);
  std::vector<int> y;
  for (int i = 0; i < 16; ++i) {
    x(i, 0) = (i % 4) - 2 + (i % 4 >= 2 ? 1 : 0);
    y.push_back(i % 4 >= 2 ? 1 : 0);
  }
  auto e = gb::fit(x, y, {});
  for (int i = 0; i < 16; ++i) EXPECT_EQ(e.predict_label(x.row(i)), y[i]);
}

TEST(Fit, ErrorsOnBadInput) {
  Matrix x(3, 1);
  EXPECT_THROW(gb::fit(x, std::vector<int>{1, 1, 1}, {}), FitError);
  x(1, 0) = std::nan("");
  EXPECT_THROW(gb::fit(x, std::vector<int>{0, 1, 0}, {}), InputError);
  EXPECT_THROW(gb::fit(Matrix(3, 1), std::vector<int>{0, 1}, {}), InputError);
  gb::Params bad;
  bad.learning_rate = 0;
  EXPECT_THROW(gb::fit(Matrix(2, 1), std::vector<int>{0, 1}, bad), ConfigError);
}

TEST(Fit, Deterministic) {
  Rng rng(1);
  auto x = random_matrix(120, 4, rng);
  auto y = noisy_labels(x, rng);
  EXPECT_EQ(gb::fit(x, y, {}), gb::fit(x, y, {}));
}

TEST(Fit, RowPermutationInvariance) {
  Rng rng(2);
  for (int levels : {0, 3}) {
    auto x = random_matrix(150, 5, rng, levels);
    auto y = noisy_labels(x, rng);
    auto e = gb::fit(x, y, {});
    std::vector<std::size_t> perm(x.rows());
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(perm, rng);
    std::vector<int> yp;
    for (auto i : perm) yp.push_back(y[i]);
    auto ep = gb::fit(x.select_rows(perm), yp, {});
    EXPECT_TRUE(e == ep) << "levels=" << levels;
  }
}

TEST(Fit, LeafWeightsAndGainsRecomputeFromTrace) {
  Rng rng(3);
  auto x = random_matrix(200, 4, rng, 0);
  auto y = noisy_labels(x, rng);
  gb::Params p;
  p.n_rounds = 25;
  p.reg_gamma = 0.05;
  gb::FitTrace trace;
  auto e = gb::fit(x, y, p, &trace);
  ASSERT_EQ(trace.grad.size(), e.trees.size());
  for (std::size_t t = 0; t < e.trees.size(); ++t) {
    const auto& tree = e.trees[t];
    EXPECT_LE(tree.depth(), p.max_depth);
    auto rows = rows_per_node(tree, x);
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      double g = 0, h = 0;
      for (auto r : rows[i]) g += trace.grad[t][r], h += trace.hess[t][r];
      const auto& n = tree.nodes[i];
      if (n.is_leaf()) {
        EXPECT_NEAR(n.weight, -p.learning_rate * g / (h + p.reg_lambda), 1e-10);
      } else {
        double gl = 0, hl = 0;
        for (auto r : rows[n.left]) gl += trace.grad[t][r], hl += trace.hess[t][r];
        const double gain = 0.5 * (gl * gl / (hl + p.reg_lambda) +
                                   (g - gl) * (g - gl) / (h - hl + p.reg_lambda) -
                                   g * g / (h + p.reg_lambda)) - p.reg_gamma;
        EXPECT_GT(gain, 0.0);
        EXPECT_NEAR(gain, n.gain, 1e-8);
        EXPECT_GE(hl, p.min_child_weight - 1e-12);
        EXPECT_GE(h - hl, p.min_child_weight - 1e-12);
      }
    }
  }
}

TEST(Predict, MarginIsBiasPlusTreeSum) {
  Rng rng(4);
  auto x = random_matrix(80, 3, rng);
  auto y = noisy_labels(x, rng);
  auto e = gb::fit(x, y, {});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double m = e.bias;
    for (const auto& t : e.trees) m += t.predict(x.row(r));
    EXPECT_EQ(e.predict_margin(x.row(r)), m);
    const double p = e.predict_proba(x.row(r));
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

TEST(Predict, ZeroTreeLeavesPredictionsUnchanged) {
  Rng rng(5);
  auto x = random_matrix(60, 2, rng);
  auto y = noisy_labels(x, rng);
  auto e = gb::fit(x, y, {});
  auto e2 = e;
  gb::Tree zero;
  zero.nodes.push_back({0, 0.0, 1, 2, 0.0, 1.0, 0.0});
  zero.nodes.push_back({});
  zero.nodes.push_back({});
  e2.trees.push_back(zero);
  for (std::size_t r = 0; r < x.rows(); ++r)
    EXPECT_EQ(e.predict_proba(x.row(r)), e2.predict_proba(x.row(r)));
}

TEST(Predict, ZeroMarginIsHalfAndLabelThreshold) {
  gb::Ensemble e;
  e.feature_count = 1;
  EXPECT_EQ(e.predict_proba(std::vector<double>{1.0}), 0.5);
  EXPECT_EQ(e.predict_label(std::vector<double>{1.0}), 1);
  EXPECT_EQ(e.predict_label(std::vector<double>{1.0}, 0.6), 0);
}

TEST(Predict, WrongDimensionalityIsInputError) {
  gb::Ensemble e;
  e.feature_count = 2;
  EXPECT_THROW(e.predict_margin(std::vector<double>{1.0}), InputError);
  EXPECT_THROW(e.predict_margin(std::vector<double>{1.0, std::nan("")}), InputError);
}

TEST(Serialization, JsonRoundTrip) {
  Rng rng(6);
  auto x = random_matrix(90, 3, rng);
  auto y = noisy_labels(x, rng);
  auto e = gb::fit(x, y, {});
  e.feature_names = {"a", "b", "c"};
  nlohmann::json j = e;
  auto back = nlohmann::json::parse(j.dump()).get<gb::Ensemble>();
  EXPECT_EQ(back.trees.size(), e.trees.size());
  for (std::size_t r = 0; r < x.rows(); ++r)
    EXPECT_EQ(back.predict_margin(x.row(r)), e.predict_margin(x.row(r)));
  EXPECT_EQ(back.feature_names, e.feature_names);
}

TEST(Serialization, RejectsBadStructure) {
  auto j = nlohmann::json::parse(
      R"({"bias":0,"feature_count":1,"params":{},"trees":[{"nodes":[{"feature":3,"threshold":0,"left":1,"right":2},{"leaf":0},{"leaf":0}]}]})");
  EXPECT_THROW(j.get<gb::Ensemble>(), SchemaError);
  j["trees"][0]["nodes"][0]["feature"] = 0;
  EXPECT_NO_THROW(j.get<gb::Ensemble>());
  j["trees"][0]["nodes"][0]["left"] = 0;
  EXPECT_THROW(j.get<gb::Ensemble>(), SchemaError);
}
