#ifndef OVXAI_GBDT_HPP_
#define OVXAI_GBDT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ovxai/common.hpp"

// Second-order gradient boosted trees for binary classification with the
// logistic loss, exact greedy split search and L2 leaf regularization.
namespace ovxai::gbdt {

struct Params {
  int n_rounds = 100;
  double learning_rate = 0.3;
  int max_depth = 6;
  double reg_lambda = 1.0;
  double reg_gamma = 0.0;
  double min_child_weight = 1.0;
  double base_score = 0.5;
  std::uint64_t seed = 0;  // unused by the exact learner; kept for config parity

  void validate() const {
    if (n_rounds < 0) throw ConfigError("gbdt.n_rounds must be >= 0");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0))
      throw ConfigError("gbdt.learning_rate must lie in (0, 1]");
    if (max_depth < 0) throw ConfigError("gbdt.max_depth must be >= 0");
    if (!(reg_lambda >= 0.0)) throw ConfigError("gbdt.reg_lambda must be >= 0");
    if (!(reg_gamma >= 0.0)) throw ConfigError("gbdt.reg_gamma must be >= 0");
    if (!(min_child_weight >= 0.0)) throw ConfigError("gbdt.min_child_weight must be >= 0");
    if (!(base_score > 0.0 && base_score < 1.0))
      throw ConfigError("gbdt.base_score must lie in (0, 1)");
  }

  friend bool operator==(const Params&, const Params&) = default;
};

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double weight = 0.0;  // leaf output
  double gain = 0.0;    // split gain (0 on leaves)
  double cover = 0.0;   // hessian sum of the training rows reaching the node

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const Node&, const Node&) = default;
};

// Routing rule: left iff x[feature] < threshold.
struct Tree {
  std::vector<Node> nodes;

  int leaf_index(std::span<const double> x) const {
    int i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& n = nodes[i];
      i = x[n.feature] < n.threshold ? n.left : n.right;
    }
    return i;
  }

  double predict(std::span<const double> x) const { return nodes[leaf_index(x)].weight; }

  int depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      best = std::max(best, d[i]);
      if (!nodes[i].is_leaf()) {
        d[nodes[i].left] = d[i] + 1;
        d[nodes[i].right] = d[i] + 1;
      }
    }
    return best;
  }

  friend bool operator==(const Tree&, const Tree&) = default;
};

struct Ensemble {
  double bias = 0.0;
  std::vector<Tree> trees;
  Params params;
  std::size_t feature_count = 0;
  std::vector<std::string> feature_names;  // optional, carried for reports

  void check_input(std::span<const double> x) const {
    if (x.size() != feature_count)
      throw InputError("expected " + std::to_string(feature_count) + " features, got " +
                       std::to_string(x.size()));
    for (double v : x)
      if (!std::isfinite(v)) throw InputError("non-finite feature value");
  }

  double predict_margin(std::span<const double> x) const {
    check_input(x);
    double m = bias;
    for (const auto& t : trees) m += t.predict(x);
    return m;
  }

  double predict_proba(std::span<const double> x) const { return logistic(predict_margin(x)); }

  int predict_label(std::span<const double> x, double threshold = 0.5) const {
    return predict_proba(x) >= threshold ? 1 : 0;
  }

  friend bool operator==(const Ensemble&, const Ensemble&) = default;
};

inline double leaf_weight(double g_sum, double h_sum, double lambda, double eta) {
  if (!(h_sum + lambda > 0.0)) throw NumericError("leaf weight undefined: H + lambda <= 0");
  return -eta * g_sum / (h_sum + lambda);
}

inline double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma) {
  const double g = gl + gr, h = hl + hr;
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma;
}

struct Split {
  double threshold = 0.0;
  double gain = 0.0;
  std::size_t left_count = 0;
};

namespace detail {

// Shared split scan. value(k), grad(k), hess(k) address the k-th sample in
// ascending value order.
template <typename ValueAt, typename GradAt, typename HessAt>
std::optional<Split> scan_splits(std::size_t n, ValueAt value, GradAt grad, HessAt hess,
                                 double lambda, double gamma, double min_child_weight) {
  if (n < 2) return std::nullopt;
  double g_sum = 0.0, h_sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    g_sum += grad(k);
    h_sum += hess(k);
  }
  std::optional<Split> best;
  double gl = 0.0, hl = 0.0;
  double v = value(0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    gl += grad(k);
    hl += hess(k);
    const double next = value(k + 1);
    const double cur = v;
    v = next;
    if (!(cur < next)) continue;
    if (hl < min_child_weight) continue;
    const double gr = g_sum - gl, hr = h_sum - hl;
    if (hr < min_child_weight) break;  // hr only shrinks from here on
    const double gain = split_gain(gl, hl, gr, hr, lambda, gamma);
    if (!(gain > 0.0)) continue;
    if (!best || gain > best->gain) {
      double thr = cur + (next - cur) / 2.0;
      if (!(thr > cur)) thr = next;
      best = Split{thr, gain, k + 1};
    }
  }
  return best;
}

}  // namespace detail

// Scans midpoints between consecutive distinct values (values ascending, g
// and h aligned). Returns the highest-gain admissible split; ties keep the
// smaller threshold.
inline std::optional<Split> best_split(std::span<const double> values, std::span<const double> g,
                                       std::span<const double> h, double lambda, double gamma,
                                       double min_child_weight) {
  if (g.size() != values.size() || h.size() != values.size())
    throw InputError("best_split inputs are not aligned");
  return detail::scan_splits(
      values.size(), [&](std::size_t k) { return values[k]; }, [&](std::size_t k) { return g[k]; },
      [&](std::size_t k) { return h[k]; }, lambda, gamma, min_child_weight);
}

// Per-round gradients and hessians seen during fit, for diagnostics.
struct FitTrace {
  std::vector<std::vector<double>> grad;
  std::vector<std::vector<double>> hess;
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<std::vector<double>>& cols, const Params& p,
              const std::vector<std::vector<std::uint32_t>>& order, std::span<const double> g,
              std::span<const double> h, std::span<double> margin)
      : x_(x), cols_(cols), p_(p), work_(order), g_(g), h_(h), margin_(margin) {
    buf_.resize(x.rows());
  }

  Tree build() {
    Tree t;
    grow(t, 0, x_.rows(), 0);
    return t;
  }

 private:
  int grow(Tree& t, std::size_t begin, std::size_t end, int depth) {
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    double g_sum = 0.0, h_sum = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
      g_sum += g_[work_[0][k]];
      h_sum += h_[work_[0][k]];
    }
    t.nodes[id].cover = h_sum;

    int best_feature = -1;
    Split best{};
    // Both children need hessian mass >= min_child_weight.
    const bool splittable = h_sum >= 2.0 * p_.min_child_weight * (1.0 - 1e-12) && end - begin >= 2;
    if (depth < p_.max_depth && splittable) {
      const std::size_t m = end - begin;
      for (std::size_t f = 0; f < x_.cols(); ++f) {
        const std::uint32_t* idx = work_[f].data() + begin;
        const double* col = cols_[f].data();
        auto s = scan_splits(
            m, [&](std::size_t k) { return col[idx[k]]; }, [&](std::size_t k) { return g_[idx[k]]; },
            [&](std::size_t k) { return h_[idx[k]]; }, p_.reg_lambda, p_.reg_gamma,
            p_.min_child_weight);
        if (s && (best_feature < 0 || s->gain > best.gain)) {
          best = *s;
          best_feature = static_cast<int>(f);
        }
      }
    }

    if (best_feature < 0) {
      const double w = leaf_weight(g_sum, h_sum, p_.reg_lambda, p_.learning_rate);
      t.nodes[id].weight = w;
      for (std::size_t k = begin; k < end; ++k) margin_[work_[0][k]] += w;
      return id;
    }

    const auto f_split = static_cast<std::size_t>(best_feature);
    for (auto& idx : work_) {
      std::size_t l = begin, r = 0;
      for (std::size_t k = begin; k < end; ++k) {
        const auto i = idx[k];
        if (cols_[f_split][i] < best.threshold)
          idx[l++] = i;
        else
          buf_[r++] = i;
      }
      std::copy(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(r),
                idx.begin() + static_cast<std::ptrdiff_t>(l));
    }
    const std::size_t mid = begin + best.left_count;
    t.nodes[id].feature = best_feature;
    t.nodes[id].threshold = best.threshold;
    t.nodes[id].gain = best.gain;
    const int left = grow(t, begin, mid, depth + 1);
    const int right = grow(t, mid, end, depth + 1);
    t.nodes[id].left = left;
    t.nodes[id].right = right;
    return id;
  }

  const Matrix& x_;
  const std::vector<std::vector<double>>& cols_;
  const Params& p_;
  std::vector<std::vector<std::uint32_t>> work_;
  std::span<const double> g_, h_;
  std::span<double> margin_;
  std::vector<std::uint32_t> buf_;
};

}  // namespace detail

// Exact greedy boosting. Row order does not affect the result: each
// feature's sort order breaks value ties by the full row content, so every
// floating-point sum runs in a content-determined order.
inline Ensemble fit(const Matrix& x, std::span<const int> y, const Params& params,
                    FitTrace* trace = nullptr) {
  params.validate();
  const std::size_t n = x.rows(), p = x.cols();
  if (y.size() != n) throw InputError("label count does not match row count");
  if (n == 0) throw FitError("cannot fit on an empty dataset");
  bool has0 = false, has1 = false;
  for (int v : y) {
    if (v == 0)
      has0 = true;
    else if (v == 1)
      has1 = true;
    else
      throw InputError("labels must be 0 or 1");
  }
  if (!has0 || !has1) throw FitError("both classes must be present to fit");
  for (double v : x.data())
    if (!std::isfinite(v)) throw InputError("non-finite value in training matrix");

  Ensemble e;
  e.params = params;
  e.feature_count = p;
  e.bias = std::log(params.base_score / (1.0 - params.base_score));
  if (params.n_rounds == 0) return e;

  auto row_less = [&](std::uint32_t a, std::uint32_t b) {
    auto ra = x.row(a), rb = x.row(b);
    if (std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end())) return true;
    if (std::lexicographical_compare(rb.begin(), rb.end(), ra.begin(), ra.end())) return false;
    return y[a] < y[b];
  };
  const std::size_t n_order = std::max<std::size_t>(p, 1);
  std::vector<std::vector<std::uint32_t>> order(n_order, std::vector<std::uint32_t>(n));
  for (std::size_t f = 0; f < n_order; ++f) {
    std::iota(order[f].begin(), order[f].end(), 0u);
    if (f < p) {
      std::sort(order[f].begin(), order[f].end(), [&](std::uint32_t a, std::uint32_t b) {
        if (x(a, f) != x(b, f)) return x(a, f) < x(b, f);
        return row_less(a, b);
      });
    } else {
      std::sort(order[f].begin(), order[f].end(), row_less);
    }
  }

  std::vector<std::vector<double>> cols(p);
  for (std::size_t f = 0; f < p; ++f) cols[f] = x.column(f);

  std::vector<double> margin(n, e.bias), g(n), h(n);
  e.trees.reserve(static_cast<std::size_t>(params.n_rounds));
  for (int round = 0; round < params.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double prob = logistic(margin[i]);
      g[i] = prob - static_cast<double>(y[i]);
      h[i] = prob * (1.0 - prob);
    }
    if (trace) {
      trace->grad.push_back(g);
      trace->hess.push_back(h);
    }
    double g_sum = 0.0, h_sum = 0.0;
    for (auto i : order[0]) {
      g_sum += g[i];
      h_sum += h[i];
    }
    if (params.max_depth == 0 || h_sum < 2.0 * params.min_child_weight * (1.0 - 1e-12)) {
      Tree stump;
      stump.nodes.emplace_back();
      stump.nodes[0].cover = h_sum;
      stump.nodes[0].weight = leaf_weight(g_sum, h_sum, params.reg_lambda, params.learning_rate);
      for (auto& m : margin) m += stump.nodes[0].weight;
      e.trees.push_back(std::move(stump));
      continue;
    }
    detail::TreeBuilder builder(x, cols, params, order, g, h, margin);
    e.trees.push_back(builder.build());
  }
  return e;
}

inline void to_json(nlohmann::json& j, const Params& p) {
  j = {{"n_rounds", p.n_rounds},
       {"learning_rate", p.learning_rate},
       {"max_depth", p.max_depth},
       {"reg_lambda", p.reg_lambda},
       {"reg_gamma", p.reg_gamma},
       {"min_child_weight", p.min_child_weight},
       {"base_score", p.base_score},
       {"seed", p.seed}};
}

inline void from_json(const nlohmann::json& j, Params& p) {
  p = Params{};
  p.n_rounds = j.value("n_rounds", p.n_rounds);
  p.learning_rate = j.value("learning_rate", p.learning_rate);
  p.max_depth = j.value("max_depth", p.max_depth);
  p.reg_lambda = j.value("reg_lambda", p.reg_lambda);
  p.reg_gamma = j.value("reg_gamma", p.reg_gamma);
  p.min_child_weight = j.value("min_child_weight", p.min_child_weight);
  p.base_score = j.value("base_score", p.base_score);
  p.seed = j.value("seed", p.seed);
}

inline void to_json(nlohmann::json& j, const Tree& t) {
  auto nodes = nlohmann::json::array();
  for (const auto& n : t.nodes) {
    if (n.is_leaf()) {
      nodes.push_back({{"leaf", n.weight}, {"cover", n.cover}});
    } else {
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"gain", n.gain},
                       {"cover", n.cover}});
    }
  }
  j = {{"nodes", std::move(nodes)}};
}

inline void to_json(nlohmann::json& j, const Ensemble& e) {
  j = {{"bias", e.bias},
       {"feature_count", e.feature_count},
       {"feature_names", e.feature_names},
       {"params", e.params},
       {"trees", e.trees}};
}

inline void from_json(const nlohmann::json& j, Ensemble& e) {
  try {
    e = Ensemble{};
    j.at("bias").get_to(e.bias);
    j.at("feature_count").get_to(e.feature_count);
    if (j.contains("feature_names")) j.at("feature_names").get_to(e.feature_names);
    if (j.contains("params")) j.at("params").get_to(e.params);
    for (const auto& jt : j.at("trees")) {
      Tree t;
      for (const auto& jn : jt.at("nodes")) {
        Node n;
        n.cover = jn.value("cover", 0.0);
        if (jn.contains("leaf")) {
          n.weight = jn.at("leaf").get<double>();
        } else {
          n.feature = jn.at("feature").get<int>();
          n.threshold = jn.at("threshold").get<double>();
          n.left = jn.at("left").get<int>();
          n.right = jn.at("right").get<int>();
          n.gain = jn.value("gain", 0.0);
        }
        t.nodes.push_back(n);
      }
      e.trees.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw SchemaError(std::string("malformed ensemble: ") + ex.what());
  }
  // Children must point forward so every path terminates.
  for (const auto& t : e.trees) {
    if (t.nodes.empty()) throw SchemaError("tree with no nodes");
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      const auto& n = t.nodes[i];
      if (n.is_leaf()) continue;
      const auto sz = static_cast<int>(t.nodes.size());
      if (n.left <= static_cast<int>(i) || n.right <= static_cast<int>(i) || n.left >= sz ||
          n.right >= sz)
        throw SchemaError("tree node children out of order");
      if (static_cast<std::size_t>(n.feature) >= e.feature_count)
        throw SchemaError("split feature index out of range");
    }
  }
}

}  // namespace ovxai::gbdt

#endif  // OVXAI_GBDT_HPP_
