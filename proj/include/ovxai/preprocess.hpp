#ifndef OVXAI_PREPROCESS_HPP_
#define OVXAI_PREPROCESS_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ovxai/common.hpp"
#include "ovxai/dataset.hpp"

namespace ovxai::preprocess {

struct Config {
  int n_iterations = 10;
  double ridge = 1e-6;
};

struct Fences {
  std::vector<double> low;
  std::vector<double> high;
};

// Per-column mean and population standard deviation.
struct ColumnStats {
  std::vector<double> mu;
  std::vector<double> sigma;
};

// Linear model of one column on every other column.
struct Imputer {
  std::size_t target = 0;
  std::vector<double> coef;  // one per feature, coef[target] == 0
  double intercept = 0.0;

  double predict(std::span<const double> row) const {
    double v = intercept;
    for (std::size_t j = 0; j < coef.size(); ++j)
      if (j != target) v += coef[j] * row[j];
    return v;
  }
};

struct Model {
  std::vector<std::string> feature_names;
  Fences fences;
  ColumnStats stats;
  std::vector<Imputer> imputers;  // aligned with visit_order
  std::vector<std::size_t> visit_order;
  int n_iterations = 10;
  std::vector<double> initial_fill;
};

// Quantile with linear interpolation between order statistics at position
// q * (n - 1).
inline double quantile_sorted(std::span<const double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// Tukey fences Q1 - 1.5 IQR, Q3 + 1.5 IQR.
inline std::pair<double, double> fit_fences(std::span<const double> column) {
  if (column.empty()) throw InputError("cannot fit fences on an empty column");
  std::vector<double> s(column.begin(), column.end());
  std::sort(s.begin(), s.end());
  const double q1 = quantile_sorted(s, 0.25);
  const double q3 = quantile_sorted(s, 0.75);
  const double iqr = q3 - q1;
  return {q1 - 1.5 * iqr, q3 + 1.5 * iqr};
}

namespace detail {

inline Imputer fit_imputer(const Matrix& work, const Dataset& d, std::size_t target,
                           double ridge) {
  const std::size_t p = work.cols();
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < work.rows(); ++r)
    if (!d.is_missing(r, target)) rows.push_back(r);
  std::vector<std::size_t> preds;
  for (std::size_t j = 0; j < p; ++j)
    if (j != target) preds.push_back(j);

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto k = static_cast<Eigen::Index>(preds.size());
  Eigen::MatrixXd a(n, k);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i) = work(rows[i], target);
    for (Eigen::Index j = 0; j < k; ++j) a(i, j) = work(rows[i], preds[j]);
  }
  const Eigen::RowVectorXd a_mean = a.colwise().mean();
  const double y_mean = y.mean();
  a.rowwise() -= a_mean;
  y.array() -= y_mean;

  Imputer imp;
  imp.target = target;
  imp.coef.assign(p, 0.0);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  if (k > 0) {
    Eigen::MatrixXd gram = a.transpose() * a;
    gram.diagonal().array() += ridge;
    beta = gram.ldlt().solve(a.transpose() * y);
  }
  double intercept = y_mean;
  for (Eigen::Index j = 0; j < k; ++j) {
    imp.coef[preds[j]] = beta(j);
    intercept -= beta(j) * a_mean(j);
  }
  imp.intercept = intercept;
  return imp;
}

// Initial fill followed by n_iterations sweeps of the stored regressors.
inline Matrix replay_imputation(const Model& m, const Dataset& d) {
  Matrix work = d.values;
  for (std::size_t r = 0; r < d.rows(); ++r)
    for (std::size_t c = 0; c < d.cols(); ++c)
      if (d.is_missing(r, c)) work(r, c) = m.initial_fill[c];
  if (d.complete()) return work;
  for (int it = 0; it < m.n_iterations; ++it) {
    for (const auto& imp : m.imputers) {
      for (std::size_t r = 0; r < d.rows(); ++r)
        if (d.is_missing(r, imp.target)) work(r, imp.target) = imp.predict(work.row(r));
    }
  }
  return work;
}

inline void check_schema(const Model& m, const Dataset& d) {
  if (d.cols() != m.feature_names.size())
    throw SchemaError("dataset has " + std::to_string(d.cols()) + " features, model expects " +
                      std::to_string(m.feature_names.size()));
  for (std::size_t c = 0; c < d.cols(); ++c)
    if (d.schema.features[c].name != m.feature_names[c])
      throw SchemaError("feature '" + d.schema.features[c].name + "' where model expects '" +
                        m.feature_names[c] + "'");
}

}  // namespace detail

// Completes missing cells with the model's chained regressors; values stay in
// physical units.
inline Matrix impute(const Model& m, const Dataset& d) {
  detail::check_schema(m, d);
  return detail::replay_imputation(m, d);
}

inline void cap(const Model& m, Matrix& x) {
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c)
      x(r, c) = std::clamp(x(r, c), m.fences.low[c], m.fences.high[c]);
}

inline void standardize(const Model& m, Matrix& x) {
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double s = m.stats.sigma[c];
      x(r, c) = s > 0.0 ? (x(r, c) - m.stats.mu[c]) / s : 0.0;
    }
}

// Fits chained-equation imputation, outlier fences and z-score statistics,
// in that order. Fences and statistics are computed on the training table as
// completed by the stored regressors, so transform(fit(d), d) reproduces it.
inline Model fit(const Dataset& train, const Config& cfg = {}) {
  if (train.rows() < 2) throw FitError("preprocessing needs at least 2 rows");
  if (cfg.n_iterations < 1) throw FitError("n_iterations must be at least 1");
  const std::size_t n = train.rows(), p = train.cols();

  Model m;
  m.feature_names = train.schema.names();
  m.n_iterations = cfg.n_iterations;
  m.initial_fill.assign(p, 0.0);

  std::vector<std::size_t> missing_count(p, 0);
  for (std::size_t c = 0; c < p; ++c) {
    double sum = 0.0;
    std::size_t obs = 0;
    for (std::size_t r = 0; r < n; ++r) {
      if (train.is_missing(r, c)) {
        ++missing_count[c];
      } else {
        sum += train.values(r, c);
        ++obs;
      }
    }
    if (obs == 0)
      throw FitError("feature '" + train.schema.features[c].name + "' is entirely missing");
    m.initial_fill[c] = sum / static_cast<double>(obs);
    if (missing_count[c] > 0) m.visit_order.push_back(c);
  }
  std::stable_sort(m.visit_order.begin(), m.visit_order.end(),
                   [&](std::size_t a, std::size_t b) { return missing_count[a] < missing_count[b]; });

  if (!m.visit_order.empty()) {
    Matrix work = train.values;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < p; ++c)
        if (train.is_missing(r, c)) work(r, c) = m.initial_fill[c];
    m.imputers.resize(m.visit_order.size());
    for (int it = 0; it < cfg.n_iterations; ++it) {
      for (std::size_t v = 0; v < m.visit_order.size(); ++v) {
        const std::size_t target = m.visit_order[v];
        m.imputers[v] = detail::fit_imputer(work, train, target, cfg.ridge);
        for (std::size_t r = 0; r < n; ++r)
          if (train.is_missing(r, target)) work(r, target) = m.imputers[v].predict(work.row(r));
      }
    }
  }

  Matrix completed = detail::replay_imputation(m, train);
  m.fences.low.resize(p);
  m.fences.high.resize(p);
  for (std::size_t c = 0; c < p; ++c) {
    auto [lo, hi] = fit_fences(completed.column(c));
    m.fences.low[c] = lo;
    m.fences.high[c] = hi;
  }
  cap(m, completed);
  m.stats.mu.assign(p, 0.0);
  m.stats.sigma.assign(p, 0.0);
  for (std::size_t c = 0; c < p; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) sum += completed(r, c);
    const double mu = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) ss += (completed(r, c) - mu) * (completed(r, c) - mu);
    m.stats.mu[c] = mu;
    m.stats.sigma[c] = std::sqrt(ss / static_cast<double>(n));
  }
  return m;
}

// Impute, cap, standardize. The result has no missing cells.
inline Dataset transform(const Model& m, const Dataset& d) {
  Matrix x = impute(m, d);
  cap(m, x);
  standardize(m, x);
  Dataset out = d;
  out.values = std::move(x);
  std::fill(out.missing.begin(), out.missing.end(), 0);
  return out;
}

// Imputed dataset in physical units (no capping, no scaling).
inline Dataset transform_impute_only(const Model& m, const Dataset& d) {
  Dataset out = d;
  out.values = impute(m, d);
  std::fill(out.missing.begin(), out.missing.end(), 0);
  return out;
}

inline void to_json(nlohmann::json& j, const Imputer& imp) {
  j = {{"target", imp.target}, {"coef", imp.coef}, {"intercept", imp.intercept}};
}
inline void from_json(const nlohmann::json& j, Imputer& imp) {
  j.at("target").get_to(imp.target);
  j.at("coef").get_to(imp.coef);
  j.at("intercept").get_to(imp.intercept);
}

inline void to_json(nlohmann::json& j, const Model& m) {
  j = {{"feature_names", m.feature_names},
       {"fences", {{"low", m.fences.low}, {"high", m.fences.high}}},
       {"stats", {{"mu", m.stats.mu}, {"sigma", m.stats.sigma}}},
       {"imputers", m.imputers},
       {"visit_order", m.visit_order},
       {"n_iterations", m.n_iterations},
       {"initial_fill", m.initial_fill}};
}

inline void from_json(const nlohmann::json& j, Model& m) {
  j.at("feature_names").get_to(m.feature_names);
  j.at("fences").at("low").get_to(m.fences.low);
  j.at("fences").at("high").get_to(m.fences.high);
  j.at("stats").at("mu").get_to(m.stats.mu);
  j.at("stats").at("sigma").get_to(m.stats.sigma);
  j.at("imputers").get_to(m.imputers);
  j.at("visit_order").get_to(m.visit_order);
  j.at("n_iterations").get_to(m.n_iterations);
  j.at("initial_fill").get_to(m.initial_fill);
  const std::size_t p = m.feature_names.size();
  if (m.fences.low.size() != p || m.fences.high.size() != p || m.stats.mu.size() != p ||
      m.stats.sigma.size() != p || m.initial_fill.size() != p ||
      m.imputers.size() != m.visit_order.size())
    throw SchemaError("preprocess model arrays disagree with the feature count");
}

}  // namespace ovxai::preprocess

#endif  // OVXAI_PREPROCESS_HPP_
