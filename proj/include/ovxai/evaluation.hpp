#ifndef OVXAI_EVALUATION_HPP_
#define OVXAI_EVALUATION_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ovxai/common.hpp"
#include "ovxai/dataset.hpp"
#include "ovxai/gbdt.hpp"
#include "ovxai/mask.hpp"

namespace ovxai::eval {

// Positive class = malignant.
struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct MetricSet {
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double precision = 0.0;
  double g_mean = 0.0;
  double roc_auc = 0.0;
  double mcc = 0.0;

  friend bool operator==(const MetricSet&, const MetricSet&) = default;
};

inline ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predicted) {
  if (labels.size() != predicted.size()) throw InputError("labels and predictions differ in size");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1)
      (predicted[i] == 1 ? cm.tp : cm.fn)++;
    else
      (predicted[i] == 1 ? cm.fp : cm.tn)++;
  }
  return cm;
}

// Mann-Whitney form of the ROC area; tied scores contribute 1/2. Returns 0.5
// when one class is absent.
inline double roc_auc(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw InputError("labels and scores differ in size");
  const std::size_t n = labels.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (labels[idx[k]] == 1) {
        pos_rank_sum += midrank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return 0.5;
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

// Undefined ratios (zero denominators) are reported as 0.
inline MetricSet compute_metrics(const ConfusionMatrix& cm, std::span<const int> labels,
                                 std::span<const double> scores) {
  if (cm.total() == 0) throw InputError("cannot compute metrics on zero samples");
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  const auto tp = static_cast<double>(cm.tp), fp = static_cast<double>(cm.fp);
  const auto tn = static_cast<double>(cm.tn), fn = static_cast<double>(cm.fn);
  MetricSet m;
  m.accuracy = (tp + tn) / static_cast<double>(cm.total());
  m.sensitivity = ratio(tp, tp + fn);
  m.specificity = ratio(tn, tn + fp);
  m.precision = ratio(tp, tp + fp);
  m.g_mean = std::sqrt(m.sensitivity * m.specificity);
  const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  m.mcc = den > 0.0 ? (tp * tn - fp * fn) / std::sqrt(den) : 0.0;
  m.roc_auc = labels.empty() ? 0.5 : roc_auc(labels, scores);
  return m;
}

// Element-wise unweighted mean of the two strata ("Total Average").
inline MetricSet aggregate_strata(const MetricSet& a, const MetricSet& b) {
  auto mean = [](double x, double y) { return (x + y) / 2.0; };
  return {mean(a.accuracy, b.accuracy),   mean(a.sensitivity, b.sensitivity),
          mean(a.specificity, b.specificity), mean(a.precision, b.precision),
          mean(a.g_mean, b.g_mean),       mean(a.roc_auc, b.roc_auc),
          mean(a.mcc, b.mcc)};
}

// Each class is shuffled and dealt round-robin across the folds; the dealing
// position carries over between classes so fold sizes stay balanced.
inline std::vector<std::vector<std::size_t>> stratified_kfold(std::span<const int> labels, int k,
                                                              std::uint64_t seed) {
  if (k < 2) throw InputError("k must be at least 2");
  std::vector<std::size_t> cls[2];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InputError("labels must be 0 or 1");
    cls[labels[i]].push_back(i);
  }
  const auto uk = static_cast<std::size_t>(k);
  if (cls[0].size() < uk || cls[1].size() < uk)
    throw InputError("each class needs at least k = " + std::to_string(k) + " samples (have " +
                     std::to_string(cls[0].size()) + " benign, " + std::to_string(cls[1].size()) +
                     " malignant)");
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> folds(uk);
  std::size_t pos = 0;
  for (auto& c : cls) {
    shuffle(c, rng);
    for (auto i : c) folds[pos++ % uk].push_back(i);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

struct CvResult {
  MetricSet metrics;
  ConfusionMatrix cm;
  std::vector<double> oof_proba;  // per row, from the model that held it out
  std::vector<int> labels;
  std::vector<int> fold_of;
  std::vector<gbdt::Ensemble> models;  // filled when keep_models is set
  std::vector<std::vector<std::size_t>> folds;
};

inline std::vector<std::size_t> complement(const std::vector<std::vector<std::size_t>>& folds,
                                           std::size_t held_out) {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < folds.size(); ++f)
    if (f != held_out) out.insert(out.end(), folds[f].begin(), folds[f].end());
  std::sort(out.begin(), out.end());
  return out;
}

// Pools out-of-fold predictions from explicit folds over a complete matrix.
inline CvResult cross_validate_folds(const Matrix& x, std::span<const int> labels,
                                     const std::vector<std::vector<std::size_t>>& folds,
                                     const gbdt::Params& params, bool keep_models = false,
                                     double threshold = 0.5) {
  CvResult res;
  const std::size_t n = x.rows();
  res.oof_proba.assign(n, 0.0);
  res.labels.assign(labels.begin(), labels.end());
  res.fold_of.assign(n, -1);
  res.folds = folds;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto train = complement(folds, f);
    std::vector<int> y_train;
    y_train.reserve(train.size());
    for (auto i : train) y_train.push_back(labels[i]);
    auto model = gbdt::fit(x.select_rows(train), y_train, params);
    for (auto i : folds[f]) {
      res.oof_proba[i] = model.predict_proba(x.row(i));
      res.fold_of[i] = static_cast<int>(f);
    }
    if (keep_models) res.models.push_back(std::move(model));
  }
  std::vector<int> pred(n);
  for (std::size_t i = 0; i < n; ++i) pred[i] = res.oof_proba[i] >= threshold ? 1 : 0;
  res.cm = confusion(labels, pred);
  res.metrics = compute_metrics(res.cm, labels, res.oof_proba);
  return res;
}

inline CvResult cross_validate(const Dataset& d, const FeatureMask& mask, const gbdt::Params& params,
                               int k, std::uint64_t seed, bool keep_models = false) {
  if (!d.complete()) throw InputError("cross-validation needs a complete dataset");
  if (mask.size() != d.cols()) throw InputError("mask length does not match feature count");
  if (mask.popcount() == 0) throw InputError("mask selects no features");
  const auto folds = stratified_kfold(d.labels, k, seed);
  const auto cols = mask.indices();
  return cross_validate_folds(d.values.select_cols(cols), d.labels, folds, params, keep_models);
}

inline void to_json(nlohmann::json& j, const MetricSet& m) {
  j = {{"accuracy", m.accuracy},   {"sensitivity", m.sensitivity}, {"specificity", m.specificity},
       {"precision", m.precision}, {"g_mean", m.g_mean},           {"roc_auc", m.roc_auc},
       {"mcc", m.mcc}};
}

inline void from_json(const nlohmann::json& j, MetricSet& m) {
  j.at("accuracy").get_to(m.accuracy);
  j.at("sensitivity").get_to(m.sensitivity);
  j.at("specificity").get_to(m.specificity);
  j.at("precision").get_to(m.precision);
  j.at("g_mean").get_to(m.g_mean);
  j.at("roc_auc").get_to(m.roc_auc);
  j.at("mcc").get_to(m.mcc);
}

inline void to_json(nlohmann::json& j, const ConfusionMatrix& c) {
  j = {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

// One row of the Table-3 style CSV layout.
inline std::string metrics_csv_row(const std::string& approach, const std::string& status,
                                   const MetricSet& m) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << approach << ',' << status << ',' << m.accuracy << ',' << m.sensitivity << ','
     << m.specificity << ',' << m.precision << ',' << m.g_mean << ',' << m.roc_auc << ',' << m.mcc;
  return os.str();
}

inline constexpr const char* kMetricsCsvHeader =
    "Approach,Menopause Status,Accuracy,Sensitivity,Specificity,Precision,G-mean,ROC-AUC,MCC";

}  // namespace ovxai::eval

#endif  // OVXAI_EVALUATION_HPP_
