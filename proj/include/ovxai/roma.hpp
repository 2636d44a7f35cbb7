#ifndef OVXAI_ROMA_HPP_
#define OVXAI_ROMA_HPP_

#include <cmath>
#include <optional>
#include <ostream>
#include <iomanip>
#include <string>
#include <vector>

#include "json.hpp"
#include "ovxai/common.hpp"
#include "ovxai/dataset.hpp"
#include "ovxai/evaluation.hpp"

// Risk of Ovarian Malignancy Algorithm: a menopause-specific logistic score
// over ln(HE4) and ln(CA125).
namespace ovxai::roma {

enum class Risk { low, high };

inline std::string to_string(Risk r) { return r == Risk::high ? "high" : "low"; }

struct CutoffSet {
  double pre_pct = 13.1;
  double post_pct = 27.7;
  std::string label = "standard";

  double for_stratum(Stratum s) const { return s == Stratum::pre ? pre_pct : post_pct; }
};

inline CutoffSet standard_cutoffs() { return {13.1, 27.7, "standard"}; }
inline CutoffSet terlikowska_cutoffs() { return {14.9, 33.4, "terlikowska"}; }

inline CutoffSet cutoffs_by_label(const std::string& label) {
  if (label == "standard") return standard_cutoffs();
  if (label == "terlikowska") return terlikowska_cutoffs();
  throw ConfigError("unknown cutoff set '" + label + "' (expected standard or terlikowska)");
}

struct RomaResult {
  double pi = 0.0;
  double probability_pct = 0.0;
  Risk risk = Risk::low;
  Stratum stratum = Stratum::pre;
  double cutoff_used = 0.0;
};

// HE4 in pmol/L, CA125 in U/mL.
inline double predictive_index(double he4, double ca125, Stratum s) {
  if (!(he4 > 0.0) || !(ca125 > 0.0))
    throw DomainError("HE4 and CA125 must be positive to take logarithms");
  if (s == Stratum::pre) return -12.0 + 2.38 * std::log(he4) + 0.0626 * std::log(ca125);
  return -8.09 + 1.04 * std::log(he4) + 0.732 * std::log(ca125);
}

inline double roma_probability(double pi) { return 100.0 * logistic(pi); }

// High risk when the probability reaches the stratum cutoff (inclusive).
inline Risk classify(double prob_pct, Stratum s, const CutoffSet& c) {
  return prob_pct >= c.for_stratum(s) ? Risk::high : Risk::low;
}

inline RomaResult score(double he4, double ca125, Stratum s, const CutoffSet& c) {
  RomaResult r;
  r.stratum = s;
  r.pi = predictive_index(he4, ca125, s);
  r.probability_pct = roma_probability(r.pi);
  r.cutoff_used = c.for_stratum(s);
  r.risk = classify(r.probability_pct, s, c);
  return r;
}

struct PatientScore {
  std::size_t row_id = 0;
  int label = 0;
  RomaResult result;
};

struct StratumEvaluation {
  Stratum stratum = Stratum::pre;
  eval::MetricSet metrics;
  eval::ConfusionMatrix cm;
  std::size_t scored = 0;
  std::size_t excluded = 0;  // rows with a non-positive marker
  std::vector<PatientScore> scores;
};

// Scores every row of a single-stratum dataset holding marker values in
// physical units.
inline StratumEvaluation evaluate_stratum(const Dataset& d, Stratum s, const CutoffSet& c,
                                          const std::string& he4_name = "HE4",
                                          const std::string& ca125_name = "CA125") {
  auto he4 = d.schema.index_of(he4_name);
  auto ca125 = d.schema.index_of(ca125_name);
  if (!he4 || !ca125) throw SchemaError("ROMA needs HE4 and CA125 columns");
  StratumEvaluation ev;
  ev.stratum = s;
  std::vector<int> labels, pred;
  std::vector<double> probs;
  for (std::size_t r = 0; r < d.rows(); ++r) {
    if (d.is_missing(r, *he4) || d.is_missing(r, *ca125)) {
      ++ev.excluded;
      continue;
    }
    const double h = d.values(r, *he4), k = d.values(r, *ca125);
    if (!(h > 0.0) || !(k > 0.0)) {
      ++ev.excluded;
      continue;
    }
    auto res = score(h, k, s, c);
    ev.scores.push_back({d.row_ids[r], d.labels[r], res});
    labels.push_back(d.labels[r]);
    pred.push_back(res.risk == Risk::high ? 1 : 0);
    probs.push_back(res.probability_pct);
  }
  ev.scored = labels.size();
  if (ev.scored == 0) throw DataError("no rows could be scored by ROMA");
  ev.cm = eval::confusion(labels, pred);
  ev.metrics = eval::compute_metrics(ev.cm, labels, probs);
  return ev;
}

struct Evaluation {
  CutoffSet cutoffs;
  StratumEvaluation pre;
  StratumEvaluation post;
  eval::MetricSet average;
};

// Dataset with a stratum column; each row is scored with its own stratum's
// formula and cutoff.
inline Evaluation evaluate_roma(const Dataset& d, const CutoffSet& c,
                                const std::string& he4_name = "HE4",
                                const std::string& ca125_name = "CA125") {
  auto [pre, post] = stratify(d);
  Evaluation e;
  e.cutoffs = c;
  e.pre = evaluate_stratum(pre, Stratum::pre, c, he4_name, ca125_name);
  e.post = evaluate_stratum(post, Stratum::post, c, he4_name, ca125_name);
  e.average = eval::aggregate_strata(e.pre.metrics, e.post.metrics);
  return e;
}

inline nlohmann::json stratum_json(const StratumEvaluation& s) {
  nlohmann::json j = s.metrics;
  j["confusion"] = s.cm;
  j["scored"] = s.scored;
  j["excluded"] = s.excluded;
  return j;
}

inline void write_scores_csv(std::ostream& out, const std::vector<PatientScore>& scores) {
  out << "id,stratum,label,PI,probability_pct,risk\n" << std::setprecision(17);
  for (const auto& s : scores)
    out << s.row_id << ',' << (s.result.stratum == Stratum::pre ? "pre" : "post") << ','
        << s.label << ',' << s.result.pi << ',' << s.result.probability_pct << ','
        << to_string(s.result.risk) << '\n';
}

}  // namespace ovxai::roma

#endif  // OVXAI_ROMA_HPP_
