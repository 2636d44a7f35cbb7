#ifndef OVXAI_PIPELINE_HPP_
#define OVXAI_PIPELINE_HPP_

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ovxai/common.hpp"
#include "ovxai/dataset.hpp"
#include "ovxai/evaluation.hpp"
#include "ovxai/explain.hpp"
#include "ovxai/ga_select.hpp"
#include "ovxai/gbdt.hpp"
#include "ovxai/mask.hpp"
#include "ovxai/preprocess.hpp"
#include "ovxai/roma.hpp"

// End-to-end orchestration: load, stratify, preprocess, select features,
// cross-validate, explain and compare with ROMA, writing report files.
namespace ovxai::pipeline {

namespace fs = std::filesystem;

struct RunConfig {
  std::uint64_t seed = 42;
  int k_folds = 10;
  ga::Params ga;
  gbdt::Params gbdt;
  std::string cutoffs = "standard";
  bool leak_safe = false;
  bool nested = false;
  // "ovarian" for the bundled clinical schema, "infer" to take every column
  // except label/stratum/excluded ones, or a path to a schema JSON file.
  std::string schema = "infer";
  std::string label_column = "label";
  std::string stratum_column = "stratum";
  std::vector<std::string> exclude_columns;
  std::string he4_column = "HE4";
  std::string ca125_column = "CA125";
  std::string output_dir = "out";
  std::size_t background_rows = 100;
  std::size_t force_top_correct = 3;
  unsigned threads = 1;
  preprocess::Config preprocess;

  void validate() const {
    if (k_folds < 2) throw ConfigError("k_folds must be >= 2 (got " + std::to_string(k_folds) + ")");
    ga.validate();
    gbdt.validate();
    roma::cutoffs_by_label(cutoffs);
    if (background_rows < 1) throw ConfigError("background_rows must be >= 1");
    if (preprocess.n_iterations < 1) throw ConfigError("preprocess.n_iterations must be >= 1");
    if (!(preprocess.ridge >= 0.0)) throw ConfigError("preprocess.ridge must be >= 0");
    if (threads < 1) throw ConfigError("threads must be >= 1");
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"k_folds", c.k_folds},
          {"ga", c.ga},
          {"gbdt", c.gbdt},
          {"cutoffs", c.cutoffs},
          {"leak_safe", c.leak_safe},
          {"nested", c.nested},
          {"schema", c.schema},
          {"label_column", c.label_column},
          {"stratum_column", c.stratum_column},
          {"exclude_columns", c.exclude_columns},
          {"he4_column", c.he4_column},
          {"ca125_column", c.ca125_column},
          {"output_dir", c.output_dir},
          {"background_rows", c.background_rows},
          {"force_top_correct", c.force_top_correct},
          {"threads", c.threads},
          {"preprocess",
           {{"n_iterations", c.preprocess.n_iterations}, {"ridge", c.preprocess.ridge}}}};
}

inline RunConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.k_folds = j.value("k_folds", c.k_folds);
    if (j.contains("ga")) c.ga = j.at("ga").get<ga::Params>();
    if (j.contains("gbdt")) c.gbdt = j.at("gbdt").get<gbdt::Params>();
    c.cutoffs = j.value("cutoffs", c.cutoffs);
    c.leak_safe = j.value("leak_safe", c.leak_safe);
    c.nested = j.value("nested", c.nested);
    c.schema = j.value("schema", c.schema);
    if (c.schema == "ovarian") {
      auto s = ovarian_schema();
      c.label_column = s.label_name;
      c.stratum_column = s.stratum_name;
    }
    c.label_column = j.value("label_column", c.label_column);
    c.stratum_column = j.value("stratum_column", c.stratum_column);
    c.exclude_columns = j.value("exclude_columns", c.exclude_columns);
    c.he4_column = j.value("he4_column", c.he4_column);
    c.ca125_column = j.value("ca125_column", c.ca125_column);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.background_rows = j.value("background_rows", c.background_rows);
    c.force_top_correct = j.value("force_top_correct", c.force_top_correct);
    c.threads = j.value("threads", c.threads);
    if (j.contains("preprocess")) {
      const auto& p = j.at("preprocess");
      c.preprocess.n_iterations = p.value("n_iterations", c.preprocess.n_iterations);
      c.preprocess.ridge = p.value("ridge", c.preprocess.ridge);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config field: ") + e.what());
  }
  c.validate();
  return c;
}

inline nlohmann::json read_json_file(const std::string& path, bool config_error) {
  std::ifstream in(path);
  auto fail = [&](const std::string& msg) -> nlohmann::json {
    if (config_error) throw ConfigError(msg);
    throw DataError(msg);
  };
  if (!in) return fail("cannot open " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    return fail(path + " is not valid JSON: " + e.what());
  }
}

inline RunConfig load_config(const std::string& path) {
  return parse_config(read_json_file(path, true));
}

inline std::string config_hash(const RunConfig& c) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(to_json(c).dump());
  return os.str();
}

inline Schema resolve_schema(const RunConfig& c, const std::string& data_path) {
  if (c.schema == "ovarian") {
    auto s = ovarian_schema();
    s.label_name = c.label_column;
    s.stratum_name = c.stratum_column;
    return s;
  }
  if (c.schema == "infer" || c.schema.empty())
    return infer_schema(data_path, c.label_column, c.stratum_column, c.exclude_columns);
  return load_schema(c.schema);
}

inline void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

// File-name-safe form of a feature name; '#' and '%' get distinct spellings
// so BASO# and BASO% do not collide.
inline std::string file_token(const std::string& name) {
  std::string out;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')
      out.push_back(c);
    else if (c == '#')
      out += "_abs";
    else if (c == '%')
      out += "_pct";
    else
      out.push_back('_');
  }
  return out;
}

// Out-of-fold evaluation with the preprocessing model refitted on every
// training split.
inline eval::CvResult cross_validate_leak_safe(const Dataset& raw, const FeatureMask& mask,
                                               const gbdt::Params& params,
                                               const std::vector<std::vector<std::size_t>>& folds,
                                               const preprocess::Config& pcfg,
                                               bool keep_models = false) {
  const std::size_t n = raw.rows();
  eval::CvResult res;
  res.oof_proba.assign(n, 0.0);
  res.labels = raw.labels;
  res.fold_of.assign(n, -1);
  res.folds = folds;
  const auto cols = mask.indices();
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto train_idx = eval::complement(folds, f);
    const auto train = raw.select_rows(train_idx);
    const auto test = raw.select_rows(folds[f]);
    const auto pm = preprocess::fit(train, pcfg);
    const auto zt = preprocess::transform(pm, train);
    const auto zs = preprocess::transform(pm, test);
    auto model = gbdt::fit(zt.values.select_cols(cols), zt.labels, params);
    const auto xs = zs.values.select_cols(cols);
    for (std::size_t k = 0; k < folds[f].size(); ++k) {
      res.oof_proba[folds[f][k]] = model.predict_proba(xs.row(k));
      res.fold_of[folds[f][k]] = static_cast<int>(f);
    }
    if (keep_models) res.models.push_back(std::move(model));
  }
  std::vector<int> pred(n);
  for (std::size_t i = 0; i < n; ++i) pred[i] = res.oof_proba[i] >= 0.5 ? 1 : 0;
  res.cm = eval::confusion(raw.labels, pred);
  res.metrics = eval::compute_metrics(res.cm, raw.labels, res.oof_proba);
  return res;
}

struct StratumReport {
  Stratum stratum = Stratum::pre;
  std::size_t rows = 0;
  preprocess::Model preprocess;
  eval::CvResult full;  // all features
  eval::CvResult selected;  // GA-selected features
  ga::RunRecord ga_record;
  FeatureMask mask;
  std::vector<FeatureMask> fold_masks;  // nested mode only
  std::vector<std::string> feature_names;
  std::vector<std::string> explain_names;
  std::vector<explain::Attribution> attributions;
  Matrix explain_values;  // model-space values of the explained rows
  Matrix explain_raw;     // imputed physical values of the same rows
  gbdt::Ensemble final_model;
  std::optional<roma::StratumEvaluation> roma_primary;
  std::map<std::string, roma::StratumEvaluation> roma_by_cutoff;
  std::string roma_skip_reason;
};

inline std::string stratum_tag(Stratum s) { return s == Stratum::pre ? "pre" : "post"; }

// Runs selection, evaluation and explanation for one stratum.
inline StratumReport run_stratum(const Dataset& raw, Stratum s, const RunConfig& cfg) {
  StratumReport rep;
  rep.stratum = s;
  rep.rows = raw.rows();
  rep.feature_names = raw.schema.names();
  const std::string tag = stratum_tag(s);
  const auto fold_seed = derive_seed(cfg.seed, "folds/" + tag);
  const auto ga_seed = derive_seed(cfg.seed, "ga/" + tag);
  const auto fitness_seed = derive_seed(cfg.seed, "ga-fitness/" + tag);
  const auto bg_seed = derive_seed(cfg.seed, "background/" + tag);

  std::size_t pos = 0;
  for (int y : raw.labels) pos += static_cast<std::size_t>(y);
  const std::size_t neg = raw.rows() - pos;
  if (pos < static_cast<std::size_t>(cfg.k_folds) || neg < static_cast<std::size_t>(cfg.k_folds))
    throw DataError(to_string(s) + " stratum has " + std::to_string(pos) + " malignant and " +
                    std::to_string(neg) + " benign rows; k_folds = " +
                    std::to_string(cfg.k_folds) + " needs at least that many of each");

  rep.preprocess = preprocess::fit(raw, cfg.preprocess);
  const Dataset z = preprocess::transform(rep.preprocess, raw);
  const Dataset imputed = preprocess::transform_impute_only(rep.preprocess, raw);
  const auto folds = eval::stratified_kfold(raw.labels, cfg.k_folds, fold_seed);
  const std::size_t p = raw.cols();

  auto cv = [&](const FeatureMask& m, bool keep) {
    if (cfg.leak_safe)
      return cross_validate_leak_safe(raw, m, cfg.gbdt, folds, cfg.preprocess, keep);
    return eval::cross_validate_folds(z.values.select_cols(m.indices()), z.labels, folds, cfg.gbdt,
                                      keep);
  };

  rep.full = cv(FeatureMask::all(p), false);

  ga::Params gp = cfg.ga;
  gp.seed = ga_seed;
  auto run_selection = [&](const Dataset& table, std::uint64_t seed_offset) {
    ga::Params local = gp;
    local.seed = splitmix64(gp.seed + seed_offset);
    const auto fseed = splitmix64(fitness_seed + seed_offset);
    return ga::run_ga(
        table, local,
        [&](const FeatureMask& m) {
          return ga::cv_accuracy_fitness(table, m, local.fitness_folds, fseed, cfg.gbdt);
        },
        cfg.threads);
  };
  rep.ga_record = run_selection(z, 0);
  rep.mask = rep.ga_record.final_mask;

  // Per-fold models and the mask each one uses.
  std::vector<FeatureMask> model_masks;
  if (!cfg.nested) {
    rep.selected = cv(rep.mask, true);
    model_masks.assign(folds.size(), rep.mask);
  } else {
    rep.selected.oof_proba.assign(raw.rows(), 0.0);
    rep.selected.labels = raw.labels;
    rep.selected.fold_of.assign(raw.rows(), -1);
    rep.selected.folds = folds;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const auto train_idx = eval::complement(folds, f);
      Dataset ztrain, ztest;
      if (cfg.leak_safe) {
        const auto pm = preprocess::fit(raw.select_rows(train_idx), cfg.preprocess);
        ztrain = preprocess::transform(pm, raw.select_rows(train_idx));
        ztest = preprocess::transform(pm, raw.select_rows(folds[f]));
      } else {
        ztrain = z.select_rows(train_idx);
        ztest = z.select_rows(folds[f]);
      }
      auto rec = run_selection(ztrain, f + 1);
      const auto cols = rec.final_mask.indices();
      auto model = gbdt::fit(ztrain.values.select_cols(cols), ztrain.labels, cfg.gbdt);
      const auto xs = ztest.values.select_cols(cols);
      for (std::size_t k = 0; k < folds[f].size(); ++k) {
        rep.selected.oof_proba[folds[f][k]] = model.predict_proba(xs.row(k));
        rep.selected.fold_of[folds[f][k]] = static_cast<int>(f);
      }
      rep.selected.models.push_back(std::move(model));
      rep.fold_masks.push_back(rec.final_mask);
      model_masks.push_back(rec.final_mask);
    }
    std::vector<int> pred(raw.rows());
    for (std::size_t i = 0; i < raw.rows(); ++i)
      pred[i] = rep.selected.oof_proba[i] >= 0.5 ? 1 : 0;
    rep.selected.cm = eval::confusion(raw.labels, pred);
    rep.selected.metrics = eval::compute_metrics(rep.selected.cm, raw.labels, rep.selected.oof_proba);
  }

  // Explanation space: union of the masks used by the fold models.
  FeatureMask space(p);
  for (const auto& m : model_masks)
    for (auto i : m.indices()) space.set(i);
  const auto space_idx = space.indices();
  for (auto i : space_idx) rep.explain_names.push_back(rep.feature_names[i]);
  std::vector<std::size_t> pos_in_space(p, 0);
  for (std::size_t k = 0; k < space_idx.size(); ++k) pos_in_space[space_idx[k]] = k;

  // Each row is explained by the fold model that held it out, against a
  // background drawn from that model's training split. In leak-safe mode the
  // fold models saw per-fold standardization, so the fold's own transform is
  // replayed here.
  rep.attributions.resize(raw.rows());
  rep.explain_values = Matrix(raw.rows(), space_idx.size());
  rep.explain_raw = imputed.values.select_cols(space_idx);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto train_idx = eval::complement(folds, f);
    Matrix train_space, test_space;
    if (cfg.leak_safe) {
      const auto pm = preprocess::fit(raw.select_rows(train_idx), cfg.preprocess);
      train_space = preprocess::transform(pm, raw.select_rows(train_idx)).values;
      test_space = preprocess::transform(pm, raw.select_rows(folds[f])).values;
    } else {
      train_space = z.values.select_rows(train_idx);
      test_space = z.values.select_rows(folds[f]);
    }
    const auto cols = model_masks[f].indices();
    const Matrix bg = explain::sample_background(train_space.select_cols(cols), cfg.background_rows,
                                                 splitmix64(bg_seed + f));
    const Matrix xs = test_space.select_cols(cols);
    const auto& model = rep.selected.models[f];
    for (std::size_t k = 0; k < folds[f].size(); ++k) {
      const std::size_t row = folds[f][k];
      auto a = explain::shap_tree(model, xs.row(k), bg, raw.row_ids[row]);
      explain::Attribution mapped;
      mapped.sample_id = a.sample_id;
      mapped.base_value = a.base_value;
      mapped.model_output = a.model_output;
      mapped.phi.assign(space_idx.size(), 0.0);
      for (std::size_t c = 0; c < cols.size(); ++c) mapped.phi[pos_in_space[cols[c]]] = a.phi[c];
      rep.attributions[row] = std::move(mapped);
      for (std::size_t c = 0; c < space_idx.size(); ++c)
        rep.explain_values(row, c) = test_space(k, space_idx[c]);
    }
  }

  const auto final_cols = rep.mask.indices();
  rep.final_model = gbdt::fit(z.values.select_cols(final_cols), z.labels, cfg.gbdt);
  for (auto i : final_cols) rep.final_model.feature_names.push_back(rep.feature_names[i]);

  if (imputed.schema.index_of(cfg.he4_column) && imputed.schema.index_of(cfg.ca125_column)) {
    for (const char* label : {"standard", "terlikowska"}) {
      try {
        rep.roma_by_cutoff[label] = roma::evaluate_stratum(
            imputed, s, roma::cutoffs_by_label(label), cfg.he4_column, cfg.ca125_column);
      } catch (const DataError& e) {
        rep.roma_skip_reason = e.what();
      }
    }
    if (rep.roma_by_cutoff.count(cfg.cutoffs)) rep.roma_primary = rep.roma_by_cutoff.at(cfg.cutoffs);
  } else {
    rep.roma_skip_reason = "columns " + cfg.he4_column + "/" + cfg.ca125_column + " not present";
  }
  return rep;
}

inline nlohmann::json cv_json(const eval::CvResult& r) {
  nlohmann::json j = r.metrics;
  j["confusion"] = r.cm;
  j["n"] = r.labels.size();
  return j;
}

// Writes explanation products for one stratum into dir.
inline std::vector<std::string> write_explanations(const fs::path& dir, const StratumReport& rep,
                                                   std::size_t top_correct) {
  std::vector<std::string> files;
  {
    std::ostringstream os;
    explain::write_attributions_csv(os, rep.attributions, rep.explain_names);
    write_text(dir / "attributions.csv", os.str());
    files.push_back("attributions.csv");
  }
  if (!rep.attributions.empty()) {
    auto imp = explain::global_importance(rep.attributions);
    auto arr = nlohmann::json::array();
    for (const auto& i : imp)
      arr.push_back({{"feature", rep.explain_names[i.feature]}, {"mean_abs_phi", i.mean_abs_phi}});
    write_json(dir / "importance.json", arr);
    files.push_back("importance.json");

    for (std::size_t f = 0; f < rep.explain_names.size(); ++f) {
      auto dep = explain::dependence_data(rep.attributions, rep.explain_values, f);
      auto pts = nlohmann::json::array();
      for (std::size_t i = 0; i < dep.points.size(); ++i) {
        nlohmann::json pt = {{"sample_id", rep.attributions[i].sample_id},
                             {"value", dep.points[i].first},
                             {"raw_value", rep.explain_raw(i, f)},
                             {"phi", dep.points[i].second}};
        if (dep.partner) pt["partner_value"] = dep.partner_values[i];
        pts.push_back(std::move(pt));
      }
      nlohmann::json j = {{"feature", rep.explain_names[f]},
                          {"partner", dep.partner ? nlohmann::json(rep.explain_names[*dep.partner])
                                                  : nlohmann::json(nullptr)},
                          {"points", std::move(pts)}};
      const auto name = "dependence_" + file_token(rep.explain_names[f]) + ".json";
      write_json(dir / name, j);
      files.push_back(name);
    }
  }

  // Force plots: every misclassified row plus the most confident correct ones.
  const auto& sel = rep.selected;
  std::vector<std::size_t> wrong, right;
  for (std::size_t i = 0; i < sel.labels.size(); ++i) {
    const int pred = sel.oof_proba[i] >= 0.5 ? 1 : 0;
    (pred == sel.labels[i] ? right : wrong).push_back(i);
  }
  std::stable_sort(right.begin(), right.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(sel.oof_proba[a] - 0.5) > std::abs(sel.oof_proba[b] - 0.5);
  });
  if (right.size() > top_correct) right.resize(top_correct);
  auto triage = nlohmann::json::array();
  auto emit = [&](std::size_t i, bool correct) {
    const auto& a = rep.attributions[i];
    auto fp = explain::force_plot_data(a, rep.explain_names, rep.explain_raw.row(i));
    const std::string stem = "force_" + std::to_string(a.sample_id);
    nlohmann::json j = fp;
    j["label"] = sel.labels[i];
    j["correct"] = correct;
    write_json(dir / (stem + ".json"), j);
    write_text(dir / (stem + ".svg"), explain::force_plot_svg(fp));
    files.push_back(stem + ".json");
    files.push_back(stem + ".svg");
    triage.push_back({{"sample_id", a.sample_id},
                      {"label", sel.labels[i]},
                      {"probability", sel.oof_proba[i]},
                      {"correct", correct}});
  };
  for (auto i : wrong) emit(i, false);
  for (auto i : right) emit(i, true);
  write_json(dir / "force_index.json", triage);
  files.push_back("force_index.json");
  return files;
}

struct RunSummary {
  std::vector<StratumReport> strata;
  std::optional<eval::MetricSet> average_full;
  std::optional<eval::MetricSet> average_selected;
};

inline RunSummary run(const RunConfig& cfg, const std::string& data_path) {
  cfg.validate();
  const Schema schema = resolve_schema(cfg, data_path);
  const Dataset data = load_csv(data_path, schema);
  data.validate();
  if (!data.stratum) throw DataError("data has no stratum column '" + cfg.stratum_column + "'");
  auto [pre, post] = stratify(data);

  RunSummary sum;
  for (auto [s, d] : {std::pair{Stratum::pre, &pre}, std::pair{Stratum::post, &post}}) {
    if (d->rows() == 0) continue;
    sum.strata.push_back(run_stratum(*d, s, cfg));
  }
  if (sum.strata.empty()) throw DataError("no rows in either stratum");
  if (sum.strata.size() == 2) {
    sum.average_full = eval::aggregate_strata(sum.strata[0].full.metrics, sum.strata[1].full.metrics);
    sum.average_selected =
        eval::aggregate_strata(sum.strata[0].selected.metrics, sum.strata[1].selected.metrics);
  }

  const fs::path out(cfg.output_dir);
  fs::create_directories(out);
  std::vector<std::string> files;

  nlohmann::json metrics = {{"strata", nlohmann::json::object()}};
  nlohmann::json selected = nlohmann::json::object();
  nlohmann::json history = nlohmann::json::object();
  std::ostringstream csv;
  csv << eval::kMetricsCsvHeader << '\n';
  for (const auto& r : sum.strata) {
    const auto name = to_string(r.stratum);
    metrics["strata"][name] = {{"xgboost", cv_json(r.full)},
                               {"xgboost_ga", cv_json(r.selected)},
                               {"rows", r.rows}};
    nlohmann::json sel = {{"mask", r.mask.to_string()},
                          {"features", ga::mask_names(r.mask, r.feature_names)}};
    if (cfg.nested) {
      auto folds = nlohmann::json::array();
      for (const auto& m : r.fold_masks) folds.push_back(ga::mask_names(m, r.feature_names));
      sel["fold_features"] = std::move(folds);
    }
    selected[name] = std::move(sel);
    history[name] = ga::run_record_json(r.ga_record, r.feature_names);
  }
  auto csv_block = [&](const std::string& approach, bool full) {
    for (const auto& r : sum.strata)
      csv << eval::metrics_csv_row(approach, to_string(r.stratum),
                                   full ? r.full.metrics : r.selected.metrics)
          << '\n';
    if (sum.average_full)
      csv << eval::metrics_csv_row(approach, "Total Average",
                                   full ? *sum.average_full : *sum.average_selected)
          << '\n';
  };
  csv_block("XGBoost", true);
  csv_block("XGBoost + GA", false);
  if (sum.average_full)
    metrics["total_average"] = {{"xgboost", *sum.average_full},
                                {"xgboost_ga", *sum.average_selected}};
  write_json(out / "metrics.json", metrics);
  write_text(out / "metrics.csv", csv.str());
  write_json(out / "selected_features.json", selected);
  write_json(out / "ga_history.json", history);
  files.insert(files.end(), {"metrics.json", "metrics.csv", "selected_features.json",
                             "ga_history.json"});

  for (const auto& r : sum.strata) {
    const auto name = to_string(r.stratum);
    for (const auto& f : write_explanations(out / name, r, cfg.force_top_correct))
      files.push_back(name + "/" + f);
    write_json(out / name / "model.json", r.final_model);
    write_json(out / name / "preprocess.json", r.preprocess);
    files.push_back(name + "/model.json");
    files.push_back(name + "/preprocess.json");
  }

  // ROMA comparison, both cutoff sets.
  nlohmann::json roma_json = {{"primary_cutoffs", cfg.cutoffs}};
  bool roma_ok = true;
  for (const auto& r : sum.strata) roma_ok = roma_ok && r.roma_by_cutoff.size() == 2;
  roma_json["available"] = roma_ok;
  std::vector<roma::PatientScore> scores;
  if (roma_ok) {
    for (const char* label : {"standard", "terlikowska"}) {
      auto c = roma::cutoffs_by_label(label);
      nlohmann::json block = {{"cutoffs", {{"premenopausal", c.pre_pct}, {"postmenopausal", c.post_pct}}}};
      for (const auto& r : sum.strata)
        block[to_string(r.stratum)] = roma::stratum_json(r.roma_by_cutoff.at(label));
      if (sum.strata.size() == 2)
        block["total_average"] = eval::aggregate_strata(sum.strata[0].roma_by_cutoff.at(label).metrics,
                                                        sum.strata[1].roma_by_cutoff.at(label).metrics);
      roma_json[label] = std::move(block);
    }
    for (const auto& r : sum.strata)
      scores.insert(scores.end(), r.roma_primary->scores.begin(), r.roma_primary->scores.end());
    std::sort(scores.begin(), scores.end(),
              [](const auto& a, const auto& b) { return a.row_id < b.row_id; });
  } else {
    std::string reason;
    for (const auto& r : sum.strata)
      if (!r.roma_skip_reason.empty()) reason = r.roma_skip_reason;
    roma_json["reason"] = reason;
  }
  write_json(out / "roma_metrics.json", roma_json);
  std::ostringstream sc;
  roma::write_scores_csv(sc, scores);
  write_text(out / "roma_scores.csv", sc.str());
  files.insert(files.end(), {"roma_metrics.json", "roma_scores.csv"});

  std::ifstream data_in(data_path, std::ios::binary);
  std::string data_bytes((std::istreambuf_iterator<char>(data_in)), std::istreambuf_iterator<char>());
  std::ostringstream data_hash;
  data_hash << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(data_bytes);
  nlohmann::json strata_rows = nlohmann::json::object();
  for (const auto& r : sum.strata) strata_rows[to_string(r.stratum)] = r.rows;
  files.push_back("manifest.json");
  write_json(out / "manifest.json", {{"seed", cfg.seed},
                                     {"config_hash", config_hash(cfg)},
                                     {"config", to_json(cfg)},
                                     {"data_hash", data_hash.str()},
                                     {"strata_rows", strata_rows},
                                     {"files", files}});
  return sum;
}

// ROMA on every row of a raw dataset, markers imputed per stratum.
inline roma::Evaluation run_roma(const Dataset& data, const roma::CutoffSet& c,
                                 const preprocess::Config& pcfg, const std::string& he4 = "HE4",
                                 const std::string& ca125 = "CA125") {
  auto [pre, post] = stratify(data);
  roma::Evaluation e;
  e.cutoffs = c;
  auto score = [&](const Dataset& d, Stratum s) {
    const auto pm = preprocess::fit(d, pcfg);
    return roma::evaluate_stratum(preprocess::transform_impute_only(pm, d), s, c, he4, ca125);
  };
  e.pre = score(pre, Stratum::pre);
  e.post = score(post, Stratum::post);
  e.average = eval::aggregate_strata(e.pre.metrics, e.post.metrics);
  return e;
}

// Command layer. Each command returns a process exit code: 0 on success,
// 2 for data/schema/input problems, 3 for configuration problems, 1 otherwise.
// Failures print a single diagnostic line to err.

enum ExitCode : int { kOk = 0, kOther = 1, kDataError = 2, kConfigError = 3 };

template <class F>
int guarded(F&& body, std::ostream& err = std::cerr) {
  try {
    body();
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << '\n';
    return kDataError;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kDataError;
  } catch (const FitError& e) {
    err << "fit error: " << e.what() << '\n';
    return kDataError;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kOther;
  }
}

inline int cmd_synth(const std::string& spec_path, const std::string& out_path,
                     std::optional<std::uint64_t> seed = std::nullopt,
                     std::ostream& err = std::cerr) {
  return guarded(
      [&] {
        SyntheticSpec spec;
        try {
          spec = read_json_file(spec_path, true).get<SyntheticSpec>();
        } catch (const nlohmann::json::exception& e) {
          throw ConfigError(std::string("bad synthetic spec: ") + e.what());
        }
        if (seed) spec.seed = *seed;
        const auto d = generate_synthetic(spec);
        std::ostringstream os;
        write_csv(os, d);
        const fs::path out(out_path);
        if (out.has_parent_path()) fs::create_directories(out.parent_path());
        std::ofstream f(out, std::ios::binary);
        if (!f) throw Error("cannot write " + out_path);
        f << os.str();
      },
      err);
}

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  bool leak_safe = false;
  bool nested = false;
};

inline int cmd_run(const std::string& config_path, const std::string& data_path,
                   const RunOverrides& o = {}, std::ostream& err = std::cerr) {
  return guarded(
      [&] {
        auto j = read_json_file(config_path, true);
        if (!j.is_object()) throw ConfigError("config must be a JSON object");
        if (o.seed) j["seed"] = *o.seed;
        if (o.output_dir) j["output_dir"] = *o.output_dir;
        if (o.leak_safe) j["leak_safe"] = true;
        if (o.nested) j["nested"] = true;
        const auto cfg = parse_config(j);
        if (!fs::exists(data_path)) throw DataError("data file not found: " + data_path);
        run(cfg, data_path);
      },
      err);
}

// Scores ROMA on a dataset and writes roma_metrics.json and roma_scores.csv.
// The optional config supplies the schema and column names.
inline int cmd_roma(const std::string& data_path, const std::string& cutoff_label,
                    const std::string& out_dir, const std::optional<std::string>& config_path = {},
                    std::ostream& err = std::cerr) {
  return guarded(
      [&] {
        const auto c = roma::cutoffs_by_label(cutoff_label);
        RunConfig cfg = config_path ? load_config(*config_path) : RunConfig{};
        if (!fs::exists(data_path)) throw DataError("data file not found: " + data_path);
        const auto data = load_csv(data_path, resolve_schema(cfg, data_path));
        if (!data.stratum) throw DataError("data has no stratum column '" + cfg.stratum_column + "'");
        const auto e = run_roma(data, c, cfg.preprocess, cfg.he4_column, cfg.ca125_column);
        nlohmann::json j = {
            {"cutoffs", {{"label", c.label}, {"premenopausal", c.pre_pct}, {"postmenopausal", c.post_pct}}},
            {"premenopausal", roma::stratum_json(e.pre)},
            {"postmenopausal", roma::stratum_json(e.post)},
            {"total_average", e.average}};
        write_json(fs::path(out_dir) / "roma_metrics.json", j);
        auto scores = e.pre.scores;
        scores.insert(scores.end(), e.post.scores.begin(), e.post.scores.end());
        std::sort(scores.begin(), scores.end(),
                  [](const auto& a, const auto& b) { return a.row_id < b.row_id; });
        std::ostringstream os;
        roma::write_scores_csv(os, scores);
        write_text(fs::path(out_dir) / "roma_scores.csv", os.str());
      },
      err);
}

struct ExplainOptions {
  std::optional<std::string> preprocess_path;
  std::size_t background_rows = 100;
  std::uint64_t seed = 0;
};

// Attributes every row of a CSV under a serialized model. Without a
// preprocessing model the named columns must be complete and already in
// model space.
inline int cmd_explain(const std::string& model_path, const std::string& data_path,
                       const std::string& out_dir, const ExplainOptions& o = {},
                       std::ostream& err = std::cerr) {
  return guarded(
      [&] {
        gbdt::Ensemble model;
        try {
          model = read_json_file(model_path, false).get<gbdt::Ensemble>();
        } catch (const nlohmann::json::exception& e) {
          throw DataError(std::string("bad model file: ") + e.what());
        }
        if (model.feature_names.size() != model.feature_count)
          throw DataError("model file lacks feature names");
        if (!fs::exists(data_path)) throw DataError("data file not found: " + data_path);
        Matrix x;
        if (o.preprocess_path) {
          preprocess::Model pm;
          try {
            pm = read_json_file(*o.preprocess_path, false).get<preprocess::Model>();
          } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("bad preprocess file: ") + e.what());
          }
          const auto raw = load_feature_table(data_path, pm.feature_names);
          const auto z = preprocess::transform(pm, raw);
          std::vector<std::size_t> cols;
          for (const auto& n : model.feature_names) {
            auto it = std::find(pm.feature_names.begin(), pm.feature_names.end(), n);
            if (it == pm.feature_names.end())
              throw DataError("model feature '" + n + "' unknown to the preprocessing model");
            cols.push_back(static_cast<std::size_t>(it - pm.feature_names.begin()));
          }
          x = z.values.select_cols(cols);
        } else {
          const auto d = load_feature_table(data_path, model.feature_names);
          if (!d.complete()) throw DataError("data has missing values; pass a preprocessing model");
          x = d.values;
        }
        if (x.rows() == 0) throw DataError("no rows to explain");
        const Matrix bg = explain::sample_background(x, o.background_rows, o.seed);
        std::vector<explain::Attribution> atts;
        for (std::size_t r = 0; r < x.rows(); ++r) atts.push_back(explain::shap_tree(model, x.row(r), bg, r));
        const fs::path out(out_dir);
        std::ostringstream os;
        explain::write_attributions_csv(os, atts, model.feature_names);
        write_text(out / "attributions.csv", os.str());
        auto imp = nlohmann::json::array();
        for (const auto& i : explain::global_importance(atts))
          imp.push_back({{"feature", model.feature_names[i.feature]}, {"mean_abs_phi", i.mean_abs_phi}});
        write_json(out / "importance.json", imp);
        for (std::size_t r = 0; r < x.rows(); ++r) {
          const auto fp = explain::force_plot_data(atts[r], model.feature_names, x.row(r));
          const std::string stem = "force_" + std::to_string(r);
          write_json(out / (stem + ".json"), fp);
          write_text(out / (stem + ".svg"), explain::force_plot_svg(fp));
        }
      },
      err);
}

}  // namespace ovxai::pipeline

#endif  // OVXAI_PIPELINE_HPP_
