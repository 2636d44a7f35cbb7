#ifndef OVXAI_DATASET_HPP_
#define OVXAI_DATASET_HPP_

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ovxai/common.hpp"

namespace ovxai {

enum class Category { demographic, blood_routine, chemistry, tumor_marker };

inline std::string to_string(Category c) {
  switch (c) {
    case Category::demographic: return "demographic";
    case Category::blood_routine: return "blood_routine";
    case Category::chemistry: return "chemistry";
    case Category::tumor_marker: return "tumor_marker";
  }
  return "demographic";
}

inline Category category_from_string(std::string_view s) {
  if (s == "demographic") return Category::demographic;
  if (s == "blood_routine") return Category::blood_routine;
  if (s == "chemistry") return Category::chemistry;
  if (s == "tumor_marker") return Category::tumor_marker;
  throw SchemaError("unknown feature category '" + std::string(s) + "'");
}

struct FeatureSpec {
  std::string name;
  std::string unit;
  Category category = Category::blood_routine;

  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

struct Schema {
  std::vector<FeatureSpec> features;
  std::string label_name = "label";
  std::string stratum_name = "stratum";
  // Raw label value that denotes a malignant case. Internally labels are
  // always 1 = malignant, 0 = benign.
  int positive_label = 1;

  std::size_t size() const { return features.size(); }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < features.size(); ++i)
      if (features[i].name == name) return i;
    return std::nullopt;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(features.size());
    for (const auto& f : features) out.push_back(f.name);
    return out;
  }

  void validate() const {
    std::set<std::string> seen;
    for (const auto& f : features) {
      if (f.name.empty()) throw SchemaError("empty feature name");
      if (!seen.insert(f.name).second)
        throw SchemaError("duplicate feature name '" + f.name + "'");
    }
    if (label_name.empty()) throw SchemaError("empty label name");
    if (seen.count(label_name)) throw SchemaError("label column is also a feature");
    if (positive_label != 0 && positive_label != 1)
      throw SchemaError("positive_label must be 0 or 1");
  }

  // Same schema restricted to the given feature indices.
  Schema subset(std::span<const std::size_t> idx) const {
    Schema out = *this;
    out.features.clear();
    for (auto i : idx) out.features.push_back(features.at(i));
    return out;
  }

  friend bool operator==(const Schema&, const Schema&) = default;
};

inline void to_json(nlohmann::json& j, const Schema& s) {
  j = nlohmann::json::object();
  j["label_name"] = s.label_name;
  j["stratum_name"] = s.stratum_name;
  j["positive_label"] = s.positive_label;
  auto feats = nlohmann::json::array();
  for (const auto& f : s.features)
    feats.push_back({{"name", f.name}, {"unit", f.unit}, {"category", to_string(f.category)}});
  j["features"] = std::move(feats);
}

inline void from_json(const nlohmann::json& j, Schema& s) {
  try {
    s = Schema{};
    s.label_name = j.at("label_name").get<std::string>();
    s.stratum_name = j.value("stratum_name", std::string{});
    s.positive_label = j.value("positive_label", 1);
    for (const auto& f : j.at("features")) {
      s.features.push_back({f.at("name").get<std::string>(), f.value("unit", std::string{}),
                            category_from_string(f.value("category", "blood_routine"))});
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  }
  s.validate();
}

inline Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open schema file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("schema file " + path + " is not valid JSON: " + e.what());
  }
  return j.get<Schema>();
}

// The 48-feature clinical schema: age, 19 blood-routine indices, 22 general
// chemistry indices and 6 tumor markers. Column names follow the public
// CSV release; malignant cases are coded 0 there, menopause as 0 = pre.
inline Schema ovarian_schema() {
  Schema s;
  s.label_name = "TYPE";
  s.stratum_name = "Menopause";
  s.positive_label = 0;
  auto add = [&](std::string name, std::string unit, Category c) {
    s.features.push_back({std::move(name), std::move(unit), c});
  };
  add("Age", "years", Category::demographic);

  const std::pair<const char*, const char*> blood[] = {
      {"BASO#", "10^9/L"}, {"BASO%", "%"},     {"EO#", "10^9/L"},  {"EO%", "%"},
      {"HCT", "L/L"},      {"HGB", "g/L"},     {"LYM#", "10^9/L"}, {"LYM%", "%"},
      {"MCH", "pg"},       {"MCV", "fL"},      {"MONO#", "10^9/L"}, {"MONO%", "%"},
      {"MPV", "fL"},       {"NEU", "%"},       {"PCT", "L/L"},     {"PDW", "%"},
      {"PLT", "10^9/L"},   {"RBC", "10^12/L"}, {"RDW", "%"}};
  for (auto [n, u] : blood) add(n, u, Category::blood_routine);

  const std::pair<const char*, const char*> chem[] = {
      {"AG", "mmol/L"},   {"ALB", "g/L"},     {"ALP", "U/L"},     {"ALT", "U/L"},
      {"AST", "U/L"},     {"BUN", "mmol/L"},  {"Ca", "mmol/L"},   {"CL", "mmol/L"},
      {"CO2CP", "mmol/L"}, {"CREA", "umol/L"}, {"DBIL", "umol/L"}, {"GGT", "U/L"},
      {"GLO", "g/L"},     {"GLU.", "mmol/L"}, {"IBIL", "umol/L"}, {"K", "mmol/L"},
      {"Mg", "mmol/L"},   {"Na", "mmol/L"},   {"PHOS", "mmol/L"}, {"TBIL", "umol/L"},
      {"TP", "g/L"},      {"UA", "umol/L"}};
  for (auto [n, u] : chem) add(n, u, Category::chemistry);

  const std::pair<const char*, const char*> markers[] = {
      {"AFP", "ng/mL"}, {"CA125", "U/mL"}, {"CA19-9", "U/mL"},
      {"CA72-4", "U/mL"}, {"CEA", "ng/mL"}, {"HE4", "pmol/L"}};
  for (auto [n, u] : markers) add(n, u, Category::tumor_marker);
  return s;
}

enum class Stratum : std::uint8_t { pre = 0, post = 1 };

inline std::string to_string(Stratum s) {
  return s == Stratum::pre ? "premenopausal" : "postmenopausal";
}

struct Dataset {
  Schema schema;
  Matrix values;
  std::vector<std::uint8_t> missing;  // rows x cols, row-major
  std::vector<int> labels;            // 1 = malignant
  std::optional<std::vector<Stratum>> stratum;
  std::vector<std::size_t> row_ids;  // position in the source file

  std::size_t rows() const { return values.rows(); }
  std::size_t cols() const { return values.cols(); }

  bool is_missing(std::size_t r, std::size_t c) const { return missing[r * cols() + c] != 0; }

  std::size_t missing_count() const {
    return static_cast<std::size_t>(std::count(missing.begin(), missing.end(), 1));
  }

  bool complete() const { return missing_count() == 0; }

  void validate() const {
    if (values.cols() != schema.size())
      throw DataError("value matrix width does not match schema");
    if (missing.size() != rows() * cols()) throw DataError("missing mask shape mismatch");
    if (labels.size() != rows()) throw DataError("label count mismatch");
    if (row_ids.size() != rows()) throw DataError("row id count mismatch");
    if (stratum && stratum->size() != rows()) throw DataError("stratum count mismatch");
    for (int y : labels)
      if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
    for (std::size_t r = 0; r < rows(); ++r)
      for (std::size_t c = 0; c < cols(); ++c)
        if (!is_missing(r, c) && !std::isfinite(values(r, c)))
          throw DataError("non-finite observed value");
  }

  Dataset select_rows(std::span<const std::size_t> idx) const {
    Dataset out;
    out.schema = schema;
    out.values = values.select_rows(idx);
    out.missing.reserve(idx.size() * cols());
    for (auto r : idx) {
      out.labels.push_back(labels[r]);
      out.row_ids.push_back(row_ids[r]);
      for (std::size_t c = 0; c < cols(); ++c) out.missing.push_back(missing[r * cols() + c]);
    }
    if (stratum) {
      out.stratum.emplace();
      for (auto r : idx) out.stratum->push_back((*stratum)[r]);
    }
    return out;
  }

  Dataset select_cols(std::span<const std::size_t> idx) const {
    Dataset out;
    out.schema = schema.subset(idx);
    out.values = values.select_cols(idx);
    out.labels = labels;
    out.stratum = stratum;
    out.row_ids = row_ids;
    out.missing.reserve(rows() * idx.size());
    for (std::size_t r = 0; r < rows(); ++r)
      for (auto c : idx) out.missing.push_back(missing[r * cols() + c]);
    return out;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Splits one CSV record. Double-quoted fields may contain commas and "".
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline bool getline_csv(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace detail

// Parses one cell: strips surrounding whitespace and the characters '<', '>'
// and '*'; empty and NA (any case) are missing.
inline std::optional<double> parse_cell(std::string_view raw) {
  std::string s;
  s.reserve(raw.size());
  for (char c : raw)
    if (c != '<' && c != '>' && c != '*') s.push_back(c);
  s = detail::trim(s);
  if (s.empty() || detail::lower(s) == "na") return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline Stratum parse_stratum(std::string_view raw) {
  const std::string s = detail::lower(detail::trim(raw));
  if (s == "0" || s == "0.0" || s == "pre" || s == "premenopausal") return Stratum::pre;
  if (s == "1" || s == "1.0" || s == "post" || s == "postmenopausal") return Stratum::post;
  throw DataError("unrecognized stratum value '" + std::string(raw) + "'");
}

inline Dataset read_csv(std::istream& in, const Schema& schema) {
  schema.validate();
  std::string line;
  if (!detail::getline_csv(in, line)) throw SchemaError("CSV has no header row");
  auto header = detail::split_csv_line(line);
  for (auto& h : header) h = detail::trim(h);
  if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

  auto find = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  };

  std::vector<std::size_t> feature_col(schema.size());
  for (std::size_t f = 0; f < schema.size(); ++f) {
    auto c = find(schema.features[f].name);
    if (!c) throw SchemaError("missing required column '" + schema.features[f].name + "'");
    feature_col[f] = *c;
  }
  auto label_col = find(schema.label_name);
  if (!label_col) throw SchemaError("missing label column '" + schema.label_name + "'");
  std::optional<std::size_t> stratum_col;
  if (!schema.stratum_name.empty()) stratum_col = find(schema.stratum_name);

  Dataset d;
  d.schema = schema;
  std::vector<double> vals;
  if (stratum_col) d.stratum.emplace();
  std::size_t line_no = 1;
  std::size_t row = 0;
  while (detail::getline_csv(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() < header.size()) cells.resize(header.size());
    for (std::size_t f = 0; f < schema.size(); ++f) {
      auto v = parse_cell(cells[feature_col[f]]);
      vals.push_back(v.value_or(0.0));
      d.missing.push_back(v ? 0 : 1);
    }
    auto y = parse_cell(cells[*label_col]);
    if (!y || (*y != 0.0 && *y != 1.0))
      throw DataError("non-binary label '" + cells[*label_col] + "' on line " +
                      std::to_string(line_no));
    const int raw = static_cast<int>(*y);
    d.labels.push_back(raw == schema.positive_label ? 1 : 0);
    if (stratum_col) d.stratum->push_back(parse_stratum(cells[*stratum_col]));
    d.row_ids.push_back(row++);
  }
  d.values = Matrix(row, schema.size());
  for (std::size_t r = 0; r < row; ++r)
    for (std::size_t c = 0; c < schema.size(); ++c) d.values(r, c) = vals[r * schema.size() + c];
  return d;
}

inline Dataset load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file " + path);
  return read_csv(in, schema);
}

// Writes the dataset back out in the layout read_csv accepts; missing cells
// are written empty and labels in the schema's raw coding.
inline void write_csv(std::ostream& out, const Dataset& d) {
  for (std::size_t f = 0; f < d.cols(); ++f) out << d.schema.features[f].name << ',';
  out << d.schema.label_name;
  if (d.stratum) out << ',' << d.schema.stratum_name;
  out << '\n';
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (std::size_t c = 0; c < d.cols(); ++c) {
      if (!d.is_missing(r, c)) out << detail::format_double(d.values(r, c));
      out << ',';
    }
    const int raw = d.labels[r] == 1 ? d.schema.positive_label : 1 - d.schema.positive_label;
    out << raw;
    if (d.stratum) out << ',' << ((*d.stratum)[r] == Stratum::pre ? "pre" : "post");
    out << '\n';
  }
}

// Reads only the named numeric columns; labels are left at 0. For scoring
// tables that carry no outcome column.
inline Dataset load_feature_table(const std::string& path, const std::vector<std::string>& names) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file " + path);
  std::string line;
  if (!detail::getline_csv(in, line)) throw SchemaError("CSV has no header row");
  auto header = detail::split_csv_line(line);
  for (auto& h : header) h = detail::trim(h);
  Dataset d;
  d.schema.label_name = "";
  d.schema.stratum_name = "";
  std::vector<std::size_t> col(names.size());
  for (std::size_t f = 0; f < names.size(); ++f) {
    auto it = std::find(header.begin(), header.end(), names[f]);
    if (it == header.end()) throw SchemaError("missing required column '" + names[f] + "'");
    col[f] = static_cast<std::size_t>(it - header.begin());
    d.schema.features.push_back({names[f], "", Category::blood_routine});
  }
  std::vector<double> vals;
  std::size_t row = 0;
  while (detail::getline_csv(in, line)) {
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() < header.size()) cells.resize(header.size());
    for (auto c : col) {
      auto v = parse_cell(cells[c]);
      vals.push_back(v.value_or(0.0));
      d.missing.push_back(v ? 0 : 1);
    }
    d.labels.push_back(0);
    d.row_ids.push_back(row++);
  }
  d.values = Matrix(row, names.size());
  for (std::size_t r = 0; r < row; ++r)
    for (std::size_t c = 0; c < names.size(); ++c) d.values(r, c) = vals[r * names.size() + c];
  return d;
}

// Schema for a CSV whose columns are all numeric features apart from the
// label, the stratum and any explicitly excluded columns.
inline Schema infer_schema(const std::string& path, const std::string& label_name,
                           const std::string& stratum_name,
                           const std::vector<std::string>& exclude = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file " + path);
  std::string line;
  if (!detail::getline_csv(in, line)) throw SchemaError("CSV has no header row");
  Schema s;
  s.label_name = label_name;
  s.stratum_name = stratum_name;
  for (auto& h : detail::split_csv_line(line)) {
    auto name = detail::trim(h);
    if (name == label_name || name == stratum_name) continue;
    if (std::find(exclude.begin(), exclude.end(), name) != exclude.end()) continue;
    s.features.push_back({name, "", Category::blood_routine});
  }
  s.validate();
  return s;
}

inline std::pair<Dataset, Dataset> stratify(const Dataset& d) {
  if (!d.stratum) throw DataError("dataset has no stratum column");
  std::vector<std::size_t> pre, post;
  for (std::size_t r = 0; r < d.rows(); ++r)
    ((*d.stratum)[r] == Stratum::pre ? pre : post).push_back(r);
  auto a = d.select_rows(pre);
  auto b = d.select_rows(post);
  a.stratum.reset();
  b.stratum.reset();
  return {std::move(a), std::move(b)};
}

struct MannWhitneyResult {
  double u = 0.0;    // min(u_a, u_b)
  double u_a = 0.0;  // pairs (a_i, b_j) with a_i > b_j, ties counted 1/2
  double u_b = 0.0;
  double p_two_sided = 1.0;
  bool exact = false;
};

inline MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InputError("Mann-Whitney U needs two non-empty groups");
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(n);
  for (double v : a) pooled.emplace_back(v, 0);
  for (double v : b) pooled.emplace_back(v, 1);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& l, const auto& r) { return l.first < r.first; });

  double rank_sum_a = 0.0;
  double tie_term = 0.0;  // sum of t^3 - t over tie groups
  bool ties = false;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    const double t = static_cast<double>(j - i);
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (pooled[k].second == 0) rank_sum_a += midrank;
    if (t > 1) {
      ties = true;
      tie_term += t * t * t - t;
    }
    i = j;
  }

  MannWhitneyResult res;
  const double nad = static_cast<double>(na), nbd = static_cast<double>(nb);
  res.u_a = rank_sum_a - nad * (nad + 1.0) / 2.0;
  res.u_b = nad * nbd - res.u_a;
  res.u = std::min(res.u_a, res.u_b);

  if (na * nb <= 400 && !ties) {
    // counts[u] = number of orderings with statistic u, built by adding one
    // observation at a time: N(u; m, k) = N(u - k; m - 1, k) + N(u; m, k - 1).
    const std::size_t max_u = na * nb;
    std::vector<std::vector<double>> prev(nb + 1, std::vector<double>(max_u + 1, 0.0));
    for (std::size_t k = 0; k <= nb; ++k) prev[k][0] = 1.0;  // m = 0
    for (std::size_t m = 1; m <= na; ++m) {
      std::vector<std::vector<double>> cur(nb + 1, std::vector<double>(max_u + 1, 0.0));
      cur[0][0] = 1.0;
      for (std::size_t k = 1; k <= nb; ++k)
        for (std::size_t u = 0; u <= m * k; ++u)
          cur[k][u] = (u >= k ? prev[k][u - k] : 0.0) + cur[k - 1][u];
      prev = std::move(cur);
    }
    const auto& dist = prev[nb];
    double total = 0.0, tail = 0.0;
    const auto u_floor = static_cast<std::size_t>(res.u);
    for (std::size_t u = 0; u <= max_u; ++u) {
      total += dist[u];
      if (u <= u_floor) tail += dist[u];
    }
    res.p_two_sided = std::min(1.0, 2.0 * tail / total);
    res.exact = true;
    return res;
  }

  const double nd = static_cast<double>(n);
  const double mu = nad * nbd / 2.0;
  const double var = nad * nbd / 12.0 * ((nd + 1.0) - tie_term / (nd * (nd - 1.0)));
  if (var <= 0.0) {
    res.p_two_sided = 1.0;
    return res;
  }
  const double z = std::max(0.0, std::abs(res.u_a - mu) - 0.5) / std::sqrt(var);
  res.p_two_sided = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return res;
}

struct SyntheticSpec {
  std::size_t n_rows = 400;
  std::size_t n_informative = 5;
  std::size_t n_noise = 5;
  double class_separation = 2.0;
  double missing_rate = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_informative + n_noise < 1) throw ConfigError("synthetic spec needs at least one feature");
    if (!(missing_rate >= 0.0 && missing_rate < 1.0))
      throw ConfigError("missing_rate must lie in [0, 1)");
    if (!std::isfinite(class_separation)) throw ConfigError("class_separation must be finite");
    if (n_rows < 2) throw ConfigError("n_rows must be at least 2");
  }
};

inline void from_json(const nlohmann::json& j, SyntheticSpec& s) {
  s.n_rows = j.value("n_rows", s.n_rows);
  s.n_informative = j.value("n_informative", s.n_informative);
  s.n_noise = j.value("n_noise", s.n_noise);
  s.class_separation = j.value("class_separation", s.class_separation);
  s.missing_rate = j.value("missing_rate", s.missing_rate);
  s.seed = j.value("seed", s.seed);
}

inline void to_json(nlohmann::json& j, const SyntheticSpec& s) {
  j = {{"n_rows", s.n_rows},
       {"n_informative", s.n_informative},
       {"n_noise", s.n_noise},
       {"class_separation", s.class_separation},
       {"missing_rate", s.missing_rate},
       {"seed", s.seed}};
}

// Informative columns are N(0,1) for benign rows and N(separation,1) for
// malignant rows; noise columns are N(0,1) for both. Labels and strata are
// balanced (each label/stratum combination gets a quarter of the rows).
inline Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t p = spec.n_informative + spec.n_noise;

  Dataset d;
  d.schema.label_name = "label";
  d.schema.stratum_name = "stratum";
  for (std::size_t i = 0; i < spec.n_informative; ++i)
    d.schema.features.push_back({"inf_" + std::to_string(i), "", Category::blood_routine});
  for (std::size_t i = 0; i < spec.n_noise; ++i)
    d.schema.features.push_back({"noise_" + std::to_string(i), "", Category::blood_routine});

  std::vector<std::size_t> order(spec.n_rows);
  for (std::size_t i = 0; i < spec.n_rows; ++i) order[i] = i;
  shuffle(order, rng);

  d.values = Matrix(spec.n_rows, p);
  d.missing.assign(spec.n_rows * p, 0);
  d.stratum.emplace(spec.n_rows);
  for (std::size_t r = 0; r < spec.n_rows; ++r) {
    const std::size_t slot = order[r];
    const int y = static_cast<int>(slot % 2);
    d.labels.push_back(y);
    (*d.stratum)[r] = (slot / 2) % 2 == 0 ? Stratum::pre : Stratum::post;
    d.row_ids.push_back(r);
    for (std::size_t c = 0; c < p; ++c) {
      const double shift = (c < spec.n_informative && y == 1) ? spec.class_separation : 0.0;
      d.values(r, c) = standard_normal(rng) + shift;
    }
  }
  if (spec.missing_rate > 0.0) {
    for (std::size_t r = 0; r < spec.n_rows; ++r)
      for (std::size_t c = 0; c < p; ++c)
        if (bernoulli(rng, spec.missing_rate)) {
          d.missing[r * p + c] = 1;
          d.values(r, c) = 0.0;
        }
  }
  return d;
}

}  // namespace ovxai

#endif  // OVXAI_DATASET_HPP_
