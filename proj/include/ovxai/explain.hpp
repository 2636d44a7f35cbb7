#ifndef OVXAI_EXPLAIN_HPP_
#define OVXAI_EXPLAIN_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ovxai/common.hpp"
#include "ovxai/gbdt.hpp"

// Interventional Shapley attributions on the margin (log-odds) scale. The
// value of a coalition S is the mean, over background rows b, of the model
// evaluated on x for features in S and b elsewhere.
namespace ovxai::explain {

struct Attribution {
  double base_value = 0.0;
  std::vector<double> phi;
  double model_output = 0.0;
  std::size_t sample_id = 0;
};

// s!(n-s-1)!/n!, the weight of a coalition of size s among n players.
inline double shapley_weight(std::size_t s, std::size_t n) {
  // 1 / (n * C(n-1, s))
  double binom = 1.0;
  for (std::size_t i = 1; i <= s; ++i)
    binom = binom * static_cast<double>(n - 1 - s + i) / static_cast<double>(i);
  return 1.0 / (static_cast<double>(n) * binom);
}

namespace detail {

// Walks the tree for one (x, z) pair. Along a path, S_x holds the features
// whose split sends x and z different ways and where the path follows x;
// S_z likewise for z. A leaf reached with sets (S_x, S_z) contributes
// weight * [S_x subset of S, S disjoint from S_z] to v(S), whose Shapley
// values are closed-form.
class PairWalker {
 public:
  PairWalker(const gbdt::Tree& tree, std::span<const double> x, std::span<const double> z,
             std::span<double> phi)
      : tree_(tree), x_(x), z_(z), phi_(phi), in_x_(x.size(), 0), in_z_(x.size(), 0) {}

  void run() { walk(0); }

 private:
  void walk(int id) {
    const auto& node = tree_.nodes[id];
    if (node.is_leaf()) {
      const std::size_t a = sx_.size(), b = sz_.size();
      if (a + b == 0) return;
      const double v = node.weight;
      if (a > 0) {
        const double w = shapley_weight(a - 1, a + b) * v;
        for (auto f : sx_) phi_[f] += w;
      }
      if (b > 0) {
        const double w = shapley_weight(a, a + b) * v;
        for (auto f : sz_) phi_[f] -= w;
      }
      return;
    }
    const auto f = static_cast<std::size_t>(node.feature);
    const int x_child = x_[f] < node.threshold ? node.left : node.right;
    const int z_child = z_[f] < node.threshold ? node.left : node.right;
    if (x_child == z_child) {
      walk(x_child);
    } else if (in_x_[f]) {
      walk(x_child);
    } else if (in_z_[f]) {
      walk(z_child);
    } else {
      in_x_[f] = 1;
      sx_.push_back(f);
      walk(x_child);
      sx_.pop_back();
      in_x_[f] = 0;

      in_z_[f] = 1;
      sz_.push_back(f);
      walk(z_child);
      sz_.pop_back();
      in_z_[f] = 0;
    }
  }

  const gbdt::Tree& tree_;
  std::span<const double> x_, z_;
  std::span<double> phi_;
  std::vector<std::uint8_t> in_x_, in_z_;
  std::vector<std::size_t> sx_, sz_;
};

}  // namespace detail

// Adds the attribution of a single tree against a single reference row.
inline void shap_tree_pair(const gbdt::Tree& tree, std::span<const double> x,
                           std::span<const double> z, std::span<double> phi) {
  detail::PairWalker(tree, x, z, phi).run();
}

inline Attribution shap_tree(const gbdt::Ensemble& e, std::span<const double> x,
                             const Matrix& background, std::size_t sample_id = 0) {
  if (background.rows() == 0) throw InputError("background set is empty");
  if (background.cols() != e.feature_count)
    throw InputError("background width does not match the ensemble");
  Attribution a;
  a.sample_id = sample_id;
  a.model_output = e.predict_margin(x);
  a.phi.assign(e.feature_count, 0.0);
  std::vector<double> acc(e.feature_count, 0.0);
  double base = 0.0;
  for (std::size_t r = 0; r < background.rows(); ++r) {
    auto z = background.row(r);
    base += e.predict_margin(z);
    for (const auto& t : e.trees) shap_tree_pair(t, x, z, acc);
  }
  const double nb = static_cast<double>(background.rows());
  a.base_value = base / nb;
  for (std::size_t f = 0; f < acc.size(); ++f) a.phi[f] = acc[f] / nb;
  return a;
}

using PredictFn = std::function<double(std::span<const double>)>;

// Shapley values by enumerating all 2^M coalitions.
inline Attribution shap_bruteforce(const PredictFn& predict, std::span<const double> x,
                                   const Matrix& background, std::size_t m,
                                   std::size_t sample_id = 0) {
  if (m > 20) throw InputError("brute-force Shapley limited to 20 features");
  if (background.rows() == 0) throw InputError("background set is empty");
  if (x.size() != m || background.cols() != m)
    throw InputError("feature count does not match the explained row");
  const std::size_t n_sets = std::size_t{1} << m;
  std::vector<double> v(n_sets, 0.0);
  std::vector<double> composite(m);
  for (std::size_t s = 0; s < n_sets; ++s) {
    double sum = 0.0;
    for (std::size_t r = 0; r < background.rows(); ++r) {
      auto b = background.row(r);
      for (std::size_t f = 0; f < m; ++f) composite[f] = (s >> f) & 1 ? x[f] : b[f];
      sum += predict(composite);
    }
    v[s] = sum / static_cast<double>(background.rows());
  }
  Attribution a;
  a.sample_id = sample_id;
  a.base_value = v[0];
  a.model_output = v[n_sets - 1];
  a.phi.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t s = 0; s < n_sets; ++s) {
      if (s & bit) continue;
      const auto size = static_cast<std::size_t>(__builtin_popcountll(s));
      a.phi[i] += shapley_weight(size, m) * (v[s | bit] - v[s]);
    }
  }
  return a;
}

// Up to max_rows rows drawn without replacement, kept in source order.
inline Matrix sample_background(const Matrix& x, std::size_t max_rows, std::uint64_t seed) {
  std::vector<std::size_t> idx(x.rows());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  if (idx.size() > max_rows) {
    Rng rng(seed);
    shuffle(idx, rng);
    idx.resize(max_rows);
    std::sort(idx.begin(), idx.end());
  }
  return x.select_rows(idx);
}

struct Importance {
  std::size_t feature = 0;
  double mean_abs_phi = 0.0;
};

// Features by descending mean |phi|; ties by index.
inline std::vector<Importance> global_importance(const std::vector<Attribution>& atts) {
  if (atts.empty()) throw InputError("no attributions");
  const std::size_t m = atts.front().phi.size();
  std::vector<Importance> out(m);
  for (std::size_t f = 0; f < m; ++f) out[f].feature = f;
  for (const auto& a : atts) {
    if (a.phi.size() != m) throw InputError("attributions disagree on feature count");
    for (std::size_t f = 0; f < m; ++f) out[f].mean_abs_phi += std::abs(a.phi[f]);
  }
  for (auto& imp : out) imp.mean_abs_phi /= static_cast<double>(atts.size());
  std::stable_sort(out.begin(), out.end(), [](const Importance& a, const Importance& b) {
    return a.mean_abs_phi > b.mean_abs_phi;
  });
  return out;
}

inline std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

struct DependenceData {
  std::size_t feature = 0;
  std::vector<std::pair<double, double>> points;  // (x_f, phi_f)
  std::optional<std::size_t> partner;
  std::vector<double> partner_values;
};

// values holds the explained rows (one per attribution). The partner is the
// other feature whose values correlate most strongly (in absolute value)
// with phi_f.
inline DependenceData dependence_data(const std::vector<Attribution>& atts, const Matrix& values,
                                      std::size_t feature) {
  if (atts.empty()) throw InputError("no attributions");
  if (values.rows() != atts.size()) throw InputError("one value row per attribution required");
  if (feature >= values.cols()) throw InputError("feature index out of range");
  DependenceData d;
  d.feature = feature;
  std::vector<double> phi_f(atts.size());
  for (std::size_t i = 0; i < atts.size(); ++i) {
    phi_f[i] = atts[i].phi.at(feature);
    d.points.emplace_back(values(i, feature), phi_f[i]);
  }
  double best = -1.0;
  for (std::size_t j = 0; j < values.cols(); ++j) {
    if (j == feature) continue;
    auto col = values.column(j);
    auto r = pearson(col, phi_f);
    if (r && std::abs(*r) > best) {
      best = std::abs(*r);
      d.partner = j;
    }
  }
  if (d.partner) d.partner_values = values.column(*d.partner);
  return d;
}

struct Contribution {
  std::string feature;
  double value = 0.0;
  double phi = 0.0;
  bool pushes_positive = false;
};

struct ForcePlot {
  std::size_t sample_id = 0;
  double base_value = 0.0;
  double model_output = 0.0;
  double base_probability = 0.5;
  double output_probability = 0.5;
  std::vector<Contribution> contributions;  // by |phi| descending, zeros dropped
};

inline ForcePlot force_plot_data(const Attribution& a, const std::vector<std::string>& names,
                                 std::span<const double> values) {
  if (names.size() != a.phi.size() || values.size() != a.phi.size())
    throw InputError("names/values not aligned with attribution");
  ForcePlot fp;
  fp.sample_id = a.sample_id;
  fp.base_value = a.base_value;
  fp.model_output = a.model_output;
  fp.base_probability = logistic(a.base_value);
  fp.output_probability = logistic(a.model_output);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < a.phi.size(); ++i)
    if (a.phi[i] != 0.0) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t l, std::size_t r) {
    return std::abs(a.phi[l]) > std::abs(a.phi[r]);
  });
  for (auto i : idx) fp.contributions.push_back({names[i], values[i], a.phi[i], a.phi[i] > 0.0});
  return fp;
}

inline void to_json(nlohmann::json& j, const ForcePlot& fp) {
  auto contrib = nlohmann::json::array();
  for (const auto& c : fp.contributions)
    contrib.push_back({{"feature", c.feature},
                       {"value", c.value},
                       {"phi", c.phi},
                       {"direction", c.pushes_positive ? "positive" : "negative"}});
  j = {{"sample_id", fp.sample_id},
       {"base_value", fp.base_value},
       {"model_output", fp.model_output},
       {"base_probability", fp.base_probability},
       {"output_probability", fp.output_probability},
       {"contributions", std::move(contrib)}};
}

inline void from_json(const nlohmann::json& j, ForcePlot& fp) {
  j.at("sample_id").get_to(fp.sample_id);
  j.at("base_value").get_to(fp.base_value);
  j.at("model_output").get_to(fp.model_output);
  j.at("base_probability").get_to(fp.base_probability);
  j.at("output_probability").get_to(fp.output_probability);
  fp.contributions.clear();
  for (const auto& c : j.at("contributions"))
    fp.contributions.push_back({c.at("feature").get<std::string>(), c.at("value").get<double>(),
                                c.at("phi").get<double>(),
                                c.at("direction").get<std::string>() == "positive"});
}

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string fmt(double v, int prec = 3) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os << std::setprecision(prec) << v;
  return os.str();
}

}  // namespace detail

// Static horizontal bar rendering: one bar per contribution, red pushes the
// margin up (towards malignant), blue pushes it down.
inline std::string force_plot_svg(const ForcePlot& fp) {
  const int width = 720, left = 200, bar_h = 22, gap = 6, top = 64;
  const int plot_w = width - left - 80;
  const int height = top + static_cast<int>(fp.contributions.size()) * (bar_h + gap) + 40;
  double max_abs = 0.0;
  for (const auto& c : fp.contributions) max_abs = std::max(max_abs, std::abs(c.phi));
  const double scale = max_abs > 0.0 ? (plot_w / 2.0) / max_abs : 0.0;
  const double axis = left + plot_w / 2.0;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"10\" y=\"22\" font-size=\"15\">sample " << fp.sample_id << ": base "
     << detail::fmt(fp.base_value) << " (p=" << detail::fmt(fp.base_probability) << ") &#8594; output "
     << detail::fmt(fp.model_output) << " (p=" << detail::fmt(fp.output_probability)
     << ")</text>\n";
  os << "<line x1=\"" << axis << "\" y1=\"" << top - 10 << "\" x2=\"" << axis << "\" y2=\""
     << height - 20 << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
  int y = top;
  for (const auto& c : fp.contributions) {
    const double w = std::abs(c.phi) * scale;
    const double x = c.pushes_positive ? axis : axis - w;
    os << "<text x=\"" << left - 8 << "\" y=\"" << y + 15 << "\" font-size=\"12\" text-anchor=\"end\">"
       << detail::xml_escape(c.feature) << " = " << detail::fmt(c.value) << "</text>\n";
    os << "<rect x=\"" << detail::fmt(x, 2) << "\" y=\"" << y << "\" width=\"" << detail::fmt(w, 2)
       << "\" height=\"" << bar_h << "\" fill=\"" << (c.pushes_positive ? "#d7263d" : "#1e88e5")
       << "\"/>\n";
    const double tx = c.pushes_positive ? axis + w + 4 : axis - w - 4;
    os << "<text x=\"" << detail::fmt(tx, 2) << "\" y=\"" << y + 15 << "\" font-size=\"11\""
       << (c.pushes_positive ? "" : " text-anchor=\"end\"") << ">"
       << (c.phi > 0 ? "+" : "") << detail::fmt(c.phi) << "</text>\n";
    y += bar_h + gap;
  }
  os << "</svg>\n";
  return os.str();
}

// sample_id, one phi column per feature, base_value, model_output.
inline void write_attributions_csv(std::ostream& out, const std::vector<Attribution>& atts,
                                   const std::vector<std::string>& names) {
  out << "sample_id";
  for (const auto& n : names) out << ",phi_" << n;
  out << ",base_value,model_output\n";
  out << std::setprecision(17);
  for (const auto& a : atts) {
    out << a.sample_id;
    for (double v : a.phi) out << ',' << v;
    out << ',' << a.base_value << ',' << a.model_output << '\n';
  }
}

}  // namespace ovxai::explain

#endif  // OVXAI_EXPLAIN_HPP_
