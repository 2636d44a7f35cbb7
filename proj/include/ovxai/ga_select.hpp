#ifndef OVXAI_GA_SELECT_HPP_
#define OVXAI_GA_SELECT_HPP_

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ovxai/common.hpp"
#include "ovxai/dataset.hpp"
#include "ovxai/evaluation.hpp"
#include "ovxai/gbdt.hpp"
#include "ovxai/mask.hpp"

// Wrapper feature selection with a generational genetic algorithm over
// bitset chromosomes.
namespace ovxai::ga {

struct Params {
  std::size_t population = 100;
  double cx_pb = 0.5;
  double mut_pb = 0.2;
  double cx_indpb = 0.5;
  double mut_indpb = 0.5;
  std::size_t tournament = 3;
  std::size_t generations = 20;
  std::size_t elites = 1;
  std::uint64_t seed = 0;
  int fitness_folds = 5;

  void validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (population < 2) throw ConfigError("ga.population must be >= 2");
    if (!prob(cx_pb) || !prob(mut_pb) || !prob(cx_indpb) || !prob(mut_indpb))
      throw ConfigError("ga probabilities must lie in [0, 1]");
    if (tournament < 1) throw ConfigError("ga.tournament must be >= 1");
    if (elites >= population) throw ConfigError("ga.elites must be < ga.population");
    if (fitness_folds < 2) throw ConfigError("ga.fitness_folds must be >= 2");
  }
};

struct GenerationRecord {
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  FeatureMask best_mask;

  friend bool operator==(const GenerationRecord&, const GenerationRecord&) = default;
};

struct RunRecord {
  std::vector<GenerationRecord> history;  // generation 0 first
  FeatureMask final_mask;
  double final_fitness = 0.0;
  std::size_t evaluations = 0;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

using FitnessFn = std::function<double(const FeatureMask&)>;

// Draws k indices with replacement and returns the fittest; ties go to the
// lowest index.
inline std::size_t tournament_select(std::span<const double> fitness, std::size_t k, Rng& rng) {
  if (fitness.empty()) throw InputError("tournament over an empty population");
  std::size_t best = uniform_index(rng, fitness.size());
  for (std::size_t i = 1; i < k; ++i) {
    const std::size_t c = uniform_index(rng, fitness.size());
    if (fitness[c] > fitness[best] || (fitness[c] == fitness[best] && c < best)) best = c;
  }
  return best;
}

inline std::pair<FeatureMask, FeatureMask> uniform_crossover(const FeatureMask& a,
                                                             const FeatureMask& b, double indpb,
                                                             Rng& rng) {
  if (a.size() != b.size()) throw InputError("crossover parents differ in length");
  FeatureMask c1 = a, c2 = b;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (bernoulli(rng, indpb)) std::swap(c1.bits[i], c2.bits[i]);
  return {std::move(c1), std::move(c2)};
}

// An empty mask gets one uniformly chosen bit.
inline void repair(FeatureMask& m, Rng& rng) {
  if (m.size() > 0 && m.popcount() == 0) m.set(uniform_index(rng, m.size()));
}

inline FeatureMask flip_mutate(const FeatureMask& m, double indpb, Rng& rng) {
  FeatureMask out = m;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (bernoulli(rng, indpb)) out.flip(i);
  repair(out, rng);
  return out;
}

inline FeatureMask random_mask(std::size_t n, Rng& rng) {
  FeatureMask m(n);
  for (std::size_t i = 0; i < n; ++i) m.set(i, bernoulli(rng, 0.5));
  repair(m, rng);
  return m;
}

// Memoizes fitness by mask bits. Batches are evaluated possibly in parallel
// and merged by key, so results do not depend on scheduling.
class FitnessCache {
 public:
  FitnessCache(FitnessFn fn, unsigned threads) : fn_(std::move(fn)), threads_(std::max(1u, threads)) {}

  std::vector<double> evaluate(const std::vector<FeatureMask>& masks) {
    std::vector<const FeatureMask*> todo;
    std::map<std::string, bool> queued;
    for (const auto& m : masks) {
      auto key = m.to_string();
      if (cache_.count(key) || queued.count(key)) continue;
      queued[key] = true;
      todo.push_back(&m);
    }
    std::vector<double> fresh(todo.size());
    if (threads_ == 1 || todo.size() < 2) {
      for (std::size_t i = 0; i < todo.size(); ++i) fresh[i] = fn_(*todo[i]);
    } else {
      std::vector<std::thread> pool;
      const unsigned nt = std::min<unsigned>(threads_, static_cast<unsigned>(todo.size()));
      for (unsigned t = 0; t < nt; ++t)
        pool.emplace_back([&, t] {
          for (std::size_t i = t; i < todo.size(); i += nt) fresh[i] = fn_(*todo[i]);
        });
      for (auto& th : pool) th.join();
    }
    for (std::size_t i = 0; i < todo.size(); ++i) cache_[todo[i]->to_string()] = fresh[i];
    std::vector<double> out;
    out.reserve(masks.size());
    for (const auto& m : masks) out.push_back(cache_.at(m.to_string()));
    return out;
  }

  std::size_t evaluations() const { return cache_.size(); }

 private:
  FitnessFn fn_;
  unsigned threads_;
  std::map<std::string, double> cache_;
};

namespace detail {

inline GenerationRecord summarize(const std::vector<FeatureMask>& pop,
                                  const std::vector<double>& fit) {
  GenerationRecord g;
  std::size_t best = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < fit.size(); ++i) {
    sum += fit[i];
    if (fit[i] > fit[best]) best = i;
  }
  g.best_fitness = fit[best];
  g.mean_fitness = sum / static_cast<double>(fit.size());
  g.best_mask = pop[best];
  return g;
}

}  // namespace detail

// All random draws happen on the calling thread in a fixed order; only the
// fitness evaluations of a batch may run concurrently.
inline RunRecord run_ga(std::size_t n_features, const Params& p, const FitnessFn& fitness,
                        unsigned threads = 1) {
  p.validate();
  if (n_features == 0) throw InputError("GA needs at least one feature");
  Rng rng(p.seed);
  FitnessCache cache(fitness, threads);

  std::vector<FeatureMask> pop;
  pop.reserve(p.population);
  for (std::size_t i = 0; i < p.population; ++i) pop.push_back(random_mask(n_features, rng));
  std::vector<double> fit = cache.evaluate(pop);

  RunRecord rec;
  rec.history.push_back(detail::summarize(pop, fit));
  rec.final_mask = rec.history.back().best_mask;
  rec.final_fitness = rec.history.back().best_fitness;

  for (std::size_t gen = 0; gen < p.generations; ++gen) {
    std::vector<std::size_t> rank(pop.size());
    std::iota(rank.begin(), rank.end(), 0);
    std::stable_sort(rank.begin(), rank.end(),
                     [&](std::size_t a, std::size_t b) { return fit[a] > fit[b]; });

    const std::size_t n_children = p.population - p.elites;
    std::vector<FeatureMask> children;
    children.reserve(n_children);
    for (std::size_t i = 0; i < n_children; ++i)
      children.push_back(pop[tournament_select(fit, p.tournament, rng)]);
    for (std::size_t i = 0; i + 1 < children.size(); i += 2)
      if (bernoulli(rng, p.cx_pb))
        std::tie(children[i], children[i + 1]) =
            uniform_crossover(children[i], children[i + 1], p.cx_indpb, rng);
    for (auto& c : children) {
      if (bernoulli(rng, p.mut_pb)) c = flip_mutate(c, p.mut_indpb, rng);
      repair(c, rng);
    }

    std::vector<FeatureMask> next;
    std::vector<double> next_fit;
    next.reserve(p.population);
    for (std::size_t e = 0; e < p.elites; ++e) {
      next.push_back(pop[rank[e]]);
      next_fit.push_back(fit[rank[e]]);
    }
    auto child_fit = cache.evaluate(children);
    for (std::size_t i = 0; i < children.size(); ++i) {
      next.push_back(std::move(children[i]));
      next_fit.push_back(child_fit[i]);
    }
    pop = std::move(next);
    fit = std::move(next_fit);

    rec.history.push_back(detail::summarize(pop, fit));
    if (rec.history.back().best_fitness > rec.final_fitness) {
      rec.final_fitness = rec.history.back().best_fitness;
      rec.final_mask = rec.history.back().best_mask;
    }
  }
  rec.evaluations = cache.evaluations();
  return rec;
}

inline RunRecord run_ga(const Dataset& d, const Params& p, const FitnessFn& fitness,
                        unsigned threads = 1) {
  return run_ga(d.cols(), p, fitness, threads);
}

// Pooled out-of-fold accuracy of the boosted classifier on the masked
// columns. An empty mask scores 0.
inline double cv_accuracy_fitness(const Dataset& d, const FeatureMask& mask, int folds,
                                  std::uint64_t seed, const gbdt::Params& params = {}) {
  if (mask.popcount() == 0) return 0.0;
  return eval::cross_validate(d, mask, params, folds, seed).metrics.accuracy;
}

inline std::vector<std::string> mask_names(const FeatureMask& m,
                                           const std::vector<std::string>& names) {
  std::vector<std::string> out;
  for (auto i : m.indices()) out.push_back(names.at(i));
  return out;
}

inline nlohmann::json run_record_json(const RunRecord& r, const std::vector<std::string>& names) {
  auto hist = nlohmann::json::array();
  for (std::size_t g = 0; g < r.history.size(); ++g) {
    const auto& h = r.history[g];
    hist.push_back({{"generation", g},
                    {"best_fitness", h.best_fitness},
                    {"mean_fitness", h.mean_fitness},
                    {"best_mask", h.best_mask.to_string()},
                    {"best_features", mask_names(h.best_mask, names)}});
  }
  return {{"history", std::move(hist)},
          {"final_mask", r.final_mask.to_string()},
          {"final_features", mask_names(r.final_mask, names)},
          {"final_fitness", r.final_fitness},
          {"evaluations", r.evaluations}};
}

inline void to_json(nlohmann::json& j, const Params& p) {
  j = {{"population", p.population}, {"cx_pb", p.cx_pb},
       {"mut_pb", p.mut_pb},         {"cx_indpb", p.cx_indpb},
       {"mut_indpb", p.mut_indpb},   {"tournament", p.tournament},
       {"generations", p.generations}, {"elites", p.elites},
       {"seed", p.seed},             {"fitness_folds", p.fitness_folds}};
}

inline void from_json(const nlohmann::json& j, Params& p) {
  p = Params{};
  p.population = j.value("population", p.population);
  p.cx_pb = j.value("cx_pb", p.cx_pb);
  p.mut_pb = j.value("mut_pb", p.mut_pb);
  p.cx_indpb = j.value("cx_indpb", p.cx_indpb);
  p.mut_indpb = j.value("mut_indpb", p.mut_indpb);
  p.tournament = j.value("tournament", p.tournament);
  p.generations = j.value("generations", p.generations);
  p.elites = j.value("elites", p.elites);
  p.seed = j.value("seed", p.seed);
  p.fitness_folds = j.value("fitness_folds", p.fitness_folds);
}

}  // namespace ovxai::ga

#endif  // OVXAI_GA_SELECT_HPP_
