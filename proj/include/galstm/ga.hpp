#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "galstm/errors.hpp"
#include "galstm/numerics.hpp"

namespace galstm::ga {

enum class GeneKind { real, integer };
enum class GeneScale { linear, log };

struct GeneSpec {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
  GeneKind kind = GeneKind::real;
  GeneScale scale = GeneScale::linear;

  bool contains(double v) const {
    if (!(v >= lo && v <= hi)) return false;
    return kind == GeneKind::real || v == std::round(v);
  }
};

using GenomeSpec = std::vector<GeneSpec>;

// Gene values in GenomeSpec order; integer genes hold whole numbers.
struct Genome {
  std::vector<double> genes;

  std::size_t size() const { return genes.size(); }
  double operator[](std::size_t i) const { return genes[i]; }
  double& operator[](std::size_t i) { return genes[i]; }

  friend bool operator==(const Genome&, const Genome&) = default;
};

inline bool within_bounds(const Genome& g, const GenomeSpec& spec) {
  if (g.size() != spec.size()) return false;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (!spec[i].contains(g[i])) return false;
  }
  return true;
}

struct Individual {
  Genome genome;
  std::optional<double> fitness;
};

struct Tournament {
  std::size_t k = 3;
};
struct Roulette {};
using Selection = std::variant<Roulette, Tournament>;

struct SinglePoint {};
struct MultiPoint {
  std::size_t points = 2;
};
struct Uniform {};
using CrossoverMode = std::variant<SinglePoint, MultiPoint, Uniform>;

struct GaConfig {
  std::size_t population_size = 10;
  std::size_t max_generations = 8;
  double crossover_rate = 0.9;
  double mutation_rate = 0.2;
  Selection selection = Tournament{3};
  CrossoverMode crossover = SinglePoint{};
  std::size_t elite_count = 1;
  std::optional<std::size_t> stagnation_patience;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  void validate() const {
    if (population_size < 2) throw ConfigError("population_size must be >= 2");
    if (max_generations < 1) throw ConfigError("max_generations must be >= 1");
    if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) throw ConfigError("crossover_rate must be in [0,1]");
    if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw ConfigError("mutation_rate must be in [0,1]");
    if (elite_count >= population_size) throw ConfigError("elite_count must be < population_size");
    if (const auto* t = std::get_if<Tournament>(&selection); t && (t->k < 1 || t->k > population_size)) {
      throw ConfigError("tournament k must be in [1, population_size]");
    }
    if (const auto* m = std::get_if<MultiPoint>(&crossover); m && m->points < 1) {
      throw ConfigError("multi_point crossover needs at least one cut point");
    }
    if (stagnation_patience && *stagnation_patience < 1) throw ConfigError("stagnation_patience must be >= 1");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
  }
};

struct GenerationRecord {
  std::size_t generation = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  double median_fitness = 0.0;  // kept in memory only; not part of ga_history.csv
  Genome best_genome;
};

using GaHistory = std::vector<GenerationRecord>;

// Fitness must be a pure function of (genome, seed).
using FitnessFn = std::function<double(const Genome&, std::uint64_t seed)>;

inline constexpr double kDivergedFitness = -1e9;

// ---------------------------------------------------------------------------
// Operators

inline double sample_gene(const GeneSpec& g, Rng& rng) {
  if (g.kind == GeneKind::integer) {
    const auto lo = static_cast<long long>(std::ceil(g.lo));
    const auto hi = static_cast<long long>(std::floor(g.hi));
    return static_cast<double>(lo + static_cast<long long>(rng.index(static_cast<std::size_t>(hi - lo + 1))));
  }
  if (g.scale == GeneScale::log) {
    return std::clamp(std::exp(rng.uniform(std::log(g.lo), std::log(g.hi))), g.lo, g.hi);
  }
  return rng.uniform(g.lo, g.hi);
}

inline std::vector<Individual> init_population(const GenomeSpec& spec, std::size_t size, Rng& rng) {
  if (size < 2) throw ConfigError("init_population: size must be >= 2");
  std::vector<Individual> pop(size);
  for (auto& ind : pop) {
    ind.genome.genes.reserve(spec.size());
    for (const auto& g : spec) ind.genome.genes.push_back(sample_gene(g, rng));
  }
  return pop;
}

// Average rank (1 = worst) of each individual; ties share the mean rank.
inline std::vector<double> fitness_ranks(const std::vector<Individual>& pop) {
  const std::size_t n = pop.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return *pop[a].fitness < *pop[b].fitness; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && *pop[order[j + 1]].fitness == *pop[order[i]].fitness) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  return rank;
}

inline void require_evaluated(const std::vector<Individual>& pop) {
  if (pop.empty()) throw ConfigError("selection from an empty population");
  for (const auto& ind : pop) {
    if (!ind.fitness) throw ConfigError("selection requires evaluated fitness");
  }
}

// Roulette wheel over rank weights (worst = 1 ... best = N); raw fitness
// here is <= 0, so proportional weights would be undefined.
inline std::size_t select_roulette_index(const std::vector<Individual>& pop, Rng& rng) {
  require_evaluated(pop);
  if (pop.size() == 1) return 0;
  const auto rank = fitness_ranks(pop);
  const double total = std::accumulate(rank.begin(), rank.end(), 0.0);
  double target = rng.uniform(0.0, total);
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (target < rank[i]) return i;
    target -= rank[i];
  }
  return pop.size() - 1;
}

// k distinct contestants drawn uniformly; highest fitness wins, ties to the
// lowest index.
inline std::size_t select_tournament_index(const std::vector<Individual>& pop, std::size_t k, Rng& rng) {
  require_evaluated(pop);
  if (k < 1 || k > pop.size()) throw ConfigError("tournament size out of range");
  std::vector<std::size_t> idx(pop.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.index(pop.size() - i)]);
  std::size_t best = idx[0];
  for (std::size_t i = 1; i < k; ++i) {
    const std::size_t c = idx[i];
    if (*pop[c].fitness > *pop[best].fitness || (*pop[c].fitness == *pop[best].fitness && c < best)) {
      best = c;
    }
  }
  return best;
}

inline const Individual& select_roulette(const std::vector<Individual>& pop, Rng& rng) {
  return pop[select_roulette_index(pop, rng)];
}

inline const Individual& select_tournament(const std::vector<Individual>& pop, std::size_t k, Rng& rng) {
  return pop[select_tournament_index(pop, k, rng)];
}

// Children alternate parents at each sorted cut index: genes [0,cut0) from
// the first parent, [cut0,cut1) from the second, and so on.
inline std::pair<Genome, Genome> crossover_at(const Genome& a, const Genome& b,
                                              const std::vector<std::size_t>& cuts) {
  if (a.size() != b.size()) throw ShapeError("crossover: genome lengths differ");
  Genome c1 = a, c2 = b;
  bool swapped = false;
  std::size_t next = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    while (next < cuts.size() && cuts[next] == i) {
      swapped = !swapped;
      ++next;
    }
    if (swapped) std::swap(c1[i], c2[i]);
  }
  return {std::move(c1), std::move(c2)};
}

inline std::pair<Genome, Genome> crossover_masked(const Genome& a, const Genome& b,
                                                  const std::vector<bool>& swap_mask) {
  if (a.size() != b.size() || swap_mask.size() != a.size()) throw ShapeError("crossover: length mismatch");
  Genome c1 = a, c2 = b;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (swap_mask[i]) std::swap(c1[i], c2[i]);
  }
  return {std::move(c1), std::move(c2)};
}

inline std::pair<Genome, Genome> crossover(const Genome& a, const Genome& b, const CrossoverMode& mode,
                                           Rng& rng) {
  if (a.size() != b.size()) throw ShapeError("crossover: genome lengths differ");
  const std::size_t n = a.size();
  if (std::holds_alternative<Uniform>(mode)) {
    std::vector<bool> mask(n);
    for (std::size_t i = 0; i < n; ++i) mask[i] = rng.bernoulli(0.5);
    return crossover_masked(a, b, mask);
  }
  // Point crossovers need an interior cut; a one-gene genome is just copied.
  if (n < 2) return {a, b};
  std::size_t points = 1;
  if (const auto* m = std::get_if<MultiPoint>(&mode)) points = std::min(m->points, n - 1);
  // Distinct cuts from [1, n-1] by partial shuffle.
  std::vector<std::size_t> candidates(n - 1);
  std::iota(candidates.begin(), candidates.end(), std::size_t{1});
  for (std::size_t i = 0; i < points; ++i) {
    std::swap(candidates[i], candidates[i + rng.index(candidates.size() - i)]);
  }
  std::vector<std::size_t> cuts(candidates.begin(), candidates.begin() + static_cast<long>(points));
  std::sort(cuts.begin(), cuts.end());
  return crossover_at(a, b, cuts);
}

// Each gene is perturbed with probability `rate`. Real genes: Gaussian noise
// with sd = 10% of the span (log-space span for log genes), clamped. Integer
// genes: uniform redraw of a different value within +/-20% of the span.
inline Genome mutate(const Genome& genome, const GenomeSpec& spec, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("mutation rate must be in [0,1]");
  if (genome.size() != spec.size()) throw ShapeError("mutate: genome does not match spec");
  Genome out = genome;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (!rng.bernoulli(rate)) continue;
    const GeneSpec& g = spec[i];
    if (g.kind == GeneKind::integer) {
      const auto lo = static_cast<long long>(std::ceil(g.lo));
      const auto hi = static_cast<long long>(std::floor(g.hi));
      if (hi == lo) continue;
      const auto cur = static_cast<long long>(out[i]);
      const auto reach = std::max<long long>(1, std::llround(0.2 * static_cast<double>(hi - lo)));
      const long long from = std::max(lo, cur - reach);
      const long long to = std::min(hi, cur + reach);
      // Draw from [from, to] minus the current value.
      auto pick = from + static_cast<long long>(rng.index(static_cast<std::size_t>(to - from)));
      if (pick >= cur) ++pick;
      out[i] = static_cast<double>(pick);
    } else if (g.scale == GeneScale::log) {
      const double span = std::log(g.hi) - std::log(g.lo);
      const double v = std::exp(std::log(out[i]) + rng.normal(0.0, 0.1 * span));
      out[i] = std::clamp(v, g.lo, g.hi);
    } else {
      out[i] = std::clamp(out[i] + rng.normal(0.0, 0.1 * (g.hi - g.lo)), g.lo, g.hi);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Driver

// Seed handed to the fitness function for individual `index` of `generation`.
inline std::uint64_t evaluation_seed(std::uint64_t master, std::size_t generation, std::size_t index) {
  return derive_seed(master, 0xE7A1ULL + generation, index);
}

// Evaluates every individual without a fitness. Work is split across up to
// `jobs` threads; results do not depend on the split.
inline void evaluate_population(std::vector<Individual>& pop, const FitnessFn& fitness,
                                std::uint64_t master_seed, std::size_t generation, std::size_t jobs) {
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (!pop[i].fitness) todo.push_back(i);
  }
  auto run = [&](std::size_t i) {
    double f = fitness(pop[i].genome, evaluation_seed(master_seed, generation, i));
    if (!std::isfinite(f)) f = kDivergedFitness;
    pop[i].fitness = f;
  };
  const std::size_t workers = std::min(jobs, todo.size());
  if (workers <= 1) {
    for (auto i : todo) run(i);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t k = w; k < todo.size(); k += workers) run(todo[k]);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct EvolveResult {
  Individual best;
  GaHistory history;
};

inline EvolveResult evolve(const GaConfig& cfg, const GenomeSpec& spec, const FitnessFn& fitness) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, 0x6A));
  std::vector<Individual> pop = init_population(spec, cfg.population_size, rng);
  GaHistory history;
  std::optional<double> best_so_far;
  std::size_t stale = 0;

  for (std::size_t gen = 0;; ++gen) {
    evaluate_population(pop, fitness, cfg.seed, gen, cfg.jobs);

    // Best first; stable so equal fitness keeps population order.
    std::vector<std::size_t> order(pop.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return *pop[a].fitness > *pop[b].fitness; });

    GenerationRecord rec;
    rec.generation = gen;
    rec.best_fitness = *pop[order[0]].fitness;
    rec.best_genome = pop[order[0]].genome;
    double sum = 0.0;
    for (const auto& ind : pop) sum += *ind.fitness;
    rec.mean_fitness = sum / static_cast<double>(pop.size());
    const std::size_t n = order.size();
    rec.median_fitness = n % 2 ? *pop[order[n / 2]].fitness
                               : 0.5 * (*pop[order[n / 2 - 1]].fitness + *pop[order[n / 2]].fitness);
    history.push_back(rec);

    if (!best_so_far || rec.best_fitness > *best_so_far + 1e-9) {
      stale = 0;
    } else {
      ++stale;
    }
    if (!best_so_far || rec.best_fitness > *best_so_far) best_so_far = rec.best_fitness;

    if (gen + 1 >= cfg.max_generations) break;
    if (cfg.stagnation_patience && stale >= *cfg.stagnation_patience) break;

    std::vector<Individual> next;
    next.reserve(pop.size());
    for (std::size_t e = 0; e < cfg.elite_count; ++e) next.push_back(pop[order[e]]);

    auto pick = [&]() -> const Individual& {
      if (const auto* t = std::get_if<Tournament>(&cfg.selection)) return select_tournament(pop, t->k, rng);
      return select_roulette(pop, rng);
    };
    while (next.size() < pop.size()) {
      const Genome& a = pick().genome;
      const Genome& b = pick().genome;
      auto [c1, c2] = rng.bernoulli(cfg.crossover_rate) ? crossover(a, b, cfg.crossover, rng)
                                                        : std::pair<Genome, Genome>{a, b};
      next.push_back({mutate(c1, spec, cfg.mutation_rate, rng), std::nullopt});
      if (next.size() < pop.size()) next.push_back({mutate(c2, spec, cfg.mutation_rate, rng), std::nullopt});
    }
    pop = std::move(next);
  }

  const auto best = std::max_element(pop.begin(), pop.end(), [](const auto& a, const auto& b) {
    return *a.fitness < *b.fitness;
  });
  return {*best, std::move(history)};
}

}  // namespace galstm::ga
