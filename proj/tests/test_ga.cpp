#include <gtest/gtest.h>

#include <array>
#include <set>

#include "galstm/ga.hpp"
#include "galstm/search.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace galstm;
using namespace galstm::ga;

namespace {

std::vector<Individual> with_fitness(const std::vector<double>& f) {
  std::vector<Individual> pop;
  for (double x : f) pop.push_back({Genome{{x}}, x});
  return pop;
}

GenomeSpec unit_spec() { return {{"g0", 0.0, 1.0, GeneKind::real, GeneScale::linear}}; }

double parabola(const Genome& g, std::uint64_t) { return -(g[0] - 0.5) * (g[0] - 0.5); }

}  // namespace

TEST(InitPopulation, BoundsDeterminismCoverage) {
  const GenomeSpec spec = lstm_genome_spec();
  Rng a(5), b(5);
  const auto pa = init_population(spec, 1000, a);
  const auto pb = init_population(spec, 1000, b);
  std::set<double> layers;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_TRUE(within_bounds(pa[i].genome, spec));
    EXPECT_EQ(pa[i].genome, pb[i].genome);
    EXPECT_FALSE(pa[i].fitness);
    layers.insert(pa[i].genome[kNumLayers]);
  }
  EXPECT_EQ(layers, (std::set<double>{1, 2, 3}));
  Rng c(1);
  EXPECT_THROW(init_population(spec, 1, c), ConfigError);
}

TEST(InitPopulation, LogGeneIsUniformInLogSpace) {
  const GenomeSpec spec = lstm_genome_spec();
  Rng r(8);
  const auto pop = init_population(spec, 4000, r);
  int below = 0;
  for (const auto& ind : pop) below += ind.genome[kLearningRate] < 1e-2;  // log-midpoint 10^-2.5 .. use decade
  // P(lr < 1e-2) = (log 1e-2 - log 1e-4) / (log 1e-1 - log 1e-4) = 2/3.
  EXPECT_NEAR(below / 4000.0, 2.0 / 3.0, 0.03);
}

TEST(Roulette, RankWeightsTwoIndividuals) {
  const auto pop = with_fitness({-0.3, -0.1});
  Rng r(10);
  int best = 0;
  for (int i = 0; i < 10000; ++i) best += select_roulette_index(pop, r) == 1;
  EXPECT_NEAR(best / 10000.0, 2.0 / 3.0, 0.02);
}

TEST(Roulette, EqualFitnessIsUniformAndSingletonIsFixed) {
  const auto pop = with_fitness({-1, -1, -1, -1});
  Rng r(11);
  std::array<int, 4> hits{};
  for (int i = 0; i < 10000; ++i) ++hits[select_roulette_index(pop, r)];
  for (int h : hits) EXPECT_NEAR(h / 10000.0, 0.25, 0.02);
  const auto one = with_fitness({-2});
  EXPECT_EQ(select_roulette_index(one, r), 0u);
}

TEST(Roulette, RequiresEvaluatedFitness) {
  std::vector<Individual> pop(2);
  Rng r(0);
  EXPECT_THROW(select_roulette(pop, r), ConfigError);
}

TEST(Tournament, ExhaustiveAlwaysPicksBest) {
  const auto pop = with_fitness({-3, -0.5, -2, -0.5, -9});
  Rng r(12);
  for (int i = 0; i < 200; ++i) EXPECT_EQ(select_tournament_index(pop, 5, r), 1u);  // tie -> lower index
}

TEST(Tournament, SizeOneIsUniform) {
  const auto pop = with_fitness({0, -1, -2});
  Rng r(13);
  std::array<int, 3> hits{};
  for (int i = 0; i < 10000; ++i) ++hits[select_tournament_index(pop, 1, r)];
  for (int h : hits) EXPECT_NEAR(h / 10000.0, 1.0 / 3.0, 0.02);
}

TEST(Tournament, MatchesSubsetEnumeration) {
  const std::vector<double> f{0, -1, -2};
  const auto expected = oracle::tournament_probabilities(f, 2);
  EXPECT_NEAR(expected[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(expected[1], 1.0 / 3.0, 1e-15);
  EXPECT_EQ(expected[2], 0.0);
  const auto pop = with_fitness(f);
  Rng r(14);
  std::array<int, 3> hits{};
  for (int i = 0; i < 10000; ++i) ++hits[select_tournament_index(pop, 2, r)];
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(hits[i] / 10000.0, expected[i], 0.02);
  EXPECT_THROW(select_tournament_index(pop, 4, r), ConfigError);
}

TEST(Crossover, IdenticalParentsAnyMode) {
  const Genome a{{0.01, 32, 2, 10}};
  Rng r(15);
  for (const CrossoverMode& m : std::vector<CrossoverMode>{SinglePoint{}, MultiPoint{3}, Uniform{}}) {
    for (int i = 0; i < 20; ++i) {
      const auto [c1, c2] = crossover(a, a, m, r);
      EXPECT_EQ(c1, a);
      EXPECT_EQ(c2, a);
    }
  }
}

TEST(Crossover, SinglePointDefinition) {
  const Genome a{{1, 2, 3, 4}}, b{{5, 6, 7, 8}};
  const auto [c1, c2] = crossover_at(a, b, {2});
  EXPECT_EQ(c1, (Genome{{1, 2, 7, 8}}));
  EXPECT_EQ(c2, (Genome{{5, 6, 3, 4}}));
  const auto [m1, m2] = crossover_at(a, b, {1, 3});
  EXPECT_EQ(m1, (Genome{{1, 6, 7, 4}}));
  EXPECT_EQ(m2, (Genome{{5, 2, 3, 8}}));
}

TEST(Crossover, UniformAllSwap) {
  const Genome a{{1, 2, 3, 4}}, b{{5, 6, 7, 8}};
  const auto [c1, c2] = crossover_masked(a, b, {true, true, true, true});
  EXPECT_EQ(c1, b);
  EXPECT_EQ(c2, a);
}

TEST(Crossover, RandomCutsStayInteriorAndPreserveGenes) {
  const Genome a{{1, 2, 3, 4}}, b{{5, 6, 7, 8}};
  Rng r(16);
  for (int i = 0; i < 200; ++i) {
    const auto [c1, c2] = crossover(a, b, SinglePoint{}, r);
    EXPECT_EQ(c1[0], 1);  // cut index >= 1
    EXPECT_NE(c1, a);     // cut index <= 3, so at least the last gene moves
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(c1[k] + c2[k], a[k] + b[k]);
  }
}

TEST(Mutate, RateZeroIsIdentity) {
  const GenomeSpec spec = lstm_genome_spec();
  const Genome g{{0.01, 64, 2, 30}};
  Rng r(17);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(mutate(g, spec, 0.0, r), g);
}

TEST(Mutate, RateOneStaysInBounds) {
  const GenomeSpec spec = lstm_genome_spec();
  Rng r(18);
  Rng init(19);
  for (auto& ind : init_population(spec, 500, init)) {
    Genome g = ind.genome;
    for (int k = 0; k < 5; ++k) {
      g = mutate(g, spec, 1.0, r);
      ASSERT_TRUE(within_bounds(g, spec));
    }
  }
  // Genes pinned at the bounds still move inward.
  const Genome edge{{1e-4, 4, 1, 60}};
  EXPECT_TRUE(within_bounds(mutate(edge, spec, 1.0, r), spec));
}

TEST(Mutate, ChangeFrequencyMatchesRate) {
  const GenomeSpec spec = lstm_genome_spec();
  const Genome g{{0.003, 64, 2, 30}};
  Rng r(20);
  std::array<int, 4> changed{};
  for (int i = 0; i < 10000; ++i) {
    const Genome m = mutate(g, spec, 0.3, r);
    for (std::size_t k = 0; k < 4; ++k) changed[k] += m[k] != g[k];
  }
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(changed[k] / 10000.0, 0.3, 0.02) << spec[k].name;
}

TEST(Evolve, FindsParabolaOptimum) {
  GaConfig cfg;
  cfg.population_size = 20;
  cfg.max_generations = 30;
  cfg.elite_count = 2;
  cfg.seed = 3;
  const auto res = evolve(cfg, unit_spec(), parabola);
  EXPECT_NEAR(res.best.genome[0], 0.5, 0.05);
  EXPECT_LE(res.history.size(), 30u);
}

TEST(Evolve, ElitismMonotoneAcrossOperators) {
  for (const Selection& sel : std::vector<Selection>{Roulette{}, Tournament{2}}) {
    for (const CrossoverMode& cx : std::vector<CrossoverMode>{SinglePoint{}, MultiPoint{2}, Uniform{}}) {
      GaConfig cfg;
      cfg.population_size = 8;
      cfg.max_generations = 15;
      cfg.selection = sel;
      cfg.crossover = cx;
      cfg.mutation_rate = 0.5;
      cfg.seed = 77;
      const GenomeSpec spec = lstm_genome_spec();
      // A bumpy deterministic fitness over the LSTM genome.
      const FitnessFn f = [](const Genome& g, std::uint64_t seed) {
        return -std::abs(std::log10(g[0]) + 2.0) - std::abs(g[1] - 40) / 50.0 -
               static_cast<double>(seed % 7) * 1e-3;
      };
      const auto res = evolve(cfg, spec, f);
      for (std::size_t t = 1; t < res.history.size(); ++t) {
        EXPECT_GE(res.history[t].best_fitness, res.history[t - 1].best_fitness);
      }
    }
  }
}

TEST(Evolve, MedianOfGeneration) {
  GaConfig cfg;
  cfg.population_size = 4;
  cfg.max_generations = 1;
  const std::vector<double> f{-4, -1, -3, -2};
  std::size_t calls = 0;
  const auto res = evolve(cfg, unit_spec(), [&](const Genome&, std::uint64_t) { return f[calls++]; });
  EXPECT_EQ(res.history[0].median_fitness, -2.5);
  EXPECT_EQ(res.history[0].best_fitness, -1.0);
  EXPECT_EQ(res.history[0].mean_fitness, -2.5);
}

TEST(Evolve, SingleGenerationAndStagnation) {
  GaConfig cfg;
  cfg.population_size = 4;
  cfg.max_generations = 1;
  EXPECT_EQ(evolve(cfg, unit_spec(), parabola).history.size(), 1u);

  cfg.max_generations = 50;
  cfg.stagnation_patience = 3;
  const auto flat = evolve(cfg, unit_spec(), [](const Genome&, std::uint64_t) { return -1.0; });
  EXPECT_EQ(flat.history.size(), 4u);  // generation 0 sets the best, then 3 stale generations
}

TEST(Evolve, ParallelEvaluationMatchesSerial) {
  GaConfig cfg;
  cfg.population_size = 9;
  cfg.max_generations = 6;
  cfg.seed = 123;
  const FitnessFn f = [](const Genome& g, std::uint64_t seed) {
    Rng r(seed);
    return parabola(g, seed) - 0.01 * r.next_double();
  };
  cfg.jobs = 1;
  const auto serial = evolve(cfg, unit_spec(), f);
  cfg.jobs = 4;
  const auto parallel = evolve(cfg, unit_spec(), f);
  ASSERT_EQ(serial.history.size(), parallel.history.size());
  for (std::size_t t = 0; t < serial.history.size(); ++t) {
    EXPECT_EQ(serial.history[t].best_fitness, parallel.history[t].best_fitness);
    EXPECT_EQ(serial.history[t].mean_fitness, parallel.history[t].mean_fitness);
    EXPECT_EQ(serial.history[t].best_genome, parallel.history[t].best_genome);
  }
}

TEST(Evolve, NonFiniteFitnessBecomesSentinel) {
  GaConfig cfg;
  cfg.population_size = 4;
  cfg.max_generations = 2;
  const auto res = evolve(cfg, unit_spec(), [](const Genome& g, std::uint64_t) {
    return g[0] < 0.5 ? std::numeric_limits<double>::quiet_NaN() : -g[0];
  });
  for (const auto& r : res.history) EXPECT_TRUE(std::isfinite(r.mean_fitness));
}

TEST(GaConfig, Validation) {
  GaConfig cfg;
  cfg.population_size = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = GaConfig{};
  cfg.elite_count = cfg.population_size;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = GaConfig{};
  cfg.selection = Tournament{0};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = GaConfig{};
  cfg.mutation_rate = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

// --- LSTM fitness -----------------------------------------------------------

namespace {

struct SineSplit {
  std::vector<double> train, val;
};

SineSplit sine_split() {
  const Series s = synthetic::sine(200);
  const auto v = scale_all(s.values(), fit_scaler(s, Column::close));
  return {{v.begin(), v.begin() + 160}, {v.begin() + 160, v.end()}};
}

}  // namespace

TEST(EvaluateFitness, DeterministicAndNonPositive) {
  const auto d = sine_split();
  TrainConfig budget;
  budget.epochs = 3;
  const Genome g{{0.01, 8, 1, 10}};
  const double a = evaluate_fitness(g, d.train, d.val, budget, 42);
  const double b = evaluate_fitness(g, d.train, d.val, budget, 42);
  EXPECT_EQ(a, b);
  EXPECT_LE(a, 0.0);
  EXPECT_GT(a, kDivergedFitness);
}

TEST(EvaluateFitness, DivergingGenomeYieldsSentinel) {
  // A stiff series (large unscaled swings) with plain SGD, no clipping and
  // the top learning-rate bound.
  std::vector<double> stiff(120);
  for (std::size_t i = 0; i < stiff.size(); ++i) stiff[i] = (i % 2 ? 1e3 : -1e3);
  TrainConfig budget;
  budget.epochs = 30;
  budget.optimizer = OptimizerKind::sgd;
  budget.gradient_clip.reset();
  budget.batch_size = 8;
  const Genome g{{1e-1, 128, 1, 5}};
  const std::span<const double> all(stiff);
  EXPECT_EQ(evaluate_fitness(g, all.first(100), all.subspan(100), budget, 1), kDivergedFitness);
}

TEST(EvaluateFitness, ValidationUsesTrainTailAsContext) {
  const auto d = sine_split();
  TrainConfig budget;
  budget.epochs = 1;
  // Validation shorter than the lookback still works.
  const std::vector<double> short_val(d.val.begin(), d.val.begin() + 3);
  EXPECT_LE(evaluate_fitness(Genome{{0.01, 4, 1, 20}}, d.train, short_val, budget, 1), 0.0);
  EXPECT_THROW(evaluate_fitness(Genome{{0.01, 4, 1, 20}}, d.train, {}, budget, 1), InsufficientDataError);
}

TEST(Genome, EncodeDecode) {
  const Hyperparams h{0.02, 33, 3, 17};
  const Hyperparams back = decode(encode(h));
  EXPECT_EQ(back.learning_rate, h.learning_rate);
  EXPECT_EQ(back.hidden_units, h.hidden_units);
  EXPECT_EQ(back.num_layers, h.num_layers);
  EXPECT_EQ(back.lookback, h.lookback);
  EXPECT_TRUE(within_bounds(encode(h), lstm_genome_spec()));
  EXPECT_FALSE(within_bounds(Genome{{0.02, 33.5, 3, 17}}, lstm_genome_spec()));
}
