#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "galstm/data_ingest.hpp"
#include "galstm/ga.hpp"
#include "galstm/lstm.hpp"

namespace galstm {

// Gene order of the LSTM hyperparameter genome. Crossover cuts index into
// this order, so it must not change.
enum LstmGene : std::size_t { kLearningRate = 0, kHiddenUnits = 1, kNumLayers = 2, kLookback = 3 };

inline ga::GenomeSpec lstm_genome_spec() {
  using ga::GeneKind;
  using ga::GeneScale;
  return {
      {"learning_rate", 1e-4, 1e-1, GeneKind::real, GeneScale::log},
      {"hidden_units", 4, 128, GeneKind::integer, GeneScale::linear},
      {"num_layers", 1, 3, GeneKind::integer, GeneScale::linear},
      {"lookback", 5, 60, GeneKind::integer, GeneScale::linear},
  };
}

struct Hyperparams {
  double learning_rate = 0.01;
  std::size_t hidden_units = 16;
  std::size_t num_layers = 1;
  std::size_t lookback = 20;
};

inline Hyperparams decode(const ga::Genome& g) {
  if (g.size() != 4) throw ShapeError("decode: expected a 4-gene LSTM genome");
  return {g[kLearningRate], static_cast<std::size_t>(g[kHiddenUnits]),
          static_cast<std::size_t>(g[kNumLayers]), static_cast<std::size_t>(g[kLookback])};
}

inline ga::Genome encode(const Hyperparams& h) {
  return {{h.learning_rate, static_cast<double>(h.hidden_units), static_cast<double>(h.num_layers),
           static_cast<double>(h.lookback)}};
}

// Trains on `train_values` (scaled) for the budget's epochs using the genome's
// hyperparameters and returns -MAE on `validation` (scaled). Validation
// windows take their leading context from the tail of `train_values`. Divergence
// yields the sentinel fitness instead of an exception.
inline double evaluate_fitness(const ga::Genome& genome, std::span<const double> train_values,
                               std::span<const double> validation, TrainConfig budget,
                               std::uint64_t seed) {
  const Hyperparams hp = decode(genome);
  if (validation.empty()) throw InsufficientDataError("evaluate_fitness: empty validation set");
  if (train_values.size() <= hp.lookback) {
    throw InsufficientDataError("evaluate_fitness: training series too short for lookback " +
                                std::to_string(hp.lookback));
  }
  budget.learning_rate = hp.learning_rate;
  budget.seed = seed;
  const ScalerParams identity{0.0, 1.0};
  const WindowedDataset train_ds = make_windows(train_values, hp.lookback, identity);

  std::vector<double> joined(train_values.begin(), train_values.end());
  joined.insert(joined.end(), validation.begin(), validation.end());
  const WindowedDataset val_ds = make_windows(joined, hp.lookback, identity, train_values.size());

  try {
    const TrainedModel model = train(train_ds, hp.hidden_units, hp.num_layers, budget);
    const Vector pred = predict_scaled(model.params, val_ds.inputs);
    const double mae = (pred - val_ds.targets).cwiseAbs().mean();
    // Nothing ranks below a diverged run.
    if (!std::isfinite(mae) || -mae < ga::kDivergedFitness) return ga::kDivergedFitness;
    return -mae;
  } catch (const DivergedError&) {
    return ga::kDivergedFitness;
  } catch (const NumericError&) {
    return ga::kDivergedFitness;
  }
}

}  // namespace galstm
