// galstm: GA-tuned LSTM forecaster for OHLC price series.
//
//   galstm stats    --data prices.csv
//   galstm train    --data prices.csv --train-end 2019-12-31 --out run/
//   galstm search   --data prices.csv --train-end 2019-12-31 --jobs 4 --out run/
//   galstm evaluate --data prices.csv --train-end 2019-12-31 --out run/

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "galstm/pipeline.hpp"

namespace {

struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> data;
  std::optional<std::string> column;
  std::optional<std::string> train_end;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::string> out;
  std::optional<std::string> model;
  std::optional<std::size_t> lookback;
  std::optional<std::size_t> hidden;
  std::optional<std::size_t> layers;
  std::optional<double> learning_rate;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file (flags override it)");
  cmd->add_option("--data", f.data, "OHLC CSV file (Date,Open,High,Low,Close)");
  cmd->add_option("--column", f.column, "Target column: close|open|high|low");
}

void add_split(CLI::App* cmd, Flags& f) {
  cmd->add_option("--train-end", f.train_end, "Last date of the training split (YYYY-MM-DD)");
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--out", f.out, "Output directory");
}

void add_training(CLI::App* cmd, Flags& f) {
  cmd->add_option("--epochs", f.epochs, "Training epochs");
  cmd->add_option("--jobs", f.jobs, "Parallel fitness evaluations");
  cmd->add_option("--learning-rate", f.learning_rate, "Learning rate");
  cmd->add_option("--lookback", f.lookback, "Window length");
  cmd->add_option("--hidden", f.hidden, "Hidden units per layer");
  cmd->add_option("--layers", f.layers, "Stacked LSTM layers");
}

galstm::RunConfig build_config(const Flags& f, galstm::Command cmd) {
  galstm::RunConfig cfg;
  std::vector<std::string> problems;
  if (f.config) problems = galstm::load_config_file(cfg, *f.config);
  if (f.data) cfg.data = *f.data;
  if (f.column) {
    if (auto c = galstm::parse_column(*f.column)) {
      cfg.column = *c;
    } else {
      problems.push_back("--column must be close|open|high|low");
    }
  }
  if (f.train_end) {
    if (auto d = galstm::Date::parse(*f.train_end)) {
      cfg.train_end = *d;
    } else {
      problems.push_back("--train-end is not a date: " + *f.train_end);
    }
  }
  if (f.epochs) cfg.train.epochs = *f.epochs;
  if (f.seed) cfg.seed = *f.seed;
  if (f.jobs) cfg.jobs = *f.jobs;
  if (f.out) cfg.out = *f.out;
  if (f.model) cfg.model = *f.model;
  if (f.lookback) cfg.lookback = *f.lookback;
  if (f.hidden) cfg.hidden_units = *f.hidden;
  if (f.layers) cfg.num_layers = *f.layers;
  if (f.learning_rate) cfg.train.learning_rate = *f.learning_rate;
  galstm::validate(cfg, cmd, std::move(problems));
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GA-optimized LSTM forecaster for OHLC price series"};
  app.require_subcommand(1);
  Flags f;

  auto* stats = app.add_subcommand("stats", "Print descriptive statistics per price column");
  add_common(stats, f);

  auto* train = app.add_subcommand("train", "Train an LSTM with fixed hyperparameters");
  add_common(train, f);
  add_split(train, f);
  add_training(train, f);

  auto* search = app.add_subcommand("search", "GA hyperparameter search, then retrain the best genome");
  add_common(search, f);
  add_split(search, f);
  add_training(search, f);

  auto* evaluate = app.add_subcommand("evaluate", "Score a saved model on the test split");
  add_common(evaluate, f);
  add_split(evaluate, f);
  evaluate->add_option("--model", f.model, "Model file (default: <out>/model.json)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (stats->parsed()) {
      galstm::cmd_stats(build_config(f, galstm::Command::stats), std::cout);
    } else if (train->parsed()) {
      galstm::cmd_train(build_config(f, galstm::Command::train));
    } else if (search->parsed()) {
      const auto result = galstm::cmd_search(build_config(f, galstm::Command::search));
      const auto best = galstm::decode(result.evolution.best.genome);
      std::cout << "best genome: learning_rate=" << best.learning_rate
                << " hidden_units=" << best.hidden_units << " num_layers=" << best.num_layers
                << " lookback=" << best.lookback << " fitness=" << *result.evolution.best.fitness << '\n';
    } else if (evaluate->parsed()) {
      galstm::cmd_evaluate(build_config(f, galstm::Command::evaluate), std::cout);
    }
  } catch (const galstm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
