#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "galstm/data_ingest.hpp"
#include "galstm/ga.hpp"
#include "galstm/lstm.hpp"
#include "galstm/metrics.hpp"
#include "galstm/model_io.hpp"
#include "galstm/search.hpp"

namespace galstm {

namespace fs = std::filesystem;

// Everything one CLI invocation needs. All fields have defaults; a JSON
// config file overrides them and command-line flags override the file.
struct RunConfig {
  fs::path data;
  Column column = Column::close;
  std::optional<Date> train_end;
  std::size_t lookback = 20;
  std::size_t hidden_units = 16;
  std::size_t num_layers = 1;
  TrainConfig train;  // train.seed is derived from `seed`, never read from the file
  ga::GaConfig ga;    // ga.seed and ga.jobs likewise
  int eval_epochs = 15;
  double validation_fraction = 0.2;
  fs::path out = ".";
  std::optional<fs::path> model;  // evaluate: defaults to <out>/model.json
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  fs::path model_path() const { return model.value_or(out / "model.json"); }

  // Seeds for each stage come from the master seed only.
  TrainConfig final_train_config() const {
    TrainConfig t = train;
    t.seed = derive_seed(seed, 0x7121);
    return t;
  }
  TrainConfig budget_config() const {
    TrainConfig t = train;
    t.epochs = eval_epochs;
    return t;
  }
  ga::GaConfig ga_config() const {
    ga::GaConfig g = ga;
    g.seed = derive_seed(seed, 0x6A5E);
    g.jobs = jobs;
    return g;
  }
};

enum class Command { stats, train, search, evaluate };

namespace detail {

inline std::string selection_name(const ga::Selection& s) {
  return std::holds_alternative<ga::Tournament>(s) ? "tournament" : "roulette";
}

inline std::string crossover_name(const ga::CrossoverMode& m) {
  if (std::holds_alternative<ga::SinglePoint>(m)) return "single_point";
  if (std::holds_alternative<ga::MultiPoint>(m)) return "multi_point";
  return "uniform";
}

}  // namespace detail

// Reads a JSON config on top of `cfg`. Unknown keys and type errors are
// collected into `problems` rather than thrown one at a time.
inline void apply_config_json(RunConfig& cfg, const nlohmann::json& j, std::vector<std::string>& problems) {
  if (!j.is_object()) {
    problems.push_back("config: top level must be an object");
    return;
  }
  auto get = [&](const nlohmann::json& obj, const std::string& key, auto& dst) {
    if (!obj.contains(key)) return;
    try {
      dst = obj.at(key).get<std::remove_reference_t<decltype(dst)>>();
    } catch (const nlohmann::json::exception&) {
      problems.push_back("config: '" + key + "' has the wrong type");
    }
  };
  static const std::vector<std::string> top_keys{
      "data",          "column",        "train_end",  "lookback", "hidden_units", "num_layers",
      "epochs",        "learning_rate", "optimizer",  "adam",     "batch_size",   "gradient_clip",
      "seed",          "jobs",          "out",        "model",    "ga"};
  for (const auto& [k, v] : j.items()) {
    if (std::find(top_keys.begin(), top_keys.end(), k) == top_keys.end()) {
      problems.push_back("config: unknown key '" + k + "'");
    }
  }
  std::string s;
  if (j.contains("data")) {
    get(j, "data", s);
    cfg.data = s;
  }
  if (j.contains("column")) {
    s.clear();
    get(j, "column", s);
    if (auto c = parse_column(s)) {
      cfg.column = *c;
    } else {
      problems.push_back("config: column must be open|high|low|close");
    }
  }
  if (j.contains("train_end")) {
    if (j["train_end"].is_null()) {
      cfg.train_end.reset();
    } else {
      s.clear();
      get(j, "train_end", s);
      if (auto d = Date::parse(s)) {
        cfg.train_end = *d;
      } else {
        problems.push_back("config: train_end is not a date");
      }
    }
  }
  get(j, "lookback", cfg.lookback);
  get(j, "hidden_units", cfg.hidden_units);
  get(j, "num_layers", cfg.num_layers);
  get(j, "epochs", cfg.train.epochs);
  get(j, "learning_rate", cfg.train.learning_rate);
  if (j.contains("optimizer")) {
    s.clear();
    get(j, "optimizer", s);
    if (s == "adam") {
      cfg.train.optimizer = OptimizerKind::adam;
    } else if (s == "sgd") {
      cfg.train.optimizer = OptimizerKind::sgd;
    } else {
      problems.push_back("config: optimizer must be adam|sgd");
    }
  }
  if (j.contains("adam")) {
    get(j["adam"], "beta1", cfg.train.adam.beta1);
    get(j["adam"], "beta2", cfg.train.adam.beta2);
    get(j["adam"], "epsilon", cfg.train.adam.epsilon);
  }
  get(j, "batch_size", cfg.train.batch_size);
  if (j.contains("gradient_clip")) {
    if (j["gradient_clip"].is_null()) {
      cfg.train.gradient_clip.reset();
    } else {
      double clip = 0.0;
      get(j, "gradient_clip", clip);
      cfg.train.gradient_clip = clip;
    }
  }
  get(j, "seed", cfg.seed);
  get(j, "jobs", cfg.jobs);
  if (j.contains("out")) {
    s.clear();
    get(j, "out", s);
    cfg.out = s;
  }
  if (j.contains("model")) {
    s.clear();
    get(j, "model", s);
    cfg.model = fs::path(s);
  }
  if (j.contains("ga")) {
    const auto& g = j["ga"];
    static const std::vector<std::string> ga_keys{
        "population_size", "max_generations", "crossover_rate", "mutation_rate",     "selection",
        "tournament_k",    "crossover",       "crossover_points", "elite_count",     "stagnation_patience",
        "eval_epochs",     "validation_fraction"};
    for (const auto& [k, v] : g.items()) {
      if (std::find(ga_keys.begin(), ga_keys.end(), k) == ga_keys.end()) {
        problems.push_back("config: unknown key 'ga." + k + "'");
      }
    }
    get(g, "population_size", cfg.ga.population_size);
    get(g, "max_generations", cfg.ga.max_generations);
    get(g, "crossover_rate", cfg.ga.crossover_rate);
    get(g, "mutation_rate", cfg.ga.mutation_rate);
    get(g, "elite_count", cfg.ga.elite_count);
    get(g, "eval_epochs", cfg.eval_epochs);
    get(g, "validation_fraction", cfg.validation_fraction);
    if (g.contains("stagnation_patience")) {
      if (g["stagnation_patience"].is_null()) {
        cfg.ga.stagnation_patience.reset();
      } else {
        std::size_t p = 0;
        get(g, "stagnation_patience", p);
        cfg.ga.stagnation_patience = p;
      }
    }
    std::size_t k = 3;
    if (const auto* t = std::get_if<ga::Tournament>(&cfg.ga.selection)) k = t->k;
    get(g, "tournament_k", k);
    std::string sel = detail::selection_name(cfg.ga.selection);
    get(g, "selection", sel);
    if (sel == "tournament") {
      cfg.ga.selection = ga::Tournament{k};
    } else if (sel == "roulette") {
      cfg.ga.selection = ga::Roulette{};
    } else {
      problems.push_back("config: ga.selection must be roulette|tournament");
    }
    std::size_t points = 2;
    get(g, "crossover_points", points);
    std::string cx = detail::crossover_name(cfg.ga.crossover);
    get(g, "crossover", cx);
    if (cx == "single_point") {
      cfg.ga.crossover = ga::SinglePoint{};
    } else if (cx == "multi_point") {
      cfg.ga.crossover = ga::MultiPoint{points};
    } else if (cx == "uniform") {
      cfg.ga.crossover = ga::Uniform{};
    } else {
      problems.push_back("config: ga.crossover must be single_point|multi_point|uniform");
    }
  }
}

inline nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json ga_json = {
      {"population_size", cfg.ga.population_size},
      {"max_generations", cfg.ga.max_generations},
      {"crossover_rate", cfg.ga.crossover_rate},
      {"mutation_rate", cfg.ga.mutation_rate},
      {"selection", detail::selection_name(cfg.ga.selection)},
      {"crossover", detail::crossover_name(cfg.ga.crossover)},
      {"elite_count", cfg.ga.elite_count},
      {"stagnation_patience", cfg.ga.stagnation_patience ? nlohmann::json(*cfg.ga.stagnation_patience)
                                                         : nlohmann::json(nullptr)},
      {"eval_epochs", cfg.eval_epochs},
      {"validation_fraction", cfg.validation_fraction}};
  if (const auto* t = std::get_if<ga::Tournament>(&cfg.ga.selection)) ga_json["tournament_k"] = t->k;
  if (const auto* m = std::get_if<ga::MultiPoint>(&cfg.ga.crossover)) ga_json["crossover_points"] = m->points;
  return {{"data", cfg.data.string()},
          {"column", lowercase(column_name(cfg.column))},
          {"train_end", cfg.train_end ? nlohmann::json(cfg.train_end->iso()) : nlohmann::json(nullptr)},
          {"lookback", cfg.lookback},
          {"hidden_units", cfg.hidden_units},
          {"num_layers", cfg.num_layers},
          {"epochs", cfg.train.epochs},
          {"learning_rate", cfg.train.learning_rate},
          {"optimizer", cfg.train.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
          {"adam", {{"beta1", cfg.train.adam.beta1}, {"beta2", cfg.train.adam.beta2}, {"epsilon", cfg.train.adam.epsilon}}},
          {"batch_size", cfg.train.batch_size},
          {"gradient_clip", cfg.train.gradient_clip ? nlohmann::json(*cfg.train.gradient_clip) : nlohmann::json(nullptr)},
          {"seed", cfg.seed},
          {"jobs", cfg.jobs},
          {"out", cfg.out.string()},
          {"ga", ga_json}};
}

inline std::vector<std::string> load_config_file(RunConfig& cfg, const fs::path& path) {
  std::vector<std::string> problems;
  std::ifstream in(path);
  if (!in) {
    problems.push_back("config: cannot open " + path.string());
    return problems;
  }
  try {
    nlohmann::json j;
    in >> j;
    apply_config_json(cfg, j, problems);
  } catch (const nlohmann::json::exception& e) {
    problems.push_back("config: " + path.string() + ": " + e.what());
  }
  return problems;
}

// Checks every field relevant to `cmd` and reports all failures at once.
inline void validate(const RunConfig& cfg, Command cmd, std::vector<std::string> problems = {}) {
  if (cfg.data.empty()) problems.push_back("--data is required");
  if (cmd != Command::stats) {
    if (!cfg.train_end) problems.push_back("--train-end is required");
    if (cfg.jobs < 1) problems.push_back("jobs must be >= 1");
  }
  if (cmd == Command::train || cmd == Command::search) {
    try {
      cfg.train.validate();
    } catch (const ConfigError& e) {
      problems.push_back(e.what());
    }
  }
  if (cmd == Command::train) {
    if (cfg.lookback < 1) problems.push_back("lookback must be >= 1");
    if (cfg.hidden_units < 1) problems.push_back("hidden_units must be >= 1");
    if (cfg.num_layers < 1) problems.push_back("num_layers must be >= 1");
  }
  if (cmd == Command::search) {
    try {
      auto g = cfg.ga;
      g.jobs = std::max<std::size_t>(cfg.jobs, 1);
      g.validate();
    } catch (const ConfigError& e) {
      problems.push_back(e.what());
    }
    if (cfg.eval_epochs < 1) problems.push_back("ga.eval_epochs must be >= 1");
    if (!(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0)) {
      problems.push_back("ga.validation_fraction must be in (0,1)");
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
}

// ---------------------------------------------------------------------------
// Output helpers

inline std::string fmt(double v) { return detail::format_double(v); }

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

inline std::string mae_history_csv(const std::vector<double>& history) {
  std::string s = "epoch,mae\n";
  for (std::size_t e = 0; e < history.size(); ++e) s += std::to_string(e + 1) + "," + fmt(history[e]) + "\n";
  return s;
}

inline std::string ga_history_csv(const ga::GaHistory& history) {
  std::string s = "generation,best_fitness,mean_fitness,learning_rate,hidden_units,num_layers,lookback\n";
  for (const auto& r : history) {
    const Hyperparams h = decode(r.best_genome);
    s += std::to_string(r.generation) + "," + fmt(r.best_fitness) + "," + fmt(r.mean_fitness) + "," +
         fmt(h.learning_rate) + "," + std::to_string(h.hidden_units) + "," + std::to_string(h.num_layers) +
         "," + std::to_string(h.lookback) + "\n";
  }
  return s;
}

// ---------------------------------------------------------------------------
// Commands

inline Series load_series(const RunConfig& cfg, std::ostream& log) {
  std::vector<std::string> warnings;
  Series s = load_csv(cfg.data, cfg.column, &warnings);
  for (const auto& w : warnings) log << "warning: " << w << '\n';
  return s;
}

// Table-2 layout: statistic rows, one column per price field.
inline void print_stats_table(const SeriesStats& stats, std::ostream& os) {
  auto line = [&](const std::string& label, auto get) {
    os << label;
    for (Column c : kAllColumns) os << ',' << get(stats[c]);
    os << '\n';
  };
  os << "stat";
  for (Column c : kAllColumns) os << ',' << column_name(c);
  os << '\n';
  line("count", [](const ColumnStats& s) { return std::to_string(s.count); });
  line("mean", [](const ColumnStats& s) { return fmt(s.mean); });
  line("std", [](const ColumnStats& s) { return fmt(s.stddev); });
  line("min", [](const ColumnStats& s) { return fmt(s.min); });
  line("25%", [](const ColumnStats& s) { return fmt(s.q25); });
  line("50%", [](const ColumnStats& s) { return fmt(s.q50); });
  line("75%", [](const ColumnStats& s) { return fmt(s.q75); });
  line("max", [](const ColumnStats& s) { return fmt(s.max); });
}

inline SeriesStats cmd_stats(const RunConfig& cfg, std::ostream& out, std::ostream& log = std::cerr) {
  validate(cfg, Command::stats);
  const SeriesStats stats = describe(load_series(cfg, log));
  print_stats_table(stats, out);
  return stats;
}

inline TrainedModel cmd_train(const RunConfig& cfg, std::ostream& log = std::cerr) {
  validate(cfg, Command::train);
  const Series series = load_series(cfg, log);
  const auto split = chronological_split(series, *cfg.train_end);
  const ScalerParams scaler = fit_scaler(split.train, cfg.column);
  const WindowedDataset ds = make_windows(split.train, cfg.lookback, scaler);
  log << "training on " << ds.size() << " windows (lookback " << cfg.lookback << ", hidden "
      << cfg.hidden_units << ", layers " << cfg.num_layers << ", epochs " << cfg.train.epochs << ")\n";
  TrainedModel model = train(ds, cfg.hidden_units, cfg.num_layers, cfg.final_train_config());
  fs::create_directories(cfg.out);
  save_model(model, cfg.out / "model.json");
  write_text(cfg.out / "mae_history.csv", mae_history_csv(model.mae_history));
  log << "final training MAE (scaled): " << model.mae_history.back() << '\n';
  return model;
}

struct SearchResult {
  ga::EvolveResult evolution;
  TrainedModel model;
};

inline SearchResult cmd_search(const RunConfig& cfg, std::ostream& log = std::cerr) {
  validate(cfg, Command::search);
  const Series series = load_series(cfg, log);
  const auto split = chronological_split(series, *cfg.train_end);
  const ScalerParams scaler = fit_scaler(split.train, cfg.column);
  const std::vector<double> scaled = scale_all(split.train.values(), scaler);

  const auto val_len = static_cast<std::size_t>(
      std::llround(cfg.validation_fraction * static_cast<double>(scaled.size())));
  const ga::GenomeSpec spec = lstm_genome_spec();
  const auto max_lookback = static_cast<std::size_t>(spec[kLookback].hi);
  if (val_len < 1 || scaled.size() - val_len <= max_lookback) {
    throw InsufficientDataError("search: training split of " + std::to_string(scaled.size()) +
                                " rows cannot hold a validation tail and lookback " +
                                std::to_string(max_lookback));
  }
  const std::span<const double> fit_part(scaled.data(), scaled.size() - val_len);
  const std::span<const double> val_part(scaled.data() + fit_part.size(), val_len);
  const TrainConfig budget = cfg.budget_config();

  const ga::FitnessFn fitness = [&](const ga::Genome& g, std::uint64_t seed) {
    return evaluate_fitness(g, fit_part, val_part, budget, seed);
  };
  const ga::GaConfig ga_cfg = cfg.ga_config();
  log << "searching: population " << ga_cfg.population_size << ", generations " << ga_cfg.max_generations
      << ", budget " << budget.epochs << " epochs, jobs " << ga_cfg.jobs << '\n';
  ga::EvolveResult evo = ga::evolve(ga_cfg, spec, fitness);
  for (const auto& r : evo.history) {
    log << "  generation " << r.generation << ": best " << r.best_fitness << ", mean " << r.mean_fitness << '\n';
  }

  const Hyperparams best = decode(evo.best.genome);
  TrainConfig final_cfg = cfg.final_train_config();
  final_cfg.learning_rate = best.learning_rate;
  const WindowedDataset ds = make_windows(split.train, best.lookback, scaler);
  TrainedModel model = train(ds, best.hidden_units, best.num_layers, final_cfg);

  fs::create_directories(cfg.out);
  write_text(cfg.out / "ga_history.csv", ga_history_csv(evo.history));
  const nlohmann::json best_json = {{"fitness", *evo.best.fitness},
                                    {"learning_rate", best.learning_rate},
                                    {"hidden_units", best.hidden_units},
                                    {"num_layers", best.num_layers},
                                    {"lookback", best.lookback}};
  write_text(cfg.out / "best_genome.json", best_json.dump(1) + "\n");
  save_model(model, cfg.out / "model.json");
  write_text(cfg.out / "mae_history.csv", mae_history_csv(model.mae_history));
  return {std::move(evo), std::move(model)};
}

struct Evaluation {
  MetricsReport report;
  std::vector<Date> dates;
  std::vector<double> actual;
  std::vector<double> predicted;
};

inline Evaluation cmd_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream& log = std::cerr) {
  validate(cfg, Command::evaluate);
  const TrainedModel model = load_model(cfg.model_path());
  const Series series = load_series(cfg, log);
  const auto split = chronological_split(series, *cfg.train_end);
  if (split.test.size() <= model.lookback) {
    throw InsufficientDataError("evaluate: test split has " + std::to_string(split.test.size()) +
                                " rows, model lookback is " + std::to_string(model.lookback));
  }
  const WindowedDataset ds = make_windows(split.test, model.lookback, model.scaler);
  Evaluation ev;
  ev.predicted = predict(model, ds.inputs);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& rec = split.test.records[i + model.lookback];
    ev.dates.push_back(rec.date);
    ev.actual.push_back(rec.value(cfg.column));
  }
  ev.report = compute_metrics(ev.actual, ev.predicted);
  print_metrics_table(ev.report, out);

  fs::create_directories(cfg.out);
  std::string csv = "date,actual,predicted\n";
  for (std::size_t i = 0; i < ev.dates.size(); ++i) {
    csv += ev.dates[i].iso() + "," + fmt(ev.actual[i]) + "," + fmt(ev.predicted[i]) + "\n";
  }
  write_text(cfg.out / "predictions.csv", csv);
  write_text(cfg.out / "metrics.json", metrics_to_json(ev.report).dump(1) + "\n");
  return ev;
}

}  // namespace galstm
