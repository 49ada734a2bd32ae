#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "galstm/model_io.hpp"
#include "galstm/pipeline.hpp"
#include "synthetic.hpp"

using namespace galstm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

class Workdir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / (std::string("galstm_") + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  // Writes `series` to disk and returns a config splitting it after `train_rows`.
  RunConfig config_for(const Series& series, std::size_t train_rows) {
    const fs::path csv = dir / "prices.csv";
    write_csv(series, csv);
    RunConfig cfg;
    cfg.data = csv;
    cfg.train_end = series.records[train_rows - 1].date;
    cfg.out = dir / "out";
    return cfg;
  }

  fs::path dir;
};

}  // namespace

TEST(Stats, TableParsesBackToGoldenValues) {
  RunConfig cfg;
  cfg.data = fs::path(GALSTM_TEST_DATA) / "table1.csv";
  std::ostringstream out, log;
  cmd_stats(cfg, out, log);
  const auto rows = lines(out.str());
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows[0], "stat,Open,High,Low,Close");
  std::map<std::string, std::vector<double>> table;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::istringstream in(rows[i]);
    std::string label, cell;
    std::getline(in, label, ',');
    while (std::getline(in, cell, ',')) table[label].push_back(std::stod(cell));
    ASSERT_EQ(table[label].size(), 4u) << rows[i];
  }
  EXPECT_EQ(table["count"][3], 13);
  EXPECT_NEAR(table["mean"][3], 4.346267810307692, 1e-9);
  EXPECT_NEAR(table["std"][3], 0.14166032344859514, 1e-9);
  EXPECT_NEAR(table["min"][0], 3.748966684, 1e-9);
  EXPECT_NEAR(table["min"][2], 3.739663824, 1e-9);
  EXPECT_NEAR(table["min"][3], 4.093164444, 1e-9);
  EXPECT_NEAR(table["max"][3], 4.572250843, 1e-9);
  EXPECT_NEAR(table["25%"][0], 4.183400226, 1e-9);
  EXPECT_NEAR(table["50%"][0], 4.376895226, 1e-9);
  EXPECT_NEAR(table["75%"][0], 4.495967881, 1e-9);
}

TEST_F(Workdir, TrainWritesModelAndHistory) {
  RunConfig cfg = config_for(synthetic::sine(120), 100);
  cfg.lookback = 5;
  cfg.hidden_units = 4;
  cfg.train.epochs = 100;
  std::ostringstream log;
  const TrainedModel m = cmd_train(cfg, log);
  const auto hist = lines(slurp(cfg.out / "mae_history.csv"));
  ASSERT_EQ(hist.size(), 101u);
  EXPECT_EQ(hist[0], "epoch,mae");
  EXPECT_EQ(hist[1].rfind("1,", 0), 0u);
  EXPECT_EQ(hist[100].rfind("100,", 0), 0u);
  const TrainedModel back = load_model(cfg.out / "model.json");
  EXPECT_EQ(model_to_json(back).dump(), model_to_json(m).dump());
}

TEST_F(Workdir, RepeatRunsAreByteIdentical) {
  RunConfig cfg = config_for(synthetic::sine(120), 100);
  cfg.lookback = 6;
  cfg.hidden_units = 5;
  cfg.num_layers = 2;
  cfg.train.epochs = 10;
  cfg.seed = 9;
  std::ostringstream log;
  cmd_train(cfg, log);
  const std::string first = slurp(cfg.out / "model.json");
  const std::string first_hist = slurp(cfg.out / "mae_history.csv");
  cmd_train(cfg, log);
  EXPECT_EQ(slurp(cfg.out / "model.json"), first);
  EXPECT_EQ(slurp(cfg.out / "mae_history.csv"), first_hist);
  cfg.seed = 10;
  cmd_train(cfg, log);
  EXPECT_NE(slurp(cfg.out / "model.json"), first);
}

TEST(Config, ReportsEveryProblemAtOnce) {
  RunConfig cfg;
  std::vector<std::string> problems;
  apply_config_json(cfg,
                    nlohmann::json::parse(R"({"epochs": 0, "bogus": 1, "column": "volume",
                                              "ga": {"population_size": 1, "nope": true}})"),
                    problems);
  try {
    validate(cfg, Command::search, problems);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (const char* needle : {"--data", "--train-end", "epochs", "bogus", "column", "population", "ga.nope"}) {
      EXPECT_NE(msg.find(needle), std::string::npos) << needle << "\n" << msg;
    }
  }
}

TEST(Config, RoundTripsThroughJson) {
  RunConfig cfg;
  cfg.data = "x.csv";
  cfg.train_end = Date{2020, 2, 29};
  cfg.train.epochs = 7;
  cfg.train.gradient_clip.reset();
  cfg.ga.selection = ga::Roulette{};
  cfg.ga.crossover = ga::MultiPoint{3};
  cfg.ga.stagnation_patience = 4;
  RunConfig back;
  std::vector<std::string> problems;
  apply_config_json(back, config_to_json(cfg), problems);
  EXPECT_TRUE(problems.empty());
  EXPECT_EQ(config_to_json(back).dump(), config_to_json(cfg).dump());
}

TEST(Config, StatsNeedsNoBoundary) {
  RunConfig cfg;
  cfg.data = "x.csv";
  EXPECT_NO_THROW(validate(cfg, Command::stats));
  EXPECT_THROW(validate(cfg, Command::train), ConfigError);
}

TEST_F(Workdir, SearchSmokeRunEmitsArtifacts) {
  RunConfig cfg = config_for(synthetic::sine(300), 240);
  cfg.ga.population_size = 2;
  cfg.ga.max_generations = 1;
  cfg.ga.elite_count = 1;
  cfg.ga.selection = ga::Tournament{2};
  cfg.eval_epochs = 1;
  cfg.train.epochs = 2;
  std::ostringstream log;
  const SearchResult r = cmd_search(cfg, log);
  for (const char* f : {"ga_history.csv", "best_genome.json", "model.json", "mae_history.csv"}) {
    EXPECT_TRUE(fs::exists(cfg.out / f)) << f;
  }
  const auto hist = lines(slurp(cfg.out / "ga_history.csv"));
  ASSERT_EQ(hist.size(), 2u);
  EXPECT_EQ(hist[0], "generation,best_fitness,mean_fitness,learning_rate,hidden_units,num_layers,lookback");
  const auto best = nlohmann::json::parse(slurp(cfg.out / "best_genome.json"));
  EXPECT_EQ(best["lookback"].get<std::size_t>(), r.model.lookback);
  EXPECT_TRUE(ga::within_bounds(r.evolution.best.genome, lstm_genome_spec()));
}

TEST_F(Workdir, SearchRejectsShortTrainingSplit) {
  RunConfig cfg = config_for(synthetic::sine(80), 70);
  std::ostringstream log;
  EXPECT_THROW(cmd_search(cfg, log), InsufficientDataError);
}

TEST_F(Workdir, EvaluateConstantModelOnConstantSeries) {
  RunConfig cfg = config_for(synthetic::from_values(std::vector<double>(40, 5.0)), 20);
  TrainedModel m;
  m.params = LstmParams::zeros(1, 3, 1);
  m.params.b_out = 0.5;
  m.scaler = ScalerParams{0.0, 10.0};
  m.lookback = 4;
  fs::create_directories(cfg.out);
  save_model(m, cfg.out / "model.json");

  std::ostringstream out, log;
  const Evaluation ev = cmd_evaluate(cfg, out, log);
  EXPECT_EQ(ev.report.mae, 0.0);
  EXPECT_FALSE(ev.report.r2);
  const auto pred = lines(slurp(cfg.out / "predictions.csv"));
  EXPECT_EQ(pred.size(), 1u + 20 - 4);
  EXPECT_EQ(pred[0], "date,actual,predicted");
  EXPECT_EQ(pred[1], ev.dates[0].iso() + ",5,5");
  const auto metrics = nlohmann::json::parse(slurp(cfg.out / "metrics.json"));
  EXPECT_TRUE(metrics["r2"].is_null());
  EXPECT_NE(out.str().find("Evaluation parameters"), std::string::npos);
}

TEST_F(Workdir, EvaluateRowsFollowTestSplit) {
  RunConfig cfg = config_for(synthetic::sine(150), 110);
  cfg.lookback = 7;
  cfg.hidden_units = 4;
  cfg.train.epochs = 3;
  std::ostringstream out, log;
  cmd_train(cfg, log);
  const Evaluation ev = cmd_evaluate(cfg, out, log);
  EXPECT_EQ(ev.predicted.size(), 40u - 7u);
  EXPECT_EQ(lines(slurp(cfg.out / "predictions.csv")).size(), 1u + 40 - 7);
  const Series s = load_csv(cfg.data);
  EXPECT_EQ(ev.dates.front(), s.records[110 + 7].date);
  EXPECT_EQ(ev.dates.back(), s.last_date());
}

TEST_F(Workdir, EvaluateRejectsTestSplitShorterThanLookback) {
  RunConfig cfg = config_for(synthetic::sine(60), 55);
  TrainedModel m;
  m.params = LstmParams::zeros(1, 2, 1);
  m.scaler = ScalerParams{0.0, 1.0};
  m.lookback = 5;
  fs::create_directories(cfg.out);
  save_model(m, cfg.out / "model.json");
  std::ostringstream out, log;
  EXPECT_THROW(cmd_evaluate(cfg, out, log), InsufficientDataError);
}
