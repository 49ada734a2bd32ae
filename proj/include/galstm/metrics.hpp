#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>

#include <json.hpp>

#include "galstm/errors.hpp"

namespace galstm {

// Regression metrics for one prediction run. `r2` is empty when the actuals
// are constant; `mape` is empty when any actual is zero.
struct MetricsReport {
  double mae = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  std::optional<double> r2;
  std::optional<double> mape;  // percent
  bool scaled_units = false;
};

inline MetricsReport compute_metrics(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size()) {
    throw ShapeError("compute_metrics: " + std::to_string(actual.size()) + " actuals vs " +
                     std::to_string(predicted.size()) + " predictions");
  }
  if (actual.empty()) throw InsufficientDataError("compute_metrics: empty input");
  const auto n = static_cast<double>(actual.size());

  double mean_actual = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (!std::isfinite(actual[i]) || !std::isfinite(predicted[i])) {
      throw NumericError("compute_metrics input");
    }
    mean_actual += actual[i];
  }
  mean_actual /= n;

  double abs_sum = 0.0, sq_sum = 0.0, ss_tot = 0.0, pct_sum = 0.0;
  bool zero_actual = false;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double e = actual[i] - predicted[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    ss_tot += (actual[i] - mean_actual) * (actual[i] - mean_actual);
    if (actual[i] == 0.0) {
      zero_actual = true;
    } else {
      pct_sum += std::abs(e) / std::abs(actual[i]);
    }
  }

  MetricsReport r;
  r.mae = abs_sum / n;
  r.mse = sq_sum / n;
  r.rmse = std::sqrt(r.mse);
  if (ss_tot > 0.0) r.r2 = 1.0 - sq_sum / ss_tot;
  if (!zero_actual) r.mape = pct_sum / n * 100.0;
  return r;
}

// Two-column "Evaluation parameters / Value" table.
inline void print_metrics_table(const MetricsReport& r, std::ostream& os) {
  auto row = [&os](const char* name, std::optional<double> v) {
    char buf[64];
    if (v) {
      std::snprintf(buf, sizeof buf, "%-22s %.6f\n", name, *v);
    } else {
      std::snprintf(buf, sizeof buf, "%-22s %s\n", name, "undefined");
    }
    os << buf;
  };
  os << "Evaluation parameters  Value\n";
  os << "---------------------  ----------\n";
  row("MAE", r.mae);
  row("MSE", r.mse);
  row("RMSE", r.rmse);
  row("R2", r.r2);
  row("MAPE (%)", r.mape);
}

inline nlohmann::json metrics_to_json(const MetricsReport& r) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"mae", r.mae},
          {"mse", r.mse},
          {"rmse", r.rmse},
          {"r2", opt(r.r2)},
          {"mape", opt(r.mape)},
          {"units", r.scaled_units ? "scaled" : "price"}};
}

}  // namespace galstm
