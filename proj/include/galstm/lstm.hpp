#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "galstm/data_ingest.hpp"
#include "galstm/errors.hpp"
#include "galstm/numerics.hpp"

namespace galstm {

// Gate order used for every per-gate array below.
enum Gate : std::size_t { kInputGate = 0, kForgetGate = 1, kOutputGate = 2, kCandidate = 3 };
inline constexpr std::size_t kGateCount = 4;

inline const char* gate_name(std::size_t g) {
  static constexpr std::array<const char*, kGateCount> names{"input gate", "forget gate",
                                                             "output gate", "candidate"};
  return names[g];
}

struct LayerParams {
  std::array<Matrix, kGateCount> W;  // hidden x layer input
  std::array<Matrix, kGateCount> U;  // hidden x hidden
  std::array<Vector, kGateCount> b;  // hidden
};

// Stacked LSTM with a linear head on the top layer's last hidden state.
// Gradients and optimizer moments reuse this type as a shape-tree.
struct LstmParams {
  std::size_t input_size = 1;
  std::size_t hidden_size = 1;
  std::size_t num_layers = 1;
  std::vector<LayerParams> layers;
  Vector w_out;
  double b_out = 0.0;

  std::size_t layer_input_size(std::size_t layer) const {
    return layer == 0 ? input_size : hidden_size;
  }

  // Same shapes, every entry zero.
  static LstmParams zeros(std::size_t input_size, std::size_t hidden_size, std::size_t num_layers) {
    LstmParams p;
    p.input_size = input_size;
    p.hidden_size = hidden_size;
    p.num_layers = num_layers;
    const auto h = static_cast<Eigen::Index>(hidden_size);
    p.layers.resize(num_layers);
    for (std::size_t l = 0; l < num_layers; ++l) {
      const auto in = static_cast<Eigen::Index>(p.layer_input_size(l));
      for (std::size_t g = 0; g < kGateCount; ++g) {
        p.layers[l].W[g] = Matrix::Zero(h, in);
        p.layers[l].U[g] = Matrix::Zero(h, h);
        p.layers[l].b[g] = Vector::Zero(h);
      }
    }
    p.w_out = Vector::Zero(h);
    return p;
  }

  LstmParams zeros_like() const { return zeros(input_size, hidden_size, num_layers); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_tensor([&](std::span<const double> t) { n += t.size(); });
    return n;
  }

  // Calls f with one span per argument for every tensor, in a fixed order:
  // per layer W_i..W_g, U_i..U_g, b_i..b_g; then w_out, then b_out.
  // All arguments must share shapes.
  template <typename F, typename... P>
  static void zip_tensors(F&& f, P&... ps) {
    const auto& first = std::get<0>(std::forward_as_tuple(ps...));
    for (std::size_t l = 0; l < first.layers.size(); ++l) {
      for (std::size_t g = 0; g < kGateCount; ++g) f(span_of(ps.layers[l].W[g])...);
      for (std::size_t g = 0; g < kGateCount; ++g) f(span_of(ps.layers[l].U[g])...);
      for (std::size_t g = 0; g < kGateCount; ++g) f(span_of(ps.layers[l].b[g])...);
    }
    f(span_of(ps.w_out)...);
    f(scalar_span(ps.b_out)...);
  }

  template <typename F>
  void for_each_tensor(F&& f) {
    zip_tensors(std::forward<F>(f), *this);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    zip_tensors(std::forward<F>(f), *this);
  }

  bool all_finite() const {
    bool ok = true;
    for_each_tensor([&](std::span<const double> t) {
      for (double x : t) ok = ok && std::isfinite(x);
    });
    return ok;
  }

 private:
  template <typename M>
  static auto span_of(M& m) {
    using T = std::remove_pointer_t<decltype(m.data())>;
    return std::span<T>(m.data(), static_cast<std::size_t>(m.size()));
  }
  static std::span<double> scalar_span(double& x) { return {&x, 1}; }
  static std::span<const double> scalar_span(const double& x) { return {&x, 1}; }
};

// Glorot-uniform weights, zero biases except the forget gate (1.0).
inline LstmParams init_params(std::size_t input_size, std::size_t hidden_size,
                              std::size_t num_layers, std::uint64_t seed) {
  if (input_size == 0 || hidden_size == 0 || num_layers == 0) {
    throw ShapeError("init_params: sizes must be >= 1");
  }
  LstmParams p = LstmParams::zeros(input_size, hidden_size, num_layers);
  Rng rng(seed);
  auto fill = [&rng](auto& m) {
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(-limit, limit);
  };
  for (auto& layer : p.layers) {
    for (auto& w : layer.W) fill(w);
    for (auto& u : layer.U) fill(u);
    layer.b[kForgetGate].setOnes();
  }
  // w_out as a 1 x hidden matrix: fan_in = hidden, fan_out = 1.
  const double limit = std::sqrt(6.0 / static_cast<double>(hidden_size + 1));
  for (Eigen::Index k = 0; k < p.w_out.size(); ++k) p.w_out(k) = rng.uniform(-limit, limit);
  return p;
}

// Per-layer hidden and cell state; columns are independent sequences.
struct CellState {
  std::vector<Matrix> h;
  std::vector<Matrix> c;

  static CellState zeros(const LstmParams& p, Eigen::Index batch) {
    CellState s;
    const auto hs = static_cast<Eigen::Index>(p.hidden_size);
    s.h.assign(p.num_layers, Matrix::Zero(hs, batch));
    s.c.assign(p.num_layers, Matrix::Zero(hs, batch));
    return s;
  }
};

// The four gates' weights stacked row-wise in Gate order, so one product per
// input covers every gate.
struct StackedLayer {
  Matrix W;  // 4H x layer input
  Matrix U;  // 4H x H
  Vector b;  // 4H

  explicit StackedLayer(const LayerParams& p) {
    const auto h = p.U[0].rows();
    W.resize(kGateCount * h, p.W[0].cols());
    U.resize(kGateCount * h, h);
    b.resize(kGateCount * h);
    for (std::size_t g = 0; g < kGateCount; ++g) {
      const auto r = static_cast<Eigen::Index>(g) * h;
      W.middleRows(r, h) = p.W[g];
      U.middleRows(r, h) = p.U[g];
      b.segment(r, h) = p.b[g];
    }
  }
};

// One cell step for a batch. Matrices are (rows x batch) with one column per
// sequence. The step's input and previous state live in neighbouring steps.
struct StepCache {
  Matrix gates;  // activated, 4H x batch
  Matrix c, tanh_c, h;

  auto gate(std::size_t g) const {
    const auto h = gates.rows() / static_cast<Eigen::Index>(kGateCount);
    return gates.middleRows(static_cast<Eigen::Index>(g) * h, h);
  }
};

// h_prev and c_prev may be null for a zero state.
inline void step_forward(const Matrix& x, const Matrix* h_prev, const Matrix* c_prev,
                         const StackedLayer& layer, std::size_t layer_index, StepCache& out) {
  const auto hidden = layer.U.cols();
  out.gates.noalias() = layer.W * x;
  if (h_prev) out.gates.noalias() += layer.U * *h_prev;
  out.gates.colwise() += layer.b;
  // Checked before activation: Eigen's vectorized exp clamps its argument,
  // which turns NaN into a finite value.
  if (!out.gates.allFinite()) {
    for (std::size_t g = 0; g < kGateCount; ++g) {
      if (!out.gate(g).allFinite()) {
        throw NumericError("layer " + std::to_string(layer_index + 1) + " " + gate_name(g));
      }
    }
  }
  auto sig = out.gates.topRows(3 * hidden).array();
  sig = (1.0 + (-sig).exp()).inverse();
  auto cand = out.gates.bottomRows(hidden).array();
  cand = 1.0 - 2.0 / ((2.0 * cand).exp() + 1.0);
  const auto i = out.gates.topRows(hidden).array();
  const auto g = out.gates.bottomRows(hidden).array();
  if (c_prev) {
    out.c = (out.gates.middleRows(hidden, hidden).array() * c_prev->array() + i * g).matrix();
  } else {
    out.c = (i * g).matrix();
  }
  if (!out.c.allFinite()) {
    throw NumericError("layer " + std::to_string(layer_index + 1) + " cell state");
  }
  out.tanh_c = (1.0 - 2.0 / ((2.0 * out.c.array()).exp() + 1.0)).matrix();
  out.h = (out.gates.middleRows(2 * hidden, hidden).array() * out.tanh_c.array()).matrix();
}

// A single step with every intermediate, for inspection and tests.
struct CellCache {
  Matrix x, h_prev, c_prev;
  std::array<Matrix, kGateCount> gate;  // activated i, f, o, g
  Matrix c, tanh_c, h;
};

inline CellCache cell_forward(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev,
                              const LayerParams& layer, std::size_t layer_index = 0) {
  const auto hidden = layer.U[0].rows();
  if (x.rows() != layer.W[0].cols() || h_prev.rows() != hidden || c_prev.rows() != hidden ||
      h_prev.cols() != x.cols() || c_prev.cols() != x.cols()) {
    throw ShapeError("cell_forward: input/state dimensions do not match layer");
  }
  StepCache s;
  step_forward(x, &h_prev, &c_prev, StackedLayer(layer), layer_index, s);
  CellCache cache{x, h_prev, c_prev, {}, s.c, s.tanh_c, s.h};
  for (std::size_t g = 0; g < kGateCount; ++g) cache.gate[g] = s.gate(g);
  return cache;
}

// Single-sequence convenience overload.
inline CellCache cell_forward(const Vector& x, const Vector& h_prev, const Vector& c_prev,
                              const LayerParams& layer, std::size_t layer_index = 0) {
  return cell_forward(Matrix(x), Matrix(h_prev), Matrix(c_prev), layer, layer_index);
}

struct ForwardPass {
  Vector predictions;                          // one per sequence, scaled units
  Matrix windows;                              // batch x lookback
  std::vector<std::vector<StepCache>> caches;  // [layer][time]
};

// Runs every row of `windows` (batch x lookback) through the stack from a
// zero state. Row i's prediction is w_out . h_last(top) + b_out. Storage in
// `out` is reused when the shapes repeat.
inline void forward_batch(const Matrix& windows, const LstmParams& params, ForwardPass& out) {
  if (params.input_size != 1) throw ShapeError("forward_batch: univariate windows need input_size 1");
  if (windows.cols() == 0 || windows.rows() == 0) throw ShapeError("forward_batch: empty batch");
  const auto steps = static_cast<std::size_t>(windows.cols());
  out.windows = windows;
  out.caches.resize(params.num_layers);
  for (auto& layer : out.caches) layer.resize(steps);
  std::vector<StackedLayer> stacked;
  for (const auto& layer : params.layers) stacked.emplace_back(layer);
  const Matrix inputs = windows.transpose();  // lookback x batch; row t is step t
  Matrix x;
  for (std::size_t t = 0; t < steps; ++t) {
    x = inputs.row(static_cast<Eigen::Index>(t));
    for (std::size_t l = 0; l < params.num_layers; ++l) {
      const Matrix& in = l == 0 ? x : out.caches[l - 1][t].h;
      const StepCache* prev = t == 0 ? nullptr : &out.caches[l][t - 1];
      step_forward(in, prev ? &prev->h : nullptr, prev ? &prev->c : nullptr, stacked[l], l,
                   out.caches[l][t]);
    }
  }
  out.predictions = (params.w_out.transpose() * out.caches.back().back().h).transpose();
  out.predictions.array() += params.b_out;
  require_finite(out.predictions, "output head");
}

inline ForwardPass forward_batch(const Matrix& windows, const LstmParams& params) {
  ForwardPass out;
  forward_batch(windows, params, out);
  return out;
}

inline std::pair<double, ForwardPass> forward_window(std::span<const double> window,
                                                     const LstmParams& params) {
  Matrix row(1, static_cast<Eigen::Index>(window.size()));
  for (std::size_t j = 0; j < window.size(); ++j) row(0, static_cast<Eigen::Index>(j)) = window[j];
  ForwardPass pass = forward_batch(row, params);
  const double prediction = pass.predictions(0);
  return {prediction, std::move(pass)};
}

// Backpropagation through time. `d_predictions` holds dLoss/dPrediction per
// sequence; returns dLoss/dParam for every parameter.
inline LstmParams backward(const ForwardPass& pass, const Vector& d_predictions,
                           const LstmParams& params) {
  LstmParams grad = params.zeros_like();
  const std::size_t steps = pass.caches.front().size();
  const Matrix& h_top = pass.caches.back().back().h;
  const auto H = h_top.rows(), B = h_top.cols();
  if (d_predictions.size() != B) throw ShapeError("backward: batch size mismatch");

  grad.w_out = h_top * d_predictions;
  grad.b_out = d_predictions.sum();

  // dh arriving at each time step from the layer above; empty means zero.
  std::vector<Matrix> dh_above(steps);
  dh_above.back() = params.w_out * d_predictions.transpose();

  Matrix dh(H, B), dc(H, B), dz(kGateCount * H, B);
  for (std::size_t li = params.num_layers; li-- > 0;) {
    const StackedLayer P(params.layers[li]);
    const auto& caches = pass.caches[li];
    Matrix gW = Matrix::Zero(P.W.rows(), P.W.cols());
    Matrix gU = Matrix::Zero(P.U.rows(), P.U.cols());
    Vector gb = Vector::Zero(P.b.size());
    Matrix dh_next = Matrix::Zero(H, B);
    Matrix dc_next = Matrix::Zero(H, B);
    std::vector<Matrix> dx(li > 0 ? steps : 0);
    for (std::size_t t = steps; t-- > 0;) {
      const StepCache& k = caches[t];
      const auto i = k.gate(kInputGate).array();
      const auto f = k.gate(kForgetGate).array();
      const auto o = k.gate(kOutputGate).array();
      const auto g = k.gate(kCandidate).array();
      const auto tc = k.tanh_c.array();

      dh = dh_next;
      if (dh_above[t].size() != 0) dh += dh_above[t];
      dc = (dc_next.array() + dh.array() * o * (1.0 - tc.square())).matrix();

      dz.middleRows(kInputGate * H, H) = (dc.array() * g * i * (1.0 - i)).matrix();
      if (t > 0) {
        dz.middleRows(kForgetGate * H, H) = (dc.array() * caches[t - 1].c.array() * f * (1.0 - f)).matrix();
      } else {
        dz.middleRows(kForgetGate * H, H).setZero();
      }
      dz.middleRows(kOutputGate * H, H) = (dh.array() * tc * o * (1.0 - o)).matrix();
      dz.middleRows(kCandidate * H, H) = (dc.array() * i * (1.0 - g.square())).matrix();

      dc_next = (dc.array() * f).matrix();
      if (li == 0) {
        gW.noalias() += dz * pass.windows.col(static_cast<Eigen::Index>(t));
      } else {
        gW.noalias() += dz * pass.caches[li - 1][t].h.transpose();
        dx[t].noalias() = P.W.transpose() * dz;
      }
      if (t > 0) gU.noalias() += dz * caches[t - 1].h.transpose();
      gb += dz.rowwise().sum();
      dh_next.noalias() = P.U.transpose() * dz;
    }
    LayerParams& G = grad.layers[li];
    for (std::size_t q = 0; q < kGateCount; ++q) {
      const auto r = static_cast<Eigen::Index>(q) * H;
      G.W[q] = gW.middleRows(r, H);
      G.U[q] = gU.middleRows(r, H);
      G.b[q] = gb.segment(r, H);
    }
    dh_above = std::move(dx);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Training

enum class OptimizerKind { sgd, adam };

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 0.01;
  OptimizerKind optimizer = OptimizerKind::adam;
  AdamSettings adam;
  std::size_t batch_size = 0;  // 0 = full batch
  std::optional<double> gradient_clip = 5.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw ConfigError("learning_rate must be positive");
    }
    if (gradient_clip && !(*gradient_clip > 0.0)) throw ConfigError("gradient_clip must be positive");
    if (optimizer == OptimizerKind::adam &&
        !(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 &&
          adam.epsilon > 0.0)) {
      throw ConfigError("invalid adam settings");
    }
  }
};

struct TrainedModel {
  LstmParams params;
  ScalerParams scaler;
  std::size_t lookback = 0;
  std::vector<double> mae_history;
};

inline double global_norm(const LstmParams& grad) {
  double sq = 0.0;
  grad.for_each_tensor([&](std::span<const double> t) {
    for (double x : t) sq += x * x;
  });
  return std::sqrt(sq);
}

inline void clip_global_norm(LstmParams& grad, double max_norm) {
  const double norm = global_norm(grad);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    grad.for_each_tensor([&](std::span<double> t) {
      for (double& x : t) x *= s;
    });
  }
}

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const LstmParams& shape)
      : cfg_(cfg), m_(shape.zeros_like()), v_(shape.zeros_like()) {}

  void step(LstmParams& params, const LstmParams& grad) {
    ++t_;
    const double lr = cfg_.learning_rate;
    if (cfg_.optimizer == OptimizerKind::sgd) {
      LstmParams::zip_tensors(
          [&](std::span<double> p, std::span<const double> g) {
            for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
          },
          params, grad);
      return;
    }
    const auto& a = cfg_.adam;
    const double c1 = 1.0 - std::pow(a.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(a.beta2, static_cast<double>(t_));
    LstmParams::zip_tensors(
        [&](std::span<double> p, std::span<const double> g, std::span<double> m,
            std::span<double> v) {
          for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = a.beta1 * m[k] + (1.0 - a.beta1) * g[k];
            v[k] = a.beta2 * v[k] + (1.0 - a.beta2) * g[k] * g[k];
            p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + a.epsilon);
          }
        },
        params, grad, m_, v_);
  }

 private:
  TrainConfig cfg_;
  LstmParams m_;
  LstmParams v_;
  long t_ = 0;
};

// Minimizes MSE on scaled targets; records per-epoch training MAE.
inline TrainedModel train(const WindowedDataset& data, std::size_t hidden_size,
                          std::size_t num_layers, const TrainConfig& cfg) {
  cfg.validate();
  if (data.size() == 0) throw InsufficientDataError("train: empty dataset");
  TrainedModel model;
  model.scaler = data.scaler;
  model.lookback = data.lookback;
  model.params = init_params(1, hidden_size, num_layers, derive_seed(cfg.seed, 1));
  model.mae_history.reserve(static_cast<std::size_t>(cfg.epochs));

  const std::size_t n = data.size();
  const std::size_t batch = cfg.batch_size == 0 ? n : std::min(cfg.batch_size, n);
  Rng shuffle_rng(derive_seed(cfg.seed, 2));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Optimizer opt(cfg, model.params);
  ForwardPass pass;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (batch < n) {
      for (std::size_t k = n - 1; k > 0; --k) std::swap(order[k], order[shuffle_rng.index(k + 1)]);
    }
    double abs_err = 0.0;
    try {
      for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t count = std::min(batch, n - start);
        Matrix inputs;
        Vector targets;
        if (count == n && batch == n) {
          inputs = data.inputs;
          targets = data.targets;
        } else {
          inputs.resize(static_cast<Eigen::Index>(count), data.inputs.cols());
          targets.resize(static_cast<Eigen::Index>(count));
          for (std::size_t r = 0; r < count; ++r) {
            const auto src = static_cast<Eigen::Index>(order[start + r]);
            inputs.row(static_cast<Eigen::Index>(r)) = data.inputs.row(src);
            targets(static_cast<Eigen::Index>(r)) = data.targets(src);
          }
        }
        forward_batch(inputs, model.params, pass);
        const Vector residual = pass.predictions - targets;
        abs_err += residual.cwiseAbs().sum();
        const Vector d_pred = residual * (2.0 / static_cast<double>(count));
        LstmParams grad = backward(pass, d_pred, model.params);
        if (!grad.all_finite()) throw NumericError("gradient");
        if (cfg.gradient_clip) clip_global_norm(grad, *cfg.gradient_clip);
        opt.step(model.params, grad);
        if (!model.params.all_finite()) throw NumericError("parameter update");
      }
    } catch (const NumericError& e) {
      throw DivergedError(epoch, e.what());
    }
    const double mae = abs_err / static_cast<double>(n);
    if (!std::isfinite(mae)) throw DivergedError(epoch, "non-finite training error");
    model.mae_history.push_back(mae);
  }
  return model;
}

// Scaled-unit predictions, one per row of `windows`.
inline Vector predict_scaled(const LstmParams& params, const Matrix& windows) {
  return forward_batch(windows, params).predictions;
}

// Predictions in original price units.
inline std::vector<double> predict(const TrainedModel& model, const Matrix& windows) {
  if (static_cast<std::size_t>(windows.cols()) != model.lookback) {
    throw ShapeError("predict: window length " + std::to_string(windows.cols()) +
                     " does not match model lookback " + std::to_string(model.lookback));
  }
  const Vector scaled_pred = predict_scaled(model.params, windows);
  std::vector<double> out(static_cast<std::size_t>(scaled_pred.size()));
  for (Eigen::Index i = 0; i < scaled_pred.size(); ++i) {
    out[static_cast<std::size_t>(i)] = inverse_scale(scaled_pred(i), model.scaler);
  }
  return out;
}

}  // namespace galstm
