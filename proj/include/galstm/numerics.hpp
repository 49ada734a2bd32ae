#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>

#include "galstm/errors.hpp"

namespace galstm {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Activations

// Logistic function, evaluated on the branch that cannot overflow exp().
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double tanh_act(double x) { return std::tanh(x); }

template <typename Derived>
Matrix sigmoid(const Eigen::MatrixBase<Derived>& m) {
  return m.unaryExpr([](double x) { return sigmoid(x); });
}

template <typename Derived>
Matrix tanh_act(const Eigen::MatrixBase<Derived>& m) {
  return m.unaryExpr([](double x) { return std::tanh(x); });
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const std::string& where) {
  if (!m.allFinite()) throw NumericError(where);
}

inline void require_finite(double x, const std::string& where) {
  if (!std::isfinite(x)) throw NumericError(where);
}

// ---------------------------------------------------------------------------
// Shape-checked arithmetic. Eigen only asserts on mismatch in debug builds;
// these throw ShapeError in every build.

inline Vector matvec(const Matrix& m, const Vector& v) {
  if (m.cols() != v.size()) {
    throw ShapeError("matvec: matrix has " + std::to_string(m.cols()) +
                     " columns, vector has " + std::to_string(v.size()) + " entries");
  }
  return m * v;
}

inline Vector add(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("add: length mismatch");
  return a + b;
}

inline Vector hadamard(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("hadamard: length mismatch");
  return a.cwiseProduct(b);
}

inline Matrix outer(const Vector& a, const Vector& b) { return a * b.transpose(); }

inline Vector scaled(const Vector& v, double s) { return v * s; }

// ---------------------------------------------------------------------------
// Random numbers

// SplitMix64 finalizer; used both to expand seeds and to hash seed tuples.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed) ^ mix64(stream + 0x632BE59BD9B4E019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}

// xoshiro256** with SplitMix64 seeding. Bit-identical on every platform;
// child streams are obtained with fork() instead of sharing an instance.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) {
      s = mix64(x);
      x += 0x9E3779B97F4A7C15ULL;
    }
  }

  std::uint64_t seed() const noexcept { return seed_; }

  Rng fork(std::uint64_t stream_id) const { return Rng(derive_seed(seed_, stream_id)); }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) {
    const double u = lo + (hi - lo) * next_double();
    // lo + (hi-lo)*u can round up to hi when hi-lo is tiny relative to lo.
    return u < hi ? u : std::nextafter(hi, lo);
  }

  double normal(double mean, double stddev) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + stddev * r * std::cos(theta);
  }

  // Unbiased integer in [0, n) by rejection.
  std::size_t index(std::size_t n) {
    if (n <= 1) return 0;
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return static_cast<std::size_t>(x % bound);
  }

  bool bernoulli(double p) { return next_double() < p; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline double rng_uniform(Rng& rng, double lo, double hi) { return rng.uniform(lo, hi); }
inline double rng_normal(Rng& rng, double mean, double stddev) { return rng.normal(mean, stddev); }
inline std::size_t rng_index(Rng& rng, std::size_t n) { return rng.index(n); }

}  // namespace galstm
