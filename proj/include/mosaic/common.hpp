#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mosaic {

inline constexpr const char* kVersion = "1.0.0";

// All numerics run at 64-bit precision.
using Scalar = double;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Violated precondition or broken internal invariant. The CLI maps this
// to exit code 3.
class ContractViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss or gradient. Exit code 4.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or rejected configuration. Exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

// Every run has exactly one root seed; all streams are derived from it with
// a purpose label so data, init, and dropout randomness never alias.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

// Deterministic splitmix64 stream. Self-contained so sampled values do not
// depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // standard normal, Box-Muller
  int uniform_int(int n);                 // [0, n)
  Rng fork(std::string_view label) const; // independent derived stream

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

bool all_finite(const Matrix& m);

}  // namespace mosaic
