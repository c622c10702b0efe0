#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace opkl {

/// Thrown when two objects that must live on the same discretization do not.
class shape_error : public std::runtime_error {
public:
  explicit shape_error(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when an iteration produces non-finite values.
class numeric_error : public std::runtime_error {
public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when a linear system cannot be solved to working accuracy.
class linear_solve_error : public std::runtime_error {
public:
  explicit linear_solve_error(const std::string& what) : std::runtime_error(what) {}
};

/**
 * Deterministic random stream.
 *
 * std::mt19937_64 is fully specified by the standard; the distributions are
 * not, so uniform and normal variates are derived here explicitly.  Streams
 * are therefore reproducible bit for bit across standard libraries, which the
 * experiment outputs rely on.
 */
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes uniforms in pairs.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    spare_ = rad * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return rad * std::cos(2.0 * M_PI * u2);
  }

  /// Uniform integer in [0, bound), rejection sampled to avoid modulo bias.
  std::uint64_t integer(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::integer: bound must be positive");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % bound;
  }

private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Fisher-Yates shuffle driven by the deterministic stream.
template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.integer(i)]);
  }
}

}  // namespace opkl
