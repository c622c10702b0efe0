#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>

#include "opkl/sgd.hpp"

namespace opkl {

enum class RateRegime { prediction, estimation, misspecified };

[[nodiscard]] inline std::string to_string(RateRegime r) {
  switch (r) {
    case RateRegime::prediction: return "prediction";
    case RateRegime::estimation: return "estimation";
    case RateRegime::misspecified: return "misspecified";
  }
  return "?";
}

[[nodiscard]] inline RateRegime rate_regime_from_string(const std::string& s) {
  if (s == "prediction" || s == "pred") return RateRegime::prediction;
  if (s == "estimation" || s == "est") return RateRegime::estimation;
  if (s == "misspecified" || s == "misspec") return RateRegime::misspecified;
  throw std::invalid_argument("unknown rate regime: " + s);
}

/**
 * Exponent of the guaranteed polynomial decay of the expected error of the
 * last iterate, as a function of target smoothness r, capacity s, the step
 * exponent (theta online, theta' finite-horizon), and the error norm.
 * Logarithmic factors at branch boundaries are not represented.
 *
 * prediction:   L2 error, r > 0; s enters only the online branch and s = 1
 *               recovers the capacity-free statement.
 * estimation:   kernel-space error, r > 1/2, theta > s/(1+s); online
 *               additionally needs s < 1.
 * misspecified: interpolation norm of order beta in (0, 1), r > beta/2,
 *               theta > beta/(1+beta); s plays no role.
 */
[[nodiscard]] inline double theoretical_exponent(RateRegime regime, double r, double s,
                                                 double theta, ScheduleMode mode,
                                                 double beta = 0.0) {
  if (!(theta > 0.0 && theta < 1.0))
    throw std::invalid_argument("theoretical_exponent: theta must lie in (0, 1)");
  switch (regime) {
    case RateRegime::prediction: {
      if (!(r > 0.0)) throw std::invalid_argument("theoretical_exponent: prediction needs r > 0");
      if (mode == ScheduleMode::online) {
        if (!(s >= 0.0 && s <= 1.0))
          throw std::invalid_argument("theoretical_exponent: s must lie in [0, 1]");
        const double q = std::min(2.0 * r, 2.0 - s);
        return (theta <= q / (1.0 + q)) ? -theta : -q * (1.0 - theta);
      }
      const double q = 2.0 * r;
      return (theta <= q / (1.0 + q)) ? -theta : -q * (1.0 - theta);
    }
    case RateRegime::estimation: {
      if (!(r > 0.5)) throw std::invalid_argument("theoretical_exponent: estimation needs r > 1/2");
      const bool online = mode == ScheduleMode::online;
      if (online && !(s >= 0.0 && s < 1.0))
        throw std::invalid_argument("theoretical_exponent: online estimation needs s in [0, 1)");
      if (!online && !(s >= 0.0 && s <= 1.0))
        throw std::invalid_argument("theoretical_exponent: s must lie in [0, 1]");
      if (!(theta > s / (1.0 + s)))
        throw std::invalid_argument("theoretical_exponent: estimation needs theta > s/(1+s)");
      double boundary = (2.0 * r + s - 1.0) / (2.0 * r + s);
      if (online) {
        boundary = std::min(boundary, 0.5);
        return (theta <= boundary) ? s - (1.0 + s) * theta
                                   : -std::min(2.0 * r - 1.0, 1.0 - s) * (1.0 - theta);
      }
      return (theta <= boundary) ? s - (1.0 + s) * theta : -(2.0 * r - 1.0) * (1.0 - theta);
    }
    case RateRegime::misspecified: {
      if (!(beta > 0.0 && beta < 1.0))
        throw std::invalid_argument("theoretical_exponent: misspecified needs beta in (0, 1)");
      if (!(r > beta / 2.0))
        throw std::invalid_argument("theoretical_exponent: misspecified needs r > beta/2");
      if (!(theta > beta / (1.0 + beta)))
        throw std::invalid_argument("theoretical_exponent: misspecified needs theta > beta/(1+beta)");
      if (mode == ScheduleMode::online) {
        const double q = std::min(2.0 * r, 1.0);
        return (theta <= q / (1.0 + q)) ? beta - theta * (1.0 + beta)
                                        : -std::min(2.0 * r - beta, 1.0 - beta) * (1.0 - theta);
      }
      const double boundary = 2.0 * r / (2.0 * r + 1.0);
      return (theta <= boundary) ? beta - theta * (1.0 + beta)
                                 : -(2.0 * r - beta) * (1.0 - theta);
    }
  }
  throw std::invalid_argument("theoretical_exponent: unknown regime");
}

}  // namespace opkl
