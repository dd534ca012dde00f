#pragma once

// Reference implementations written independently of the library, shared by the unit
// tests and the acceptance suite.

#include <algorithm>
#include <cmath>
#include <vector>

#include "msgc/matrix.hpp"

namespace msgc::testing {

// Per-slot counting, written independently of the library: for every adjacent pair and
// feature, walk the slots and count those where both nodes sit on the same side of their
// own mean.
inline Matrix brute_force_trend(const std::vector<double>& h, std::size_t slots, std::size_t nodes, std::size_t feats,
                         const Matrix& adjacency) {
  auto at = [&](std::size_t t, std::size_t n, std::size_t f) { return h[(t * nodes + n) * feats + f]; };
  Matrix out(nodes, nodes);
  for (std::size_t i = 0; i < nodes; ++i)
    for (std::size_t j = 0; j < nodes; ++j) {
      if (i == j || adjacency(i, j) == 0.0) continue;
      double hits = 0.0;
      for (std::size_t f = 0; f < feats; ++f) {
        double mi = 0.0, mj = 0.0;
        for (std::size_t t = 0; t < slots; ++t) {
          mi += at(t, i, f);
          mj += at(t, j, f);
        }
        mi /= static_cast<double>(slots);
        mj /= static_cast<double>(slots);
        for (std::size_t t = 0; t < slots; ++t) {
          const bool up_i = at(t, i, f) >= mi;
          const bool up_j = at(t, j, f) >= mj;
          if (up_i == up_j) hits += 1.0;
        }
      }
      out(i, j) = hits / static_cast<double>(feats * slots);
    }
  return out;
}

// Interval overlap on the absolute time axis, independent of the library's formulation.
inline double overlap_oracle(std::size_t p, std::size_t q, double delta, double minutes, std::size_t P) {
  if (std::isinf(minutes)) return 0.0;
  const double arrive_lo = static_cast<double>(p - 1) * delta + minutes;
  const double arrive_hi = arrive_lo + delta;
  const double window_lo = static_cast<double>(P + q - 1) * delta;
  const double window_hi = window_lo + delta;
  const double len = std::min(arrive_hi, window_hi) - std::max(arrive_lo, window_lo);
  return std::clamp(len / delta, 0.0, 1.0);
}

}  // namespace msgc::testing
