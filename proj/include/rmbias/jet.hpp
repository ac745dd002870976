#pragma once

#include <functional>

namespace rmbias {

/// (w(x), w'(x), w''(x)) of a scalar function at one point.
struct Jet2 {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;

  friend Jet2 operator-(const Jet2& a, const Jet2& b) {
    return {a.value - b.value, a.d1 - b.d1, a.d2 - b.d2};
  }
  friend Jet2 operator+(const Jet2& a, const Jet2& b) {
    return {a.value + b.value, a.d1 + b.d1, a.d2 + b.d2};
  }
  friend Jet2 operator*(double s, const Jet2& a) { return {s * a.value, s * a.d1, s * a.d2}; }
};

/// Anything that can be probed for value and the first two derivatives:
/// piecewise polynomials, reference solutions, networks.
using JetFunction = std::function<Jet2(double)>;

inline JetFunction difference(JetFunction a, JetFunction b) {
  return [a = std::move(a), b = std::move(b)](double x) { return a(x) - b(x); };
}

}  // namespace rmbias
