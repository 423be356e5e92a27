#pragma once

#include <cmath>

namespace lnn {

// Hyper-dual number: value plus first derivatives along two independent seed
// directions and the mixed second derivative. One forward evaluation with
// d1 seeded on x_i and d2 seeded on x_j yields f, df/dx_i, df/dx_j and
// d2f/dx_i dx_j exactly.
struct Dual2 {
  double v = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d12 = 0.0;

  constexpr Dual2() = default;
  constexpr Dual2(double value) : v(value) {}  // NOLINT: implicit promotion of constants
  constexpr Dual2(double value, double e1, double e2, double e12) : v(value), d1(e1), d2(e2), d12(e12) {}

  Dual2& operator+=(const Dual2& o) {
    v += o.v;
    d1 += o.d1;
    d2 += o.d2;
    d12 += o.d12;
    return *this;
  }
  Dual2& operator-=(const Dual2& o) {
    v -= o.v;
    d1 -= o.d1;
    d2 -= o.d2;
    d12 -= o.d12;
    return *this;
  }
  Dual2& operator*=(const Dual2& o) {
    *this = Dual2(v * o.v, d1 * o.v + v * o.d1, d2 * o.v + v * o.d2,
                  d12 * o.v + d1 * o.d2 + d2 * o.d1 + v * o.d12);
    return *this;
  }
  Dual2& operator/=(const Dual2& o);
};

// Chain rule for a scalar function with value f0, first derivative f1 and
// second derivative f2 at a.v.
// Products with an exactly-zero tangent stay zero, so a singular derivative in
// one coordinate does not poison the passes seeded along the others.
inline double tangent_mul(double f, double d) { return d == 0.0 ? 0.0 : f * d; }

inline Dual2 chain(const Dual2& a, double f0, double f1, double f2) {
  return {f0, tangent_mul(f1, a.d1), tangent_mul(f1, a.d2),
          tangent_mul(f1, a.d12) + tangent_mul(f2, a.d1 * a.d2)};
}

inline Dual2 operator-(const Dual2& a) { return {-a.v, -a.d1, -a.d2, -a.d12}; }
inline Dual2 operator+(const Dual2& a) { return a; }

inline Dual2 operator+(Dual2 a, const Dual2& b) { return a += b; }
inline Dual2 operator-(Dual2 a, const Dual2& b) { return a -= b; }
inline Dual2 operator*(Dual2 a, const Dual2& b) { return a *= b; }

inline Dual2 operator*(double s, const Dual2& a) { return {s * a.v, s * a.d1, s * a.d2, s * a.d12}; }
inline Dual2 operator*(const Dual2& a, double s) { return s * a; }
inline Dual2 operator+(double s, const Dual2& a) { return {s + a.v, a.d1, a.d2, a.d12}; }
inline Dual2 operator+(const Dual2& a, double s) { return s + a; }
inline Dual2 operator-(double s, const Dual2& a) { return {s - a.v, -a.d1, -a.d2, -a.d12}; }
inline Dual2 operator-(const Dual2& a, double s) { return {a.v - s, a.d1, a.d2, a.d12}; }

inline Dual2 reciprocal(const Dual2& a) {
  const double r = 1.0 / a.v;
  return chain(a, r, -r * r, 2.0 * r * r * r);
}

inline Dual2& Dual2::operator/=(const Dual2& o) { return *this *= reciprocal(o); }
inline Dual2 operator/(Dual2 a, const Dual2& b) { return a /= b; }
inline Dual2 operator/(const Dual2& a, double s) { return (1.0 / s) * a; }
inline Dual2 operator/(double s, const Dual2& a) { return s * reciprocal(a); }

inline bool operator<(const Dual2& a, const Dual2& b) { return a.v < b.v; }
inline bool operator>(const Dual2& a, const Dual2& b) { return a.v > b.v; }

inline Dual2 sin(const Dual2& a) {
  const double s = std::sin(a.v);
  return chain(a, s, std::cos(a.v), -s);
}
inline Dual2 cos(const Dual2& a) {
  const double c = std::cos(a.v);
  return chain(a, c, -std::sin(a.v), -c);
}
inline Dual2 exp(const Dual2& a) {
  const double e = std::exp(a.v);
  return chain(a, e, e, e);
}
inline Dual2 log(const Dual2& a) { return chain(a, std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v)); }
inline Dual2 log1p(const Dual2& a) {
  const double r = 1.0 / (1.0 + a.v);
  return chain(a, std::log1p(a.v), r, -r * r);
}
inline Dual2 sqrt(const Dual2& a) {
  const double s = std::sqrt(a.v);
  return chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}
inline Dual2 pow(const Dual2& a, double p) {
  const double f0 = std::pow(a.v, p);
  return chain(a, f0, p * std::pow(a.v, p - 1.0), p * (p - 1.0) * std::pow(a.v, p - 2.0));
}
inline Dual2 tanh(const Dual2& a) {
  const double t = std::tanh(a.v);
  return chain(a, t, 1.0 - t * t, -2.0 * t * (1.0 - t * t));
}

inline double value_of(double x) { return x; }
inline long double value_of(long double x) { return x; }
inline double value_of(const Dual2& x) { return x.v; }

}  // namespace lnn
