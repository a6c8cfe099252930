#pragma once

#include <cmath>
#include <type_traits>

namespace rotostate {

// Forward-mode scalar carrying one directional derivative. Nests: DualT<DualT<double>>.
template <class S>
struct DualT {
  S v{};
  S d{};
  DualT() = default;
  DualT(double value) : v(value) {}
  DualT(const S& value, const S& deriv) : v(value), d(deriv) {}
  template <class U = S, class = std::enable_if_t<!std::is_same_v<U, double>>>
  DualT(const U& value) : v(value) {}

  DualT& operator+=(const DualT& o) { v += o.v; d += o.d; return *this; }
  DualT& operator-=(const DualT& o) { v -= o.v; d -= o.d; return *this; }
  DualT& operator*=(const DualT& o) { d = d * o.v + v * o.d; v *= o.v; return *this; }
  DualT& operator/=(const DualT& o) { d = (d * o.v - v * o.d) / (o.v * o.v); v /= o.v; return *this; }
};

using Dual = DualT<double>;

template <class S> DualT<S> operator+(DualT<S> a, const DualT<S>& b) { return a += b; }
template <class S> DualT<S> operator-(DualT<S> a, const DualT<S>& b) { return a -= b; }
template <class S> DualT<S> operator*(DualT<S> a, const DualT<S>& b) { return a *= b; }
template <class S> DualT<S> operator/(DualT<S> a, const DualT<S>& b) { return a /= b; }
template <class S> DualT<S> operator+(DualT<S> a, double b) { a.v += b; return a; }
template <class S> DualT<S> operator+(double b, DualT<S> a) { a.v += b; return a; }
template <class S> DualT<S> operator-(DualT<S> a, double b) { a.v -= b; return a; }
template <class S> DualT<S> operator-(double b, const DualT<S>& a) { return DualT<S>(b - a.v, -a.d); }
template <class S> DualT<S> operator-(const DualT<S>& a) { return DualT<S>(-a.v, -a.d); }
template <class S> DualT<S> operator*(DualT<S> a, double b) { a.v *= b; a.d *= b; return a; }
template <class S> DualT<S> operator*(double b, DualT<S> a) { a.v *= b; a.d *= b; return a; }
template <class S> DualT<S> operator/(DualT<S> a, double b) { a.v /= b; a.d /= b; return a; }
template <class S> DualT<S> operator/(double b, const DualT<S>& a) { return DualT<S>(b / a.v, -b * a.d / (a.v * a.v)); }

template <class S>
DualT<S> log(const DualT<S>& a) { using std::log; return DualT<S>(log(a.v), a.d / a.v); }
template <class S>
DualT<S> log1p(const DualT<S>& a) { using std::log1p; return DualT<S>(log1p(a.v), a.d / (1.0 + a.v)); }
template <class S>
DualT<S> exp(const DualT<S>& a) { using std::exp; S e = exp(a.v); return DualT<S>(e, e * a.d); }
template <class S>
DualT<S> expm1(const DualT<S>& a) { using std::exp; using std::expm1; return DualT<S>(expm1(a.v), exp(a.v) * a.d); }
template <class S>
DualT<S> sqrt(const DualT<S>& a) { using std::sqrt; S r = sqrt(a.v); return DualT<S>(r, 0.5 * a.d / r); }
template <class S>
DualT<S> asinh(const DualT<S>& a) { using std::asinh; using std::sqrt; return DualT<S>(asinh(a.v), a.d / sqrt(1.0 + a.v * a.v)); }
template <class S>
DualT<S> sinh(const DualT<S>& a) { using std::cosh; using std::sinh; return DualT<S>(sinh(a.v), cosh(a.v) * a.d); }
template <class S>
DualT<S> cosh(const DualT<S>& a) { using std::cosh; using std::sinh; return DualT<S>(cosh(a.v), sinh(a.v) * a.d); }

inline double value_of(double x) { return x; }
template <class S>
double value_of(const DualT<S>& x) { return value_of(x.v); }

}  // namespace rotostate
