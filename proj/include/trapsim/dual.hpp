#pragma once

// Forward-mode automatic differentiation with a fixed number of seed
// directions. Nesting Dual<Dual<double, N>, N> yields second derivatives of
// whatever the scalar code computes.

#include <array>
#include <cmath>

namespace trapsim {

template <class T, int N>
struct Dual {
    T v{};
    std::array<T, N> d{};

    Dual() = default;
    Dual(double value) : v(value) {
        for (auto& x : d) x = T(0.0);
    }
    Dual(const T& value, const std::array<T, N>& deriv) : v(value), d(deriv) {}

    /// Independent variable: value x, seeded along direction `i`.
    static Dual variable(const T& x, int i) {
        Dual r;
        r.v = x;
        for (auto& e : r.d) e = T(0.0);
        r.d[i] = T(1.0);
        return r;
    }

    Dual& operator+=(const Dual& o) {
        v += o.v;
        for (int i = 0; i < N; ++i) d[i] += o.d[i];
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        for (int i = 0; i < N; ++i) d[i] -= o.d[i];
        return *this;
    }
    Dual& operator*=(const Dual& o) {
        for (int i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
        v *= o.v;
        return *this;
    }
    Dual& operator/=(const Dual& o) {
        const T inv = T(1.0) / o.v;
        v *= inv;
        for (int i = 0; i < N; ++i) d[i] = (d[i] - v * o.d[i]) * inv;
        return *this;
    }
};

template <class T, int N>
Dual<T, N> operator-(Dual<T, N> a) {
    a.v = -a.v;
    for (auto& x : a.d) x = -x;
    return a;
}
template <class T, int N>
Dual<T, N> operator+(Dual<T, N> a, const Dual<T, N>& b) { return a += b; }
template <class T, int N>
Dual<T, N> operator-(Dual<T, N> a, const Dual<T, N>& b) { return a -= b; }
template <class T, int N>
Dual<T, N> operator*(Dual<T, N> a, const Dual<T, N>& b) { return a *= b; }
template <class T, int N>
Dual<T, N> operator/(Dual<T, N> a, const Dual<T, N>& b) { return a /= b; }

template <class T, int N>
Dual<T, N> operator*(Dual<T, N> a, double s) {
    a.v = a.v * s;
    for (auto& x : a.d) x = x * s;
    return a;
}
template <class T, int N>
Dual<T, N> operator*(double s, Dual<T, N> a) { return a * s; }
template <class T, int N>
Dual<T, N> operator+(Dual<T, N> a, double s) {
    a.v = a.v + s;
    return a;
}
template <class T, int N>
Dual<T, N> operator-(Dual<T, N> a, double s) {
    a.v = a.v - s;
    return a;
}
template <class T, int N>
Dual<T, N> operator/(double s, const Dual<T, N>& a) { return Dual<T, N>(s) / a; }

template <class T, int N>
Dual<T, N> sqrt(const Dual<T, N>& a) {
    using std::sqrt;
    Dual<T, N> r;
    r.v = sqrt(a.v);
    const T half_inv = T(0.5) / r.v;
    for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * half_inv;
    return r;
}

inline double value_of(double x) { return x; }
template <class T, int N>
double value_of(const Dual<T, N>& x) { return value_of(x.v); }

}  // namespace trapsim
