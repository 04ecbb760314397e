#pragma once

#include "skewspin/verifier.hpp"

#include <random>

namespace sks::test {

inline std::mt19937_64& rng() {
    static std::mt19937_64 g(20261016);
    return g;
}

inline double uniform(double a = -1.0, double b = 1.0) {
    return std::uniform_real_distribution<double>(a, b)(rng());
}

template <int N>
Vec<N> random_vec() {
    Vec<N> v;
    for (int i = 0; i < N; ++i) v(i) = uniform();
    return v;
}

template <int N>
Mat<N> random_skew() {
    Mat<N> m;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) m(i, j) = uniform();
    return m - m.transpose();
}

template <int N>
Spinor<N> random_spinor() {
    Spinor<N> s;
    for (int i = 0; i < s.size(); ++i) s(i) = cplx(uniform(), uniform());
    return s;
}

inline ExtForm random_form(int p) {
    ExtForm w = ExtForm::zero(p);
    for (double& c : w.c) c = uniform();
    return w;
}

inline Spinor4 plus_part(const Spinor4& s) { return chiral_part<4>(s, +1, 1); }
inline Spinor4 minus_part(const Spinor4& s) { return chiral_part<4>(s, -1, 1); }

// Unit spinor with psi+ = xi . psi- for the given xi.
inline Spinor4 spinor_from_xi(const Vec4& xi, const Spinor4& seed) {
    const Spinor4 m = minus_part(seed);
    const Spinor4 s = m + vector_clifford(xi, m);
    return s / s.norm();
}

}  // namespace sks::test
