#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <stdexcept>
#include <utility>
#include <vector>

namespace sks {

using cplx = std::complex<double>;

template <int N>
constexpr int spinor_dim = (N == 4) ? 4 : 2;

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;
template <int N>
using Mat = Eigen::Matrix<double, N, N>;
template <int N>
using Spinor = Eigen::Matrix<cplx, spinor_dim<N>, 1>;
template <int N>
using CMat = Eigen::Matrix<cplx, spinor_dim<N>, spinor_dim<N>>;

using Vec4 = Vec<4>;
using Mat4 = Mat<4>;
using Spinor4 = Spinor<4>;
using CMat4 = CMat<4>;

class DegenerateInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Clifford generators in the fixed gauge.
//   N = 2: g1 = i s1, g2 = i s2
//   N = 3: adds g3 = i s3 (g1 g2 g3 = +1)
//   N = 4: gj = [[0, i sj], [i sj, 0]], g4 = [[0, I], [-I, 0]]
// volume_c is i^{N/2} g1...gN for even N and the identity for N = 3.
template <int N>
struct GammaRep {
    std::array<CMat<N>, N> gamma;
    CMat<N> volume_c;
    CMat<N> p_plus;
    CMat<N> p_minus;
};

template <int N>
const GammaRep<N>& gamma_rep();

// Hermitian product, linear in the first slot.
template <class V>
cplx herm(const V& a, const V& b) {
    return b.dot(a);
}

template <int N>
CMat<N> vec_action(const Vec<N>& v) {
    const auto& G = gamma_rep<N>();
    CMat<N> m = CMat<N>::Zero();
    for (int i = 0; i < N; ++i) m += v(i) * G.gamma[i];
    return m;
}

// Skew endomorphism B acting as the 2-form w(X,Y) = g(BX,Y):
// B. = sum_{j<k} B(k,j) g_j g_k = 1/2 sum_j e_j . (B e_j) .
template <int N>
CMat<N> endo_action(const Mat<N>& B) {
    const auto& G = gamma_rep<N>();
    CMat<N> m = CMat<N>::Zero();
    for (int j = 0; j < N; ++j)
        for (int k = j + 1; k < N; ++k) m += B(k, j) * (G.gamma[j] * G.gamma[k]);
    return m;
}

template <int N>
CMat<N> chirality(int orientation) {
    return double(orientation) * gamma_rep<N>().volume_c;
}

template <int N>
Spinor<N> chiral_part(const Spinor<N>& psi, int sign, int orientation) {
    const CMat<N> v = chirality<N>(orientation);
    return 0.5 * (psi + double(sign) * (v * psi));
}

// Dense exterior/Clifford algebra on R^N, basis blades indexed by bitmask.
template <int N>
struct Multivector {
    static constexpr int D = 1 << N;
    Eigen::Matrix<double, D, 1> c = Eigen::Matrix<double, D, 1>::Zero();

    static Multivector scalar(double s) {
        Multivector m;
        m.c(0) = s;
        return m;
    }
    static Multivector vector(const Vec<N>& v) {
        Multivector m;
        for (int i = 0; i < N; ++i) m.c(1 << i) = v(i);
        return m;
    }
    static Multivector two_form(const Mat<N>& B) {
        Multivector m;
        for (int i = 0; i < N; ++i)
            for (int j = i + 1; j < N; ++j) m.c((1 << i) | (1 << j)) = B(j, i);
        return m;
    }
    Mat<N> to_endo() const {
        Mat<N> B = Mat<N>::Zero();
        for (int i = 0; i < N; ++i)
            for (int j = i + 1; j < N; ++j) {
                const double w = c((1 << i) | (1 << j));
                B(j, i) = w;
                B(i, j) = -w;
            }
        return B;
    }
    Vec<N> to_vector() const {
        Vec<N> v;
        for (int i = 0; i < N; ++i) v(i) = c(1 << i);
        return v;
    }
    Multivector grade(int p) const;
    double norm() const { return c.norm(); }

    Multivector operator+(const Multivector& o) const { Multivector r; r.c = c + o.c; return r; }
    Multivector operator-(const Multivector& o) const { Multivector r; r.c = c - o.c; return r; }
    Multivector operator*(double s) const { Multivector r; r.c = c * s; return r; }
    friend Multivector operator*(double s, const Multivector& m) { return m * s; }
};

int blade_grade(unsigned mask);
// Sign of e_a ^ e_b relative to e_{a|b} (0 when a, b overlap).
int wedge_sign(unsigned a, unsigned b);

template <int N>
Multivector<N> wedge(const Multivector<N>& a, const Multivector<N>& b);
template <int N>
Multivector<N> interior(const Vec<N>& x, const Multivector<N>& a);
template <int N>
Multivector<N> hodge(const Multivector<N>& a, int orientation = 1);
template <int N>
CMat<N> form_action(const Multivector<N>& a);
template <int N>
CMat<N> blade_action(unsigned mask);

// Degree-homogeneous form on oriented Euclidean R^4, coefficients in the
// order of increasing multi-indices.
struct ExtForm {
    int degree = 0;
    std::vector<double> c;

    ExtForm() = default;
    ExtForm(int p, std::vector<double> coeffs);
    static ExtForm zero(int p);
    static ExtForm basis(std::initializer_list<int> one_based);
    static ExtForm from_mv(const Multivector<4>& m, int p);
    Multivector<4> to_mv() const;
    static const std::vector<unsigned>& masks(int p);
};

Spinor4 vector_clifford(const Vec4& v, const Spinor4& psi);
Spinor4 form_clifford(const ExtForm& w, const Spinor4& psi);
ExtForm hodge_star(const ExtForm& w, int orientation = 1);
std::pair<ExtForm, ExtForm> sd_asd_split(const ExtForm& w, int orientation = 1);
double form_action_chirality_check(const ExtForm& w, const Spinor4& psi, int orientation = 1);

// xi with xi . psi_minus = psi_plus (real 8x4 least squares).
Vec4 solve_xi(const Spinor4& psi_minus, const Spinor4& psi_plus);
// J with J(e_i) . psi_minus = i e_i . psi_minus.
Mat4 solve_J(const Spinor4& psi_minus);

// Unitary U with U Gamma_a U^-1 = gamma_a for all a. Returns U and the
// relative residual of the defining equations.
template <int S>
std::pair<Eigen::Matrix<cplx, S, S>, double> intertwiner(
    const std::vector<Eigen::Matrix<cplx, S, S>>& from,
    const std::vector<Eigen::Matrix<cplx, S, S>>& to);

}  // namespace sks
