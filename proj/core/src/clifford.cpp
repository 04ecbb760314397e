#include "skewspin/clifford.hpp"

#include <bit>
#include <cmath>

namespace sks {

namespace {

using C2 = Eigen::Matrix2cd;

C2 pauli(int k) {
    const cplx I(0, 1);
    C2 s;
    switch (k) {
        case 1: s << 0, 1, 1, 0; break;
        case 2: s << 0, -I, I, 0; break;
        default: s << 1, 0, 0, -1; break;
    }
    return s;
}

template <int N>
GammaRep<N> make_rep() {
    const cplx I(0, 1);
    GammaRep<N> r;
    if constexpr (N == 4) {
        for (int j = 0; j < 3; ++j) {
            CMat4 g = CMat4::Zero();
            g.template block<2, 2>(0, 2) = I * pauli(j + 1);
            g.template block<2, 2>(2, 0) = I * pauli(j + 1);
            r.gamma[j] = g;
        }
        CMat4 g4 = CMat4::Zero();
        g4.block<2, 2>(0, 2) = C2::Identity();
        g4.block<2, 2>(2, 0) = -C2::Identity();
        r.gamma[3] = g4;
        r.volume_c = -(r.gamma[0] * r.gamma[1] * r.gamma[2] * r.gamma[3]);
    } else {
        for (int j = 0; j < N; ++j) r.gamma[j] = I * pauli(j + 1);
        if constexpr (N == 2)
            r.volume_c = I * r.gamma[0] * r.gamma[1];
        else
            r.volume_c = CMat<N>::Identity();
    }
    const CMat<N> id = CMat<N>::Identity();
    r.p_plus = 0.5 * (id + r.volume_c);
    r.p_minus = 0.5 * (id - r.volume_c);
    return r;
}

}  // namespace

template <int N>
const GammaRep<N>& gamma_rep() {
    static const GammaRep<N> rep = make_rep<N>();
    return rep;
}

template const GammaRep<2>& gamma_rep<2>();
template const GammaRep<3>& gamma_rep<3>();
template const GammaRep<4>& gamma_rep<4>();

int blade_grade(unsigned mask) { return std::popcount(mask); }

int wedge_sign(unsigned a, unsigned b) {
    if (a & b) return 0;
    // count pairs (i in a, j in b) with i > j
    int swaps = 0;
    for (unsigned bb = b; bb; bb &= bb - 1) {
        const int j = std::countr_zero(bb);
        swaps += std::popcount(a >> (j + 1));
    }
    return (swaps & 1) ? -1 : 1;
}

template <int N>
Multivector<N> Multivector<N>::grade(int p) const {
    Multivector r;
    for (int m = 0; m < D; ++m)
        if (blade_grade(unsigned(m)) == p) r.c(m) = c(m);
    return r;
}

template <int N>
Multivector<N> wedge(const Multivector<N>& a, const Multivector<N>& b) {
    Multivector<N> r;
    constexpr int D = Multivector<N>::D;
    for (int i = 0; i < D; ++i) {
        if (a.c(i) == 0.0) continue;
        for (int j = 0; j < D; ++j) {
            if (b.c(j) == 0.0) continue;
            const int s = wedge_sign(unsigned(i), unsigned(j));
            if (s) r.c(i | j) += s * a.c(i) * b.c(j);
        }
    }
    return r;
}

template <int N>
Multivector<N> interior(const Vec<N>& x, const Multivector<N>& a) {
    Multivector<N> r;
    constexpr int D = Multivector<N>::D;
    for (int m = 0; m < D; ++m) {
        if (a.c(m) == 0.0) continue;
        for (int i = 0; i < N; ++i) {
            if (!(m & (1 << i)) || x(i) == 0.0) continue;
            const int before = std::popcount(unsigned(m) & ((1u << i) - 1));
            r.c(m & ~(1 << i)) += ((before & 1) ? -1.0 : 1.0) * x(i) * a.c(m);
        }
    }
    return r;
}

template <int N>
Multivector<N> hodge(const Multivector<N>& a, int orientation) {
    Multivector<N> r;
    constexpr int D = Multivector<N>::D;
    const unsigned full = D - 1;
    for (int m = 0; m < D; ++m) {
        if (a.c(m) == 0.0) continue;
        const unsigned comp = full & ~unsigned(m);
        r.c(comp) += orientation * wedge_sign(unsigned(m), comp) * a.c(m);
    }
    return r;
}

template <int N>
CMat<N> blade_action(unsigned mask) {
    const auto& G = gamma_rep<N>();
    CMat<N> m = CMat<N>::Identity();
    for (int i = 0; i < N; ++i)
        if (mask & (1u << i)) m = m * G.gamma[i];
    return m;
}

template <int N>
CMat<N> form_action(const Multivector<N>& a) {
    CMat<N> m = CMat<N>::Zero();
    constexpr int D = Multivector<N>::D;
    for (int k = 0; k < D; ++k)
        if (a.c(k) != 0.0) m += a.c(k) * blade_action<N>(unsigned(k));
    return m;
}

#define SKS_INSTANTIATE_MV(N)                                                           \
    template struct Multivector<N>;                                                     \
    template Multivector<N> wedge<N>(const Multivector<N>&, const Multivector<N>&);     \
    template Multivector<N> interior<N>(const Vec<N>&, const Multivector<N>&);          \
    template Multivector<N> hodge<N>(const Multivector<N>&, int);                       \
    template CMat<N> blade_action<N>(unsigned);                                         \
    template CMat<N> form_action<N>(const Multivector<N>&);

SKS_INSTANTIATE_MV(2)
SKS_INSTANTIATE_MV(3)
SKS_INSTANTIATE_MV(4)
#undef SKS_INSTANTIATE_MV

// ---------------------------------------------------------------- ExtForm

const std::vector<unsigned>& ExtForm::masks(int p) {
    static const std::array<std::vector<unsigned>, 5> table = [] {
        std::array<std::vector<unsigned>, 5> t;
        // lexicographic order of increasing index tuples
        std::vector<std::vector<int>> tuples[5];
        tuples[0].push_back({});
        for (int d = 1; d <= 4; ++d)
            for (const auto& tup : tuples[d - 1])
                for (int i = tup.empty() ? 0 : tup.back() + 1; i < 4; ++i) {
                    auto n = tup;
                    n.push_back(i);
                    tuples[d].push_back(n);
                }
        for (int d = 0; d <= 4; ++d)
            for (const auto& tup : tuples[d]) {
                unsigned m = 0;
                for (int i : tup) m |= 1u << i;
                t[d].push_back(m);
            }
        return t;
    }();
    if (p < 0 || p > 4) throw std::invalid_argument("form degree must be in 0..4");
    return table[p];
}

ExtForm::ExtForm(int p, std::vector<double> coeffs) : degree(p), c(std::move(coeffs)) {
    if (c.size() != masks(p).size())
        throw std::invalid_argument("coefficient count does not match C(4, degree)");
}

ExtForm ExtForm::zero(int p) { return ExtForm(p, std::vector<double>(masks(p).size(), 0.0)); }

ExtForm ExtForm::basis(std::initializer_list<int> one_based) {
    unsigned m = 0;
    for (int i : one_based) m |= 1u << (i - 1);
    const int p = int(one_based.size());
    ExtForm w = zero(p);
    const auto& ms = masks(p);
    for (size_t k = 0; k < ms.size(); ++k)
        if (ms[k] == m) w.c[k] = 1.0;
    return w;
}

ExtForm ExtForm::from_mv(const Multivector<4>& m, int p) {
    ExtForm w = zero(p);
    const auto& ms = masks(p);
    for (size_t k = 0; k < ms.size(); ++k) w.c[k] = m.c(ms[k]);
    return w;
}

Multivector<4> ExtForm::to_mv() const {
    Multivector<4> m;
    const auto& ms = masks(degree);
    for (size_t k = 0; k < ms.size(); ++k) m.c(ms[k]) = c[k];
    return m;
}

Spinor4 vector_clifford(const Vec4& v, const Spinor4& psi) { return vec_action<4>(v) * psi; }

Spinor4 form_clifford(const ExtForm& w, const Spinor4& psi) {
    return form_action<4>(w.to_mv()) * psi;
}

ExtForm hodge_star(const ExtForm& w, int orientation) {
    return ExtForm::from_mv(hodge<4>(w.to_mv(), orientation), 4 - w.degree);
}

std::pair<ExtForm, ExtForm> sd_asd_split(const ExtForm& w, int orientation) {
    if (w.degree != 2) throw std::invalid_argument("sd_asd_split requires a 2-form");
    const ExtForm s = hodge_star(w, orientation);
    ExtForm plus = ExtForm::zero(2), minus = ExtForm::zero(2);
    for (size_t k = 0; k < w.c.size(); ++k) {
        plus.c[k] = 0.5 * (w.c[k] + s.c[k]);
        minus.c[k] = 0.5 * (w.c[k] - s.c[k]);
    }
    return {plus, minus};
}

double form_action_chirality_check(const ExtForm& w, const Spinor4& psi, int orientation) {
    const Spinor4 bar = chirality<4>(orientation) * psi;
    const double s = (w.degree <= 2) ? 1.0 : -1.0;
    const Spinor4 lhs = form_clifford(w, psi);
    const Spinor4 rhs = s * form_clifford(hodge_star(w, orientation), bar);
    return (lhs - rhs).norm();
}

namespace {

// Real 8x4 matrix of X -> X . phi.
Eigen::Matrix<double, 8, 4> clifford_columns(const Spinor4& phi) {
    Eigen::Matrix<double, 8, 4> m;
    const auto& G = gamma_rep<4>();
    for (int i = 0; i < 4; ++i) {
        const Spinor4 c = G.gamma[i] * phi;
        m.col(i).head<4>() = c.real();
        m.col(i).tail<4>() = c.imag();
    }
    return m;
}

Eigen::Matrix<double, 8, 1> realify(const Spinor4& s) {
    Eigen::Matrix<double, 8, 1> r;
    r.head<4>() = s.real();
    r.tail<4>() = s.imag();
    return r;
}

void require_nonzero(const Spinor4& phi) {
    if (phi.norm() < 1e-12) throw DegenerateInput("negative half spinor vanishes");
}

}  // namespace

Vec4 solve_xi(const Spinor4& psi_minus, const Spinor4& psi_plus) {
    require_nonzero(psi_minus);
    const auto m = clifford_columns(psi_minus);
    // columns are orthogonal with equal norm |psi_minus|
    return (m.transpose() * realify(psi_plus)) / psi_minus.squaredNorm();
}

Mat4 solve_J(const Spinor4& psi_minus) {
    require_nonzero(psi_minus);
    const auto m = clifford_columns(psi_minus);
    const auto& G = gamma_rep<4>();
    const cplx I(0, 1);
    Mat4 J;
    for (int i = 0; i < 4; ++i)
        J.col(i) = (m.transpose() * realify(I * (G.gamma[i] * psi_minus))) / psi_minus.squaredNorm();
    return J;
}

template <int S>
std::pair<Eigen::Matrix<cplx, S, S>, double> intertwiner(
    const std::vector<Eigen::Matrix<cplx, S, S>>& from,
    const std::vector<Eigen::Matrix<cplx, S, S>>& to) {
    using M = Eigen::Matrix<cplx, S, S>;
    const int n = int(from.size());
    Eigen::MatrixXcd sys(n * S * S, S * S);
    sys.setZero();
    // (U Gamma - gamma U), vec column-major: vec(U G) = (G^T kron I) vec U
    for (int a = 0; a < n; ++a) {
        for (int col = 0; col < S; ++col)
            for (int row = 0; row < S; ++row) {
                const int eq = a * S * S + col * S + row;
                for (int k = 0; k < S; ++k) {
                    sys(eq, k * S + row) += from[a](k, col);
                    sys(eq, col * S + k) -= to[a](row, k);
                }
            }
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(sys, Eigen::ComputeFullV);
    const Eigen::VectorXcd v = svd.matrixV().col(S * S - 1);
    M U;
    for (int col = 0; col < S; ++col)
        for (int row = 0; row < S; ++row) U(row, col) = v(col * S + row);
    const double scale = std::sqrt((U.adjoint() * U).trace().real() / S);
    U /= scale;
    double res = 0.0;
    for (int a = 0; a < n; ++a) res = std::max(res, (U * from[a] - to[a] * U).norm());
    return {U, res};
}

template std::pair<Eigen::Matrix<cplx, 4, 4>, double> intertwiner<4>(
    const std::vector<Eigen::Matrix<cplx, 4, 4>>&, const std::vector<Eigen::Matrix<cplx, 4, 4>>&);
template std::pair<Eigen::Matrix<cplx, 2, 2>, double> intertwiner<2>(
    const std::vector<Eigen::Matrix<cplx, 2, 2>>&, const std::vector<Eigen::Matrix<cplx, 2, 2>>&);

}  // namespace sks
