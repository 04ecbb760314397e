#include "support.hpp"

#include <doctest.h>

using namespace sks;
using test::random_form;
using test::random_spinor;
using test::random_vec;

namespace {

using MV = Multivector<4>;

template <int N>
double clifford_relation_residual() {
    const auto& G = gamma_rep<N>();
    double r = 0.0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            const CMat<N> ac = G.gamma[i] * G.gamma[j] + G.gamma[j] * G.gamma[i];
            const CMat<N> expect = (i == j ? -2.0 : 0.0) * CMat<N>::Identity();
            r = std::max(r, (ac - expect).norm());
        }
    return r;
}

// Sum over i<j of w_ij g_i g_j, written out over the six index pairs.
Spinor4 two_form_by_pairs(const ExtForm& w, const Spinor4& psi) {
    const auto& G = gamma_rep<4>();
    CMat4 m = CMat4::Zero();
    int k = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) m += w.c[k++] * (G.gamma[i] * G.gamma[j]);
    return m * psi;
}

double form_distance(const ExtForm& a, const ExtForm& b) {
    REQUIRE(a.degree == b.degree);
    double r = 0.0;
    for (size_t k = 0; k < a.c.size(); ++k) r = std::max(r, std::abs(a.c[k] - b.c[k]));
    return r;
}

}  // namespace

TEST_SUITE("clifford") {

TEST_CASE("generators satisfy the Clifford relation") {
    CHECK(clifford_relation_residual<2>() <= 1e-14);
    CHECK(clifford_relation_residual<3>() <= 1e-14);
    CHECK(clifford_relation_residual<4>() <= 1e-14);
    const auto& G3 = gamma_rep<3>();
    CHECK((G3.gamma[0] * G3.gamma[1] * G3.gamma[2] - CMat<3>::Identity()).norm() <= 1e-14);
}

TEST_CASE("volume element is an involution anticommuting with vectors") {
    const auto& G = gamma_rep<4>();
    CHECK((G.volume_c * G.volume_c - CMat4::Identity()).norm() <= 1e-14);
    for (int i = 0; i < 4; ++i) CHECK((G.volume_c * G.gamma[i] + G.gamma[i] * G.volume_c).norm() <= 1e-14);
    CHECK((G.p_plus + G.p_minus - CMat4::Identity()).norm() <= 1e-14);
    CHECK((G.p_plus * G.p_minus).norm() <= 1e-14);
}

TEST_CASE("vector action") {
    const Spinor4 psi = random_spinor<4>();
    const Vec4 e1 = Vec4::UnitX();
    CHECK((vector_clifford(e1, vector_clifford(e1, psi)) + psi).norm() <= 1e-14);

    const Spinor4 p = test::plus_part(psi);
    const Spinor4 q = vector_clifford(e1, p);
    CHECK(test::plus_part(q).norm() <= 1e-14);
    CHECK((test::minus_part(q) - q).norm() <= 1e-14);

    const Spinor4 phi = random_spinor<4>();
    CHECK(std::abs(herm(vector_clifford(e1, psi), phi) + herm(psi, vector_clifford(e1, phi))) <= 1e-14);
}

TEST_CASE("two-form action") {
    const Spinor4 psi = random_spinor<4>();
    const auto& G = gamma_rep<4>();
    CHECK((form_clifford(ExtForm::basis({1, 2}), psi) - G.gamma[0] * (G.gamma[1] * psi)).norm() <= 1e-14);

    for (int trial = 0; trial < 20; ++trial) {
        const Mat4 A = test::random_skew<4>();
        const Spinor4 s = random_spinor<4>();
        const ExtForm w = ExtForm::from_mv(MV::two_form(A), 2);
        Spinor4 half_sum = Spinor4::Zero();
        for (int j = 0; j < 4; ++j)
            half_sum += 0.5 * vector_clifford(Vec4::Unit(j), vector_clifford(A * Vec4::Unit(j), s));
        CHECK((half_sum - two_form_by_pairs(w, s)).norm() <= 1e-12);
        CHECK((form_clifford(w, s) - two_form_by_pairs(w, s)).norm() <= 1e-12);
        CHECK((endo_action<4>(A) * s - half_sum).norm() <= 1e-12);
    }
}

TEST_CASE("form action adjoint sign") {
    for (int p = 0; p <= 4; ++p) {
        const double sign = ((p * (p + 1) / 2) % 2 == 0) ? 1.0 : -1.0;
        for (int trial = 0; trial < 10; ++trial) {
            const ExtForm w = random_form(p);
            const Spinor4 psi = random_spinor<4>(), phi = random_spinor<4>();
            const cplx lhs = herm(form_clifford(w, psi), phi);
            const cplx rhs = sign * herm(psi, form_clifford(w, phi));
            CHECK(std::abs(lhs - rhs) <= 1e-12);
        }
    }
}

TEST_CASE("Hodge star") {
    CHECK(form_distance(hodge_star(ExtForm::basis({1, 2})), ExtForm::basis({3, 4})) <= 1e-15);
    const ExtForm w13 = ExtForm::basis({1, 3});
    CHECK(form_distance(hodge_star(hodge_star(w13)), w13) <= 1e-15);
    CHECK(form_distance(hodge_star(hodge_star(w13, -1), -1), w13) <= 1e-15);

    // X -| *w = (-1)^p *(X ^ w)
    for (int p = 0; p <= 3; ++p) {
        const ExtForm w = (p == 2) ? w13 : random_form(p);
        const Vec4 X = (p == 2) ? Vec4::Unit(1) : random_vec<4>();
        const MV lhs = interior<4>(X, hodge<4>(w.to_mv()));
        const MV rhs = (p % 2 ? -1.0 : 1.0) * hodge<4>(wedge<4>(MV::vector(X), w.to_mv()));
        CHECK((lhs - rhs).norm() <= 1e-13);
    }

    // w ^ *w' = <w, w'> vol
    for (int p = 0; p <= 4; ++p) {
        const ExtForm a = random_form(p), b = random_form(p);
        const MV v = wedge<4>(a.to_mv(), hodge<4>(b.to_mv()));
        double inner = 0.0;
        for (size_t k = 0; k < a.c.size(); ++k) inner += a.c[k] * b.c[k];
        CHECK(std::abs(v.c(15) - inner) <= 1e-13);
    }
}

TEST_CASE("self-dual and anti-self-dual split") {
    const auto [p, m] = sd_asd_split(ExtForm::basis({1, 2}));
    CHECK(form_distance(p, ExtForm(2, {0.5, 0, 0, 0, 0, 0.5})) <= 1e-15);
    CHECK(form_distance(m, ExtForm(2, {0.5, 0, 0, 0, 0, -0.5})) <= 1e-15);

    for (int trial = 0; trial < 20; ++trial) {
        const ExtForm w = random_form(2);
        const auto [wp, wm] = sd_asd_split(w);
        const Spinor4 psi = random_spinor<4>();
        CHECK(form_clifford(wp, test::minus_part(psi)).norm() <= 1e-12);
        CHECK(form_clifford(wm, test::plus_part(psi)).norm() <= 1e-12);

        ExtForm sd = w;
        const ExtForm s = hodge_star(w);
        for (size_t k = 0; k < sd.c.size(); ++k) sd.c[k] += s.c[k];
        CHECK(form_distance(sd_asd_split(sd).second, ExtForm::zero(2)) <= 1e-15);
    }
    CHECK_THROWS_AS(sd_asd_split(ExtForm::basis({1})), std::invalid_argument);
}

TEST_CASE("form action and Hodge duality on spinors") {
    const Spinor4 psi = random_spinor<4>();
    CHECK(form_action_chirality_check(ExtForm::basis({1}), psi) <= 1e-12);
    CHECK(form_action_chirality_check(ExtForm::basis({1, 2, 3, 4}), psi) <= 1e-12);
    CHECK(form_action_chirality_check(ExtForm::zero(2), psi) == 0.0);
    for (int p = 1; p <= 4; ++p)
        for (int o : {1, -1}) CHECK(form_action_chirality_check(random_form(p), random_spinor<4>(), o) <= 1e-12);
}

TEST_CASE("solve_xi") {
    const Spinor4 m = test::minus_part(random_spinor<4>());
    CHECK((solve_xi(m, vector_clifford(Vec4::UnitX(), m)) - Vec4::UnitX()).norm() <= 1e-12);
    CHECK(solve_xi(m, Spinor4::Zero()).norm() == 0.0);
    for (int trial = 0; trial < 20; ++trial) {
        Spinor4 mm = test::minus_part(random_spinor<4>());
        mm /= mm.norm();
        const Vec4 xi0 = random_vec<4>();
        CHECK((solve_xi(mm, vector_clifford(xi0, mm)) - xi0).norm() <= 1e-12);
    }
    CHECK_THROWS_AS(solve_xi(Spinor4::Zero(), m), DegenerateInput);
}

TEST_CASE("solve_J") {
    for (int trial = 0; trial < 20; ++trial) {
        Spinor4 m = test::minus_part(random_spinor<4>());
        m /= m.norm();
        const Mat4 J = solve_J(m);
        CHECK((J * J + Mat4::Identity()).norm() <= 1e-12);
        const Vec4 X = random_vec<4>(), Y = random_vec<4>();
        CHECK(std::abs((J * X).dot(J * Y) - X.dot(Y)) <= 1e-12);
        CHECK((solve_J(cplx(0.3, -1.7) * m) - J).norm() <= 1e-12);
        for (int i = 0; i < 4; ++i)
            CHECK((vector_clifford(J.col(i), m) - cplx(0, 1) * vector_clifford(Vec4::Unit(i), m)).norm() <= 1e-12);
    }
}

TEST_CASE("intertwiner recovers a unitary conjugation") {
    const auto& G = gamma_rep<4>();
    Eigen::Matrix4cd X = Eigen::Matrix4cd::Random();
    const Eigen::Matrix4cd U0 = Eigen::HouseholderQR<Eigen::Matrix4cd>(X).householderQ();
    std::vector<Eigen::Matrix4cd> from, to;
    for (int a = 0; a < 4; ++a) {
        from.push_back(U0.adjoint() * G.gamma[a] * U0);
        to.push_back(G.gamma[a]);
    }
    const auto [U, res] = intertwiner<4>(from, to);
    CHECK(res <= 1e-12);
    CHECK((U * U.adjoint() - Eigen::Matrix4cd::Identity()).norm() <= 1e-12);
    for (int a = 0; a < 4; ++a) CHECK((U * from[a] - to[a] * U).norm() <= 1e-12);
}

}  // TEST_SUITE
