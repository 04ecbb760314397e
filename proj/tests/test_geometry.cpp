#include "support.hpp"

#include "skewspin/probe.hpp"

#include <doctest.h>

#include <algorithm>

using namespace sks;

namespace {

Chart<4> flat_chart() {
    Chart<4> c;
    c.name = "flat";
    c.metric = [](const Vec4&) { return Mat4::Identity().eval(); };
    return c;
}

// Generic non-product metric I + v v^T.
Chart<4> bumpy_chart(double h = 1e-3) {
    Chart<4> c;
    c.name = "bumpy";
    c.lo = Vec4::Constant(-0.8);
    c.hi = Vec4::Constant(0.8);
    c.h = h;
    c.metric = [](const Vec4& x) {
        const Vec4 v(std::sin(x(0)), 0.5 * std::cos(x(1)), x(2) * x(3), 0.4 * x(0) * x(1));
        return (Mat4::Identity() + v * v.transpose()).eval();
    };
    return c;
}

Chart<3> round_s3(DerivMode mode) {
    Chart<3> c = berger_flow(1.0, 1.0, DerivMode::Analytic).chart;
    c.mode = mode;
    return c;
}

std::array<double, 4> sorted_eigenvalues(const Mat4& m) {
    const Eigen::SelfAdjointEigenSolver<Mat4> es(0.5 * (m + m.transpose()));
    const Vec4 e = es.eigenvalues();
    return {e(0), e(1), e(2), e(3)};
}

Candidate4 field_candidate(const Chart<4>& chart) {
    Candidate4 c;
    c.chart = chart;
    c.A = [](const Vec4&) { return Mat4::Zero().eval(); };
    c.psi = [](const Vec4& x) {
        Spinor4 s;
        s << cplx(std::cos(x(0)), 0.3 * x(1)), cplx(x(2) * x(3), 1.0), cplx(0.5, std::sin(x(1) + x(3))),
            cplx(x(0) * x(2), -0.2);
        return s;
    };
    return c;
}

Vec4 vector_field(const Vec4& x) { return Vec4(x(1), std::cos(x(0)), 1.0 + x(2) * x(3), -x(0)); }

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("frames") {
    const auto F = frame_data<4>(flat_chart(), Vec4::Zero());
    CHECK((F.E - Mat4::Identity()).norm() <= 1e-15);

    Chart<4> warped = flat_chart();
    warped.metric = [](const Vec4&) { return Vec4(1.0, 0.09, 4.0, 4.0).asDiagonal().toDenseMatrix(); };
    const auto W = frame_data<4>(warped, Vec4::Zero());
    CHECK((W.E - Vec4(1.0, 1.0 / 0.3, 0.5, 0.5).asDiagonal().toDenseMatrix()).norm() <= 1e-14);

    const auto S = sphere_chart(0.5, 0.6, DerivMode::Analytic, 1e-3);
    for (const auto& x : sample_grid<2>(S, {5, 5})) {
        const auto Fs = frame_data<2>(S, x);
        CHECK((Fs.E.transpose() * Fs.g * Fs.E - Mat<2>::Identity()).norm() <= 1e-10);
    }
    const auto B = bumpy_chart();
    for (const auto& x : sample_grid<4>(B, {3, 3, 3, 3})) {
        const auto Fb = frame_data<4>(B, x);
        CHECK((Fb.E.transpose() * Fb.g * Fb.E - Mat4::Identity()).norm() <= 1e-12);
        for (int a = 0; a < 4; ++a) CHECK((Fb.Theta[a] + Fb.Theta[a].transpose()).norm() <= 1e-10);
    }
}

TEST_CASE("Christoffel symbols") {
    for (const auto& G : christoffels<4>(flat_chart(), Vec4(0.1, 0.2, 0.3, 0.4))) CHECK(G.norm() == 0.0);

    const double th = 1.2;
    for (DerivMode mode : {DerivMode::Analytic, DerivMode::FiniteDifference}) {
        const auto S = sphere_chart(0.5, 0.6, mode, 1e-4);
        const auto G = christoffels<2>(S, Vec<2>(th, 0.1));
        CHECK(G[1](0, 1) == doctest::Approx(-std::sin(th) * std::cos(th)).epsilon(1e-7));
        CHECK(G[0](1, 1) == doctest::Approx(1.0 / std::tan(th)).epsilon(1e-7));
        CHECK(G[1](1, 0) == doctest::Approx(1.0 / std::tan(th)).epsilon(1e-7));
    }

    // finite differences converge to the analytic jet at second order
    const Vec<2> x(1.1, 0.0);
    const auto exact = christoffels<2>(sphere_chart(0.5, 0.6, DerivMode::Analytic, 0.0), x);
    double err[2];
    for (int k = 0; k < 2; ++k) {
        const auto fd = christoffels<2>(sphere_chart(0.5, 0.6, DerivMode::FiniteDifference, k ? 0.01 : 0.02), x);
        err[k] = 0.0;
        for (int i = 0; i < 2; ++i) err[k] = std::max(err[k], (fd[i] - exact[i]).norm());
    }
    CHECK(err[0] / err[1] == doctest::Approx(4.0).epsilon(0.05));

    // symmetric in the lower indices
    const auto Gb = christoffels<4>(bumpy_chart(), Vec4(0.1, -0.2, 0.3, 0.2));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 4; ++k) CHECK(std::abs(Gb[i](k, j) - Gb[j](k, i)) <= 1e-12);
}

TEST_CASE("curvature of model spaces") {
    const auto Cf = curvature<4>(flat_chart(), Vec4::Zero());
    CHECK(Cf.Ric.norm() == 0.0);
    CHECK(Cf.S == 0.0);

    for (DerivMode mode : {DerivMode::Analytic, DerivMode::FiniteDifference}) {
        const auto C3 = curvature<3>(round_s3(mode), round_s3(mode).center());
        CHECK(C3.S == doctest::Approx(6.0).epsilon(mode == DerivMode::Analytic ? 1e-10 : 1e-5));
        CHECK(C3.sectional(Vec<3>::UnitX(), Vec<3>::UnitY()) == doctest::Approx(1.0).epsilon(1e-5));
    }

    const auto s2r2 = build_s2xr2(S2xR2Mode::Plus, S2xR2Combo::AetaNonzero).chart;
    for (const auto& x : sample_grid<4>(s2r2, {3, 3, 3, 3})) {
        const auto C = curvature<4>(s2r2, x);
        CHECK(C.S == doctest::Approx(8.0).epsilon(1e-10));
        const auto ev = sorted_eigenvalues(C.Ric);
        CHECK(std::abs(ev[0]) <= 1e-10);
        CHECK(std::abs(ev[1]) <= 1e-10);
        CHECK(ev[2] == doctest::Approx(4.0).epsilon(1e-10));
        CHECK(ev[3] == doctest::Approx(4.0).epsilon(1e-10));
    }
}

TEST_CASE("curvature symmetries on a generic metric") {
    const auto B = bumpy_chart();
    const auto C = curvature<4>(B, Vec4(0.2, -0.1, 0.3, 0.25));
    double bianchi = 0.0, pair = 0.0, skew = 0.0;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            skew = std::max(skew, (C.R[a][b] + C.R[b][a]).norm());
            skew = std::max(skew, (C.R[a][b] + C.R[a][b].transpose()).norm());
            for (int c = 0; c < 4; ++c) {
                const Vec4 cyc = C.R[a][b].col(c) + C.R[b][c].col(a) + C.R[c][a].col(b);
                bianchi = std::max(bianchi, cyc.norm());
                for (int d = 0; d < 4; ++d) pair = std::max(pair, std::abs(C.R[a][b](d, c) - C.R[c][d](b, a)));
            }
        }
    CHECK(bianchi <= 5e-5);
    CHECK(pair <= 5e-5);
    CHECK(skew <= 5e-5);
    CHECK((C.Ric - C.Ric.transpose()).norm() <= 5e-5);
}

TEST_CASE("spinor covariant derivative") {
    Candidate4 flat = field_candidate(flat_chart());
    flat.psi = [](const Vec4&) { return Spinor4(cplx(1, 0), cplx(0, 1), cplx(0.5, 0), cplx(0, 0)); };
    Probe<4> pf(flat, Vec4(0.1, 0.2, -0.1, 0.0));
    for (int a = 0; a < 4; ++a) CHECK(pf.nabla_psi(Probe<4>::origin(), a).norm() <= 1e-12);

    const Candidate4 c = field_candidate(bumpy_chart());
    auto phi = [&](const Vec4& x) { return Spinor4(c.psi(x).reverse()); };
    Probe<4> P(c, Vec4(0.15, -0.2, 0.3, 0.1));
    const auto O = Probe<4>::origin();
    using Off = Probe<4>::Off;
    auto Yf = [&](const Off& o) { return (P.frame(o).Einv * vector_field(P.point(o))).eval(); };
    for (int a = 0; a < 4; ++a) {
        // Leibniz
        const Spinor4 lhs = P.cov_spinor(O, a, [&](const Off& o) { return vector_clifford(Yf(o), P.psi(o)); });
        const Spinor4 rhs = vector_clifford(P.cov_vec(O, a, Yf), P.psi(O)) + vector_clifford(Yf(O), P.nabla_psi(O, a));
        CHECK((lhs - rhs).norm() <= 5e-5);
        // metricity
        auto phio = [&](const Off& o) { return phi(P.point(o)); };
        const cplx d = P.D(O, a, [&](const Off& o) { return herm(P.psi(o), phio(o)); });
        const cplx m = herm(P.nabla_psi(O, a), phio(O)) + herm(P.psi(O), P.cov_spinor(O, a, phio));
        CHECK(std::abs(d - m) <= 5e-5);
    }
}

TEST_CASE("spinor curvature and the spinorial Ricci identity") {
    const Candidate4 c = field_candidate(bumpy_chart(2e-3));
    Probe<4> P(c, Vec4(0.1, 0.2, -0.15, 0.05));
    const auto O = Probe<4>::origin();
    using Off = Probe<4>::Off;
    const auto& F = P.frame(O);
    const auto C = P.curvature(O);
    std::array<std::array<Spinor4, 4>, 4> Rpsi;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            const Spinor4 ab = P.cov_spinor(O, a, [&](const Off& o) { return P.nabla_psi(o, b); });
            const Spinor4 ba = P.cov_spinor(O, b, [&](const Off& o) { return P.nabla_psi(o, a); });
            Spinor4 bracket = Spinor4::Zero();
            for (int k = 0; k < 4; ++k)
                bracket += (F.Theta[a](k, b) - F.Theta[b](k, a)) * P.nabla_psi(O, k);
            Rpsi[a][b] = ab - ba - bracket;
            const Spinor4 closed = 0.5 * (endo_action<4>(C.R[a][b]) * P.psi(O));
            CHECK((Rpsi[a][b] - closed).norm() <= 5e-4);
        }
    for (int a = 0; a < 4; ++a) {
        CHECK((Rpsi[a][(a + 1) % 4] + Rpsi[(a + 1) % 4][a]).norm() <= 1e-10);
        Spinor4 lhs = Spinor4::Zero();
        for (int j = 0; j < 4; ++j) lhs += vector_clifford(Vec4::Unit(j), Rpsi[a][j]);
        const Spinor4 rhs = -0.5 * vector_clifford(C.Ric.col(a), P.psi(O));
        CHECK((lhs - rhs).norm() <= 5e-4);
    }

    Candidate4 flat = field_candidate(flat_chart());
    Probe<4> Q(flat, Vec4::Zero());
    for (int a = 0; a < 4; ++a) CHECK(Q.curvature(O).R[a][(a + 1) % 4].norm() == 0.0);
}

TEST_CASE("tensor derivatives") {
    Candidate4 flat = field_candidate(flat_chart());
    const Mat4 B0 = test::random_skew<4>();
    flat.A = [B0](const Vec4&) { return B0; };
    Probe<4> pf(flat, Vec4::Zero());
    for (int a = 0; a < 4; ++a) CHECK(pf.nabla_A(Probe<4>::origin(), a).norm() <= 1e-12);

    // exterior derivative of a 2-form: antisymmetrized covariant derivative in the
    // frame against the coordinate formula
    auto beta = [](const Vec4& x) {
        Mat4 b = Mat4::Zero();
        b(0, 1) = std::sin(x(2));
        b(0, 3) = x(1) * x(2);
        b(1, 2) = std::cos(x(0) + x(3));
        b(2, 3) = x(0) * x(0);
        return (b - b.transpose()).eval();
    };
    auto dbeta = [](const Vec4& x, int i, int j, int k) {
        // analytic partials of the components above
        auto comp = [&](int m, int n, int l) -> double {
            Mat4 d = Mat4::Zero();
            switch (l) {
                case 0: d(1, 2) = -std::sin(x(0) + x(3)); d(2, 3) = 2 * x(0); break;
                case 1: d(0, 3) = x(2); break;
                case 2: d(0, 1) = std::cos(x(2)); d(0, 3) = x(1); break;
                case 3: d(1, 2) = -std::sin(x(0) + x(3)); break;
            }
            return d(m, n) - d(n, m);
        };
        return comp(j, k, i) + comp(k, i, j) + comp(i, j, k);
    };
    Candidate4 c = field_candidate(bumpy_chart());
    c.A = [&](const Vec4& x) {
        const auto F = frame_data<4>(bumpy_chart(), x);
        return (F.E.transpose() * beta(x) * F.E).eval();
    };
    const Vec4 x0(0.1, 0.3, -0.2, 0.15);
    Probe<4> P(c, x0);
    const auto O = Probe<4>::origin();
    std::array<Mat4, 4> nab;
    for (int a = 0; a < 4; ++a) nab[a] = P.nabla_A(O, a);
    const Mat4& E = P.frame(O).E;
    double worst = 0.0;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int d = 0; d < 4; ++d) {
                const double cov = nab[a](b, d) + nab[b](d, a) + nab[d](a, b);
                double coord = 0.0;
                for (int i = 0; i < 4; ++i)
                    for (int j = 0; j < 4; ++j)
                        for (int k = 0; k < 4; ++k) coord += E(i, a) * E(j, b) * E(k, d) * dbeta(x0, i, j, k);
                worst = std::max(worst, std::abs(cov - coord));
            }
    CHECK(worst <= 5e-5);
}

TEST_CASE("transport and sampling") {
    const auto S = sphere_chart(0.5, 0.6, DerivMode::Analytic, 1e-3);
    const auto pts = sample_grid<2>(S, {3, 4});
    CHECK(pts.size() == 12);
    for (const auto& x : pts) CHECK(S.inside(x, 2 * S.h - 1e-12));
    CHECK_THROWS_AS(sample_grid<2>(S, {0, 3}), std::invalid_argument);

    const auto path = axis_path<4>(Vec4::Zero(), Vec4(1, 0, 2, 0));
    CHECK(path.size() == 3);

    Chart<4> bad = flat_chart();
    bad.metric = [](const Vec4&) { return (-Mat4::Identity()).eval(); };
    CHECK_THROWS_AS(frame_data<4>(bad, Vec4::Zero()), DomainError);
}

}  // TEST_SUITE
