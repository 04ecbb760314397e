#include "support.hpp"

#include "skewspin/probe.hpp"

#include <doctest.h>

using namespace sks;

namespace {

Spinor<2> s2_base() { return Spinor<2>(cplx(std::cos(0.4), 0.0), cplx(0.0, std::sin(0.4))); }

double max_k0(const Candidate4& c, const std::array<int, 4>& grid) {
    VerifyOptions opt;
    opt.grid = grid;
    return check_identity(c, "K0", opt).max_residual.value_or(INFINITY);
}

}  // namespace

TEST_SUITE("constructors") {

TEST_CASE("flat parallel spinor") {
    const Candidate4 c = build_flat_parallel();
    const auto r = run_suite(c, Suite::S1);
    CHECK(r.passed());
    for (const auto& id : r.identities)
        if (id.max_residual) CHECK(*id.max_residual == 0.0);

    const auto pts = sample_grid<4>(c.chart, {3, 3, 3, 3});
    const Vec4 eta0 = compute_eta(c.psi(pts.front()), 1);
    for (const auto& x : pts) CHECK((compute_eta(c.psi(x), 1) - eta0).norm() == 0.0);

    for (double eps : {1e-3, 1e-2}) {
        const double k0 = max_k0(build_flat_parallel(FlatCorruption::AddA, eps), {3, 3, 3, 3});
        CHECK(k0 >= 0.5 * eps);
        CHECK(k0 <= 2.0 * eps);
        CHECK(max_k0(build_flat_parallel(FlatCorruption::PerturbPsi, eps), {3, 3, 3, 3}) >= 0.5 * eps);
    }
}

TEST_CASE("skew Killing spinor on the round sphere of curvature 4") {
    S2Report rep;
    const Candidate<2> c = build_s2_skew_killing(s2_base(), {}, &rep);
    CHECK(rep.flatness <= 1e-8);
    CHECK(rep.k0 <= 5e-5);
    CHECK(rep.loop <= 1e-8);
    CHECK(s2_flatness(c, 7) <= 1e-8);

    S2Options fd;
    fd.mode = DerivMode::FiniteDifference;
    S2Report rep_fd;
    build_s2_skew_killing(s2_base(), fd, &rep_fd);
    CHECK(rep_fd.flatness <= 5e-4);
    CHECK(rep_fd.k0 <= 5e-5);

    S2Options big;
    big.radius = 1.0;
    CHECK_THROWS_AS(build_s2_skew_killing(s2_base(), big), ConstructionError);
    big.enforce = false;
    S2Report rep_big;
    build_s2_skew_killing(s2_base(), big, &rep_big);
    CHECK(rep_big.flatness >= 0.1);

    // |psi| is constant for a skew Killing spinor
    const auto pts = sample_grid<2>(c.chart, {5, 5});
    for (const auto& x : pts) CHECK(c.psi(x).norm() == doctest::Approx(s2_base().norm()).epsilon(1e-8));
}

TEST_CASE("flat-bundle transport is path independent") {
    const Candidate<2> c = build_s2_skew_killing(s2_base());
    const Vec<2> from = c.chart.center();
    const Vec<2> to = from + Vec<2>(0.35, -0.4);
    const std::vector<Vec<2>> p1 = axis_path<2>(from, to);
    const std::vector<Vec<2>> p2{from, Vec<2>(from(0), to(1)), to};
    const Spinor<2> a = transport_polyline<2>(c.chart, c.A, p1, s2_base(), 40);
    const Spinor<2> b = transport_polyline<2>(c.chart, c.A, p2, s2_base(), 40);
    CHECK((a - b).norm() <= 1e-8);
    CHECK((a - c.psi(to)).norm() <= 1e-6);
}

TEST_CASE("radius scan") {
    const auto rows = scan_radius(0.3, 0.8, 11);
    REQUIRE(rows.size() == 11);
    size_t imin = 0;
    for (size_t i = 1; i < rows.size(); ++i)
        if (rows[i].residual < rows[imin].residual) imin = i;
    CHECK(rows[imin].radius == doctest::Approx(0.5).epsilon(1e-12));
    for (size_t i = 1; i <= imin; ++i) CHECK(rows[i - 1].residual > rows[i].residual);
    for (size_t i = imin + 1; i < rows.size(); ++i) CHECK(rows[i].residual > rows[i - 1].residual);
    const auto far = scan_radius(1.0, 1.1, 2);
    CHECK(far[0].residual / rows[imin].residual >= 1e3);
}

TEST_CASE("product with a line") {
    const Candidate4 c = build_product_3d();
    const auto pts = sample_grid<4>(c.chart, {3, 3, 3, 3});
    for (const auto& x : pts) {
        const PointFields pf = derive_fields(c.psi(x), c.orientation());
        CHECK(std::abs(pf.f) <= 1e-8);
        REQUIRE(pf.has_xi);
        CHECK((pf.xi + Vec4::UnitX()).norm() <= 1e-8);
        CHECK(pf.flags.Mprime);
        CHECK_FALSE(pf.flags.Mdoubleprime);
        Probe<4> P(c, x);
        CHECK(P.nabla_psi(Probe<4>::origin(), 0).norm() <= 5e-5);
    }
    CHECK(max_k0(c, {3, 3, 3, 3}) <= 5e-5);
}

TEST_CASE("sphere times plane") {
    for (S2xR2Mode mode : {S2xR2Mode::Plus, S2xR2Mode::Minus}) {
        const Candidate4 c = build_s2xr2(mode, S2xR2Combo::AetaNonzero);
        for (const auto& x : sample_grid<4>(c.chart, {3, 3, 2, 2})) {
            const PointFields pf = derive_fields(c.psi(x), c.orientation());
            REQUIRE(pf.has_xi);
            const Mat4 A = c.A(x);
            const Vec4 xi_s2(pf.xi(0), pf.xi(1), 0.0, 0.0);
            CHECK((A * A * pf.xi + xi_s2).norm() <= 1e-8);
            CHECK(xi_s2.norm() >= 1e-3);
        }
        CHECK(max_k0(c, {3, 3, 3, 3}) <= 5e-5);
    }
    const Candidate4 z = build_s2xr2(S2xR2Mode::Plus, S2xR2Combo::AetaZero);
    for (const auto& x : sample_grid<4>(z.chart, {3, 3, 2, 2})) {
        const PointFields pf = derive_fields(z.psi(x), z.orientation());
        REQUIRE(pf.has_xi);
        CHECK((pf.xi + Vec4::Unit(2)).norm() <= 1e-8);
        CHECK((z.A(x) * pf.eta).norm() <= 1e-8);
    }
    CHECK(max_k0(z, {3, 3, 3, 3}) <= 5e-5);
}

TEST_CASE("Berger flows") {
    const FlowData f11 = berger_flow(1.0, 1.0);
    CHECK(f11.tau_hat_measured == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(f11.K_hat_measured == doctest::Approx(4.0).epsilon(1e-8));
    CHECK(f11.unit_residual <= 1e-10);
    const FlowData f12 = berger_flow(1.0, 2.0);
    CHECK(f12.tau_hat_measured == doctest::Approx(0.25).epsilon(1e-8));
    CHECK(f12.K_hat_measured == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(f12.tau_hat == doctest::Approx(0.25));
    CHECK(f12.K_hat == doctest::Approx(1.0));
    const FlowData fx = berger_flow(0.7, 1.3);
    CHECK(fx.tau_hat_measured == doctest::Approx(0.7 / (1.3 * 1.3)).epsilon(1e-8));
    CHECK(fx.K_hat_measured == doctest::Approx(4.0 / (1.3 * 1.3)).epsilon(1e-8));
    CHECK_THROWS_AS(berger_flow(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("doubly warped profile") {
    DwpParams p;
    const DwpProfile prof = integrate_dwp(p);
    // reference values at t = 0.1 from an adaptive high-order integrator
    const size_t i = 100;
    REQUIRE(prof.t.size() > i);
    CHECK(prof.t[i] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(prof.rho[i] == doctest::Approx(1.254310294708633e-01).epsilon(1e-8));
    CHECK(prof.sigma[i] == doctest::Approx(9.751678855623613e-01).epsilon(1e-8));
    CHECK(prof.lambda[i] == doctest::Approx(1.530745887651012e+01).epsilon(1e-8));
    CHECK(prof.mu[i] == doctest::Approx(1.362575573578857e-01).epsilon(1e-8));
    CHECK(prof.tau[i] == doctest::Approx(1.319004282518434e-01).epsilon(1e-8));
    CHECK(prof.K[i] == doctest::Approx(4.206309357685148e+00).epsilon(1e-8));

    DwpParams half = p;
    half.step = 5e-4;
    const DwpProfile ph = integrate_dwp(half);
    CHECK(std::abs(ph.rho[200] - prof.rho[i]) <= 1e-8);
    CHECK(std::abs(ph.sigma[200] - prof.sigma[i]) <= 1e-8);

    const SolResidual s = sol_residuals(prof);
    CHECK(s.sol1 <= 1e-7);
    CHECK(s.sol2 <= 1e-7);
    CHECK(s.t5a <= 1e-7);
    CHECK(s.t5b <= 1e-7);
    DwpParams coarse = p;
    coarse.step = 2e-3;
    const double ratio = sol_residuals(integrate_dwp(coarse)).sol2 / s.sol2;
    CHECK(ratio >= 12.0);
    CHECK(ratio <= 20.0);
    CHECK(rk4_order(p, 0.1) >= 3.8);

    DwpParams neg = p;
    neg.tau_hat = -1.0;
    const DwpProfile pn = integrate_dwp(neg);
    for (size_t k = 0; k < pn.t.size(); ++k) CHECK(DwpRhs{neg.K_hat, neg.tau_hat}(pn.rho[k], pn.s2[k])[1] > 0.0);

    DwpParams upper = p;
    upper.rho0 = 0.49;
    upper.t_span = -0.5;
    CHECK(integrate_dwp(upper).exit == "rho_upper");
    CHECK(prof.exit == "rho_lower");

    DwpParams bad = p;
    bad.rho0 = 0.5;
    CHECK_THROWS_AS(integrate_dwp(bad), std::invalid_argument);
    bad = p;
    bad.tau_hat = 0.0;
    CHECK_THROWS_AS(integrate_dwp(bad), std::invalid_argument);

    const ProfilePoint mid = prof.at(0.1);
    CHECK(mid.rho == doctest::Approx(prof.rho[i]).epsilon(1e-12));
    CHECK(mid.f * mid.mu == doctest::Approx(mid.tau).epsilon(1e-8));
}

TEST_CASE("doubly warped candidate") {
    const DwpProfile prof = integrate_dwp(DwpParams{});
    DwpDiagnostics diag;
    const Candidate4 c = build_dwp_candidate(prof, berger_flow(1.0, 1.0), cplx(1.0, 0.0), {}, &diag);
    CHECK(diag.dalpha <= 5e-4);
    CHECK(diag.rho_match <= 5e-5);
    for (const auto& x : sample_grid<4>(c.chart, {2, 2, 2, 2})) {
        const PointFields pf = derive_fields(c.psi(x), c.orientation());
        CHECK(pf.rho == doctest::Approx(prof.at(x(0)).rho).epsilon(5e-5));
        const Vec4 Aeta = c.A(x) * pf.eta, Jeta = pf.J * pf.eta;
        CHECK((Aeta - (Aeta.dot(Jeta) / (pf.rho * pf.rho)) * Jeta).norm() <= 5e-5);
        CHECK(c.psi(x).norm() == doctest::Approx(1.0).epsilon(5e-5));

        // A_E = -lambda rho / f and A_P = mu rho
        const ProfilePoint pp = prof.at(x(0));
        const AdaptedFrame fr = frame_5_2(c.A(x), pf.eta, pf.J);
        CHECK(fr.A_E == doctest::Approx(-pp.lambda * pp.rho / pf.f).epsilon(5e-5));
        CHECK(fr.A_P == doctest::Approx(pp.mu * pp.rho).epsilon(5e-5));
    }
    CHECK(max_k0(c, {2, 2, 2, 2}) <= 5e-4);
}

}  // TEST_SUITE
