#include "verifier_ctx.hpp"

#include <cmath>

namespace sks::detail {

namespace {

using Off = Ctx::Off;
using Spinor3 = Spinor<3>;
using CMat3 = CMat<3>;

constexpr int kDwpFrame = Probe<4>::kUser + 2;
constexpr int kSpinLift = Probe<4>::kUser + 3;
constexpr int kWeingarten = Probe<4>::kUser + 4;

const DwpContext& dwp_of(Ctx& c) {
    need(bool(c.cand.dwp));
    return *c.cand.dwp;
}

// Frame components of s1..s4 of the DWP construction.
const Mat4& dwp_frame(Ctx& c, const Off& q) {
    const DwpContext& d = dwp_of(c);
    return c.P.memo<Mat4>(kDwpFrame, q, [&] { return d.sframe(c.P.point(q)); });
}

// Frame components of coordinate vector fields.
Vec4 to_frame(Ctx& c, const Off& q, const Vec4& coord) { return c.P.frame(q).Einv * coord; }

Vec4 eta_coord(const DwpContext& d) { return Vec4(0.0, 0.0, 0.0, 2.0 / d.flow.r); }

// nabla_U V for coordinate components U, V(x) with coordinate derivative dV (columns d_k V).
Vec4 coord_cov(const FrameData<4>& F, const Vec4& U, const Vec4& V, const Mat4& dV) {
    Vec4 r = dV * U;
    for (int i = 0; i < 4; ++i) r += U(i) * (F.Gamma[i] * V);
    return r;
}

}  // namespace

// ------------------------------------------------------------- DWP-CONN

std::optional<double> eval_dwp_conn(Ctx& c) {
    const DwpContext& d = dwp_of(c);
    const FrameData<4>& F = c.frame();
    const Vec4& x = c.P.base_point();
    const ProfilePoint q = d.profile.at(x(0));
    const double th = x(1);
    const double rp = q.drho / q.rho, sp = q.dsigma / q.sigma;

    const Vec4 T(1, 0, 0, 0);
    const Vec4 H = eta_coord(d);
    const Vec4 X1(0, 1, 0, 0);
    const Vec4 X2(0, 0, 1, -std::cos(th));
    Mat4 dX2 = Mat4::Zero();
    dX2(3, 1) = std::sin(th);
    const Mat4 Z = Mat4::Zero();

    // Leaf quantities in (theta, phi, chi).
    const Vec<3> y = x.tail<3>();
    const FrameData<3> Fh = frame_data<3>(d.flow.chart, y);
    const Vec<3> Hh = H.tail<3>();
    auto hhat = [&](const Vec4& X) {
        Vec<3> r = Vec<3>::Zero();
        for (int i = 0; i < 3; ++i) r += X(i + 1) * (Fh.Gamma[i] * Hh);
        Vec4 out = Vec4::Zero();
        out.tail<3>() = r;
        return out;
    };
    // Q-projection of the leaf Levi-Civita derivative.
    auto nabla_hat_Q = [&](const Vec4& X, const Vec4& Y, const Mat4& dY) {
        Vec<3> r = dY.block<3, 3>(1, 1) * X.tail<3>();
        for (int i = 0; i < 3; ++i) r += X(i + 1) * (Fh.Gamma[i] * Y.tail<3>());
        r -= (Hh.dot(Fh.g * r)) * Hh;
        Vec4 out = Vec4::Zero();
        out.tail<3>() = r;
        return out;
    };
    auto g4 = [&](const Vec4& a, const Vec4& b) { return a.dot(F.g * b); };

    double res = 0.0;
    auto check = [&](const Vec4& lhs, const Vec4& rhs) {
        res = std::max(res, rel(Vec4(F.Einv * lhs), Vec4(F.Einv * rhs)));
    };
    const std::array<std::pair<Vec4, Mat4>, 2> Q{{{X1, Z}, {X2, dX2}}};

    check(coord_cov(F, T, T, Z), Vec4::Zero());
    check(coord_cov(F, T, H, Z), rp * H);
    check(coord_cov(F, H, T, Z), rp * H);
    check(coord_cov(F, H, H, Z), -q.rho * q.drho * T);
    for (const auto& [X, dX] : Q) {
        check(coord_cov(F, T, X, dX), sp * X);
        check(coord_cov(F, H, X, dX), (q.rho * q.rho / q.s2) * hhat(X));
        check(coord_cov(F, X, T, Z), sp * X);
        check(coord_cov(F, X, H, Z), (q.rho * q.rho / q.s2) * hhat(X));
        for (const auto& [Y, dY] : Q) {
            const Vec4 rhs = nabla_hat_Q(X, Y, dY) - (g4(hhat(X), Y) / q.s2) * H - sp * g4(X, Y) * T;
            check(coord_cov(F, X, Y, dY), rhs);
        }
    }
    return res;
}

// ------------------------------------------------------------- DWP-AX

namespace {

struct Weingarten {
    double lambda = 0.0, mu = 0.0;
    double eig = 0.0;      // eigen-structure residual
    double frob = 0.0;     // symmetry of W on nu-perp
    double geodesic = 0.0;
    double unit = 0.0;
};

// W = -nabla nu on nu-perp at node q, from the coordinate field nu = d_t.
const Weingarten& weingarten(Ctx& c, const Off& q) {
    return c.P.memo<Weingarten>(kWeingarten, q, [&] {
        const DwpContext& d = dwp_of(c);
        const Vec4 tc(1, 0, 0, 0);
        auto nu = [&](const Off& p) { return to_frame(c, p, tc); };
        auto eta = [&](const Off& p) { return to_frame(c, p, eta_coord(d)); };
        Mat4 N;
        for (int a = 0; a < 4; ++a) N.col(a) = c.P.cov_vec(q, a, nu);
        const Vec4 n = nu(q);
        const Vec4 e = eta(q);
        const Mat4 Pn = Mat4::Identity() - n * n.transpose();
        const Vec4 eh = e.normalized();
        const Mat4 Pq = Pn - eh * eh.transpose();
        const Mat4 W = -Pn * N * Pn;
        Weingarten w;
        w.unit = std::abs(n.squaredNorm() - 1.0);
        w.geodesic = (N * n).norm();
        w.frob = (W - W.transpose()).norm() / (1.0 + W.norm());
        w.lambda = eh.dot(W * eh);
        w.mu = 0.5 * (W * Pq).trace();
        w.eig = std::max((W * eh - w.lambda * eh).norm(), (W * Pq - w.mu * Pq).norm()) / (1.0 + W.norm());
        return w;
    });
}

}  // namespace

std::optional<double> eval_dwp_ax(Ctx& c) {
    const DwpContext& d = dwp_of(c);
    const Vec4& x = c.P.base_point();
    const ProfilePoint q = d.profile.at(x(0));
    const Weingarten& w = weingarten(c, c.O);
    double r = std::max({w.unit, w.geodesic, w.frob, w.eig});

    const Vec4 n = to_frame(c, c.O, Vec4(1, 0, 0, 0));
    auto eta = [&](const Off& p) { return to_frame(c, p, eta_coord(d)); };
    const Vec4 e = eta(c.O);
    Mat4 K;
    for (int a = 0; a < 4; ++a) K.col(a) = c.P.cov_vec(c.O, a, eta);
    r = std::max(r, (K + K.transpose()).norm() / (1.0 + K.norm()));
    r = std::max(r, std::abs(e.dot(n)) / (1.0 + e.norm()));

    // leaf derivatives of |eta|, lambda and mu
    const Mat4 Pn = Mat4::Identity() - n * n.transpose();
    for (int a = 0; a < 4; ++a) {
        const Vec4 X = Pn.col(a);
        if (X.norm() < 1e-12) continue;
        const double dl = c.deriv(X, [&](const Off& p) { return eta(p).norm(); });
        const double dlam = c.deriv(X, [&](const Off& p) { return weingarten(c, p).lambda; });
        const double dmu = c.deriv(X, [&](const Off& p) { return weingarten(c, p).mu; });
        r = std::max({r, std::abs(dl) / (1.0 + q.rho), std::abs(dlam) / (1.0 + std::abs(w.lambda)),
                      std::abs(dmu) / (1.0 + std::abs(w.mu))});
    }
    r = std::max({r, rel(w.lambda, q.lambda), rel(w.mu, q.mu), rel(e.norm(), q.rho)});
    return r;
}

// ------------------------------------------------------------- Remark 5.8

namespace {

// Block Clifford representation adapted to (s1, s2, s3, s4): s2 acts as
// [[0,-1],[1,0]] and s1, s3, s4 act off-diagonally through the leaf generators.
const std::vector<CMat4>& block_rep() {
    static const std::vector<CMat4> rep = [] {
        const auto& g = gamma_rep<3>().gamma;
        auto off = [](const CMat<3>& m) {
            CMat4 r = CMat4::Zero();
            r.block<2, 2>(0, 2) = m;
            r.block<2, 2>(2, 0) = m;
            return r;
        };
        CMat4 nu = CMat4::Zero();
        nu.block<2, 2>(0, 2) = -CMat<3>::Identity();
        nu.block<2, 2>(2, 0) = CMat<3>::Identity();
        return std::vector<CMat4>{off(g[0]), nu, off(g[1]), off(g[2])};
    }();
    return rep;
}

struct SpinLift {
    CMat4 U;
    double res = 0.0;
};

CMat4 raw_lift(Ctx& c, const Off& q, double* res) {
    const Mat4& S = dwp_frame(c, q);
    std::vector<CMat4> to(4);
    for (int i = 0; i < 4; ++i) to[i] = vec_action<4>(Vec4(S.col(i)));
    auto [U, r] = intertwiner<4>(block_rep(), to);
    if (res) *res = r;
    const cplx det = U.determinant();
    return U / std::pow(det, 0.25);
}

// Spin lift of the frame change with a phase continuous across the stencil.
const SpinLift& spin_lift(Ctx& c, const Off& q) {
    return c.P.memo<SpinLift>(kSpinLift, q, [&] {
        SpinLift L;
        L.U = raw_lift(c, q, &L.res);
        if (q == c.O) return L;
        const CMat4& U0 = spin_lift(c, c.O).U;
        Eigen::Index r0 = 0, c0 = 0;
        U0.cwiseAbs().maxCoeff(&r0, &c0);
        const cplx ref = U0(r0, c0);
        const cplx iu(0.0, 1.0);
        cplx best = 1.0;
        double score = -1e300;
        cplx ph = 1.0;
        for (int k = 0; k < 4; ++k, ph *= iu) {
            const double s = (std::conj(ref) * L.U(r0, c0) * ph).real();
            if (s > score) {
                score = s;
                best = ph;
            }
        }
        L.U *= best;
        return L;
    });
}

Spinor4 block_spinor(Ctx& c, const Off& q, int sign) {
    const Spinor4& psi = c.P.psi(q);
    const Spinor4 part = chiral_part<4>(psi, sign, c.o);
    return spin_lift(c, q).U.adjoint() * part;
}

Spinor3 leaf_part(const Spinor4& w, int sign) { return sign > 0 ? Spinor3(w.head<2>()) : Spinor3(w.tail<2>()); }

}  // namespace

LeafRestriction leaf_restriction_ctx(Ctx& c) {
    const DwpContext& d = dwp_of(c);
    const Vec4& x = c.P.base_point();
    const ProfilePoint q = d.profile.at(x(0));
    const Mat4& S = dwp_frame(c, c.O);
    const auto& g = gamma_rep<3>().gamma;

    // theta^N over (s1, s3, s4) along frame direction X.
    const std::array<int, 3> leaf{0, 2, 3};
    auto nabla_s = [&](const Vec4& X, int i) {
        Vec4 r = Vec4::Zero();
        for (int a = 0; a < 4; ++a)
            if (X(a) != 0.0) r += X(a) * c.P.cov_vec(c.O, a, [&](const Off& p) { return Vec4(dwp_frame(c, p).col(i)); });
        return r;
    };
    auto thetaN = [&](const Vec4& X) {
        Mat<3> T = Mat<3>::Zero();
        for (int j = 0; j < 3; ++j) {
            const Vec4 ns = nabla_s(X, leaf[j]);
            for (int k = 0; k < 3; ++k) T(k, j) = ns.dot(S.col(leaf[k]));
        }
        return T;
    };

    LeafRestriction L;
    L.lambda = q.lambda;
    L.mu = q.mu;
    L.tau = q.tau;
    L.f = c.F0().f;
    const double lam = L.lambda, mu = L.mu, tau = L.tau, f = L.f;
    need(std::abs(f) > c.opt.eps_den && std::abs(tau) > c.opt.eps_den);

    double off_block = 0.0;
    for (int sign : {+1, -1}) {
        const Spinor4 w4 = block_spinor(c, c.O, sign);
        const Spinor3 w = leaf_part(w4, sign);
        const Spinor3 other = leaf_part(w4, -sign);
        off_block = std::max(off_block, other.norm() / (1.0 + w.norm()));
        auto nablaN = [&](int li) {
            const Vec4 X = S.col(leaf[li]);
            const Spinor3 dw = c.deriv_any(X, [&](const Off& p) { return leaf_part(block_spinor(c, p, sign), sign); });
            return Spinor3(dw + 0.5 * (endo_action<3>(thetaN(X)) * w));
        };
        const Spinor3 n1 = nablaN(0), n3 = nablaN(1), n4 = nablaN(2);
        L.eres = std::max({L.eres, rel(n1, Spinor3(-(lam / (2 * f)) * (g[0] * w))),
                           rel(n3, Spinor3(-(mu * f / 2) * (g[1] * w))), rel(n4, Spinor3(-(mu * f / 2) * (g[2] * w)))});
        const Spinor3 t1 = n1 + 0.5 * tau * (g[1] * g[2] * w);
        // transversal derivative along Z in P: nabla^N_Z + 1/2 tau s1.J(Z).
        const Spinor3 t3 = n3 + 0.5 * tau * (g[0] * g[2] * w);
        const Spinor3 t4 = n4 - 0.5 * tau * (g[0] * g[1] * w);
        L.transversal = std::max({L.transversal, rel(t1, Spinor3((-lam / (2 * f) - tau / 2) * (g[0] * w))),
                                  rel(t3, Spinor3(Spinor3::Zero())), rel(t4, Spinor3(Spinor3::Zero()))});
    }
    L.eres = std::max(L.eres, off_block);

    const double sg = tau > 0 ? 1.0 : -1.0;
    L.a_direct = -sg / 2;
    L.b_direct = sg * (-lam / (2 * f * tau) + 0.5);
    const Chart<3> leaf_chart = d.leaf_chart(x(0));
    L.leaf_scalar = curvature<3>(leaf_chart, Vec<3>(x.tail<3>())).S;
    const double S_tilde = L.leaf_scalar / (tau * tau);
    L.a_leaf = -sg / 2;
    L.b_leaf = sg * (0.75 - S_tilde / 8);
    return L;
}

std::optional<double> eval_r58(Ctx& c) {
    const LeafRestriction L = leaf_restriction_ctx(c);
    return std::max({L.eres, L.transversal, rel(L.a_direct, L.a_leaf), rel(L.b_direct, L.b_leaf)});
}

// ------------------------------------------------------------- globals

double eval_sol(const Candidate4& cand, int& applicable, std::string& note) {
    const DwpProfile& p = cand.dwp->profile;
    const SolResidual r = sol_residuals(p);
    applicable = std::max(0, int(p.t.size()) - 4);
    note = "profile knots: " + std::to_string(p.t.size()) + ", exit: " + p.exit;
    return std::max(r.sol1, r.sol2);
}

double eval_scale(const Candidate4& cand, int& applicable, std::string& note) {
    const FlowData& own = cand.dwp->flow;
    const FlowData base = berger_flow(1.0, 1.0);
    std::vector<std::pair<double, double>> rs{{1.0, 1.0}, {1.0, 2.0}, {0.7, 1.3}, {own.r, own.s}};
    double r = 0.0;
    for (const auto& [a, b] : rs) {
        const FlowData fl = berger_flow(a, b);
        r = std::max({r, rel(fl.tau_hat_measured, a / (b * b) * base.tau_hat_measured),
                      rel(fl.K_hat_measured, base.K_hat_measured / (b * b)), fl.tau_spread, fl.unit_residual});
    }
    applicable = int(rs.size());
    note = "Berger seeds (1,1), (1,2), (0.7,1.3) and the candidate's (r,s)";
    return r;
}

}  // namespace sks::detail
