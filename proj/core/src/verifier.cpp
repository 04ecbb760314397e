#include "verifier_ctx.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace sks {

using detail::Ctx;
using detail::need;
using detail::rel;
using detail::SkipPoint;
using MV = Multivector<4>;

std::string suite_name(Suite s) {
    switch (s) {
        case Suite::S1: return "S1";
        case Suite::S2: return "S2";
        case Suite::S3: return "S3";
        case Suite::S4: return "S4";
    }
    return "?";
}

Suite parse_suite(const std::string& s) {
    if (s == "S1") return Suite::S1;
    if (s == "S2") return Suite::S2;
    if (s == "S3") return Suite::S3;
    if (s == "S4") return Suite::S4;
    throw std::invalid_argument("unknown suite '" + s + "'");
}

double Tolerances::of(TolClass c) const {
    switch (c) {
        case TolClass::Fd: return fd;
        case TolClass::Curv: return curv;
        case TolClass::Alg: return alg;
        case TolClass::Ode: return ode;
    }
    return curv;
}

bool ResidualReport::passed() const {
    return std::all_of(identities.begin(), identities.end(), [](const IdentityResult& r) { return r.pass; });
}

const IdentityResult* ResidualReport::find(const std::string& id) const {
    for (const auto& r : identities)
        if (r.id == id) return &r;
    return nullptr;
}

// ------------------------------------------------------------- context

namespace detail {

Ctx::Ctx(const Candidate4& c, const Vec4& x, const VerifyOptions& options)
    : P(c, x), opt(options), cand(c), o(c.chart.orientation) {}

const PointFields& Ctx::fields(const Off& q) {
    return P.memo<PointFields>(Probe<4>::kUser, q, [&] { return derive_fields(P.psi(q), o, opt.eps_region); });
}

const Mat4& Ctx::nablaA(int a) {
    if (!nA_[a]) nA_[a] = P.nabla_A(O, a);
    return *nA_[a];
}

Mat4 Ctx::nablaA_along(const Vec4& X) {
    Mat4 m = Mat4::Zero();
    for (int a = 0; a < 4; ++a)
        if (X(a) != 0.0) m += X(a) * nablaA(a);
    return m;
}

Vec4 Ctx::C(const Vec4& X, const Vec4& Y) { return nablaA_along(X) * Y - nablaA_along(Y) * X; }

const MV& Ctx::dA() {
    if (!dA_) {
        MV d;
        for (int j = 0; j < 4; ++j) d = d + wedge<4>(MV::vector(Vec4::Unit(j)), MV::two_form(nablaA(j)));
        dA_ = d;
    }
    return *dA_;
}

const Vec4& Ctx::deltaA() {
    if (!deltaA_) {
        Vec4 v = Vec4::Zero();
        for (int j = 0; j < 4; ++j) v += nablaA(j).row(j).transpose();
        deltaA_ = v;
    }
    return *deltaA_;
}

int Ctx::rank() {
    if (!rank_) {
        Eigen::JacobiSVD<Mat4> svd(A0());
        const auto s = svd.singularValues();
        int r = 0;
        if (s(0) > 0)
            for (int i = 0; i < 4; ++i)
                if (s(i) >= 1e-8 * s(0)) ++r;
        rank_ = r;
    }
    return *rank_;
}

bool Ctx::in_S2() { return rank() <= 2 && F0().flags.Mdoubleprime; }

bool Ctx::in_S3() {
    const auto& F = F0();
    return F.flags.Mdoubleprime && F.has_xi && rank() == 4;
}

const AdaptedFrame& Ctx::sframe(const Off& q) {
    if (seed_ == -2) {
        const auto& F = F0();
        need(F.has_xi && F.rho > opt.eps_den);
        seed_ = frame_5_2(A0(), F.eta, F.J, -1).seed_index;
    }
    return P.memo<AdaptedFrame>(Probe<4>::kUser + 1, q, [&] {
        const auto& F = fields(q);
        need(F.has_xi && F.rho > opt.eps_den);
        return frame_5_2(P.A(q), F.eta, F.J, seed_);
    });
}

Vec4 Ctx::nabla_s(int c, int i) {
    return P.cov_vec(O, c, [&](const Off& q) { return Vec4(sframe(q).S.col(i)); });
}

Vec4 Ctx::nabla_s_along(const Vec4& X, int i) {
    Vec4 r = Vec4::Zero();
    for (int c = 0; c < 4; ++c)
        if (X(c) != 0.0) r += X(c) * nabla_s(c, i);
    return r;
}

double Ctx::theta(int i, int j, const Vec4& X) { return nabla_s_along(X, i).dot(S0().S.col(j)); }

const Ctx::Measured& Ctx::measured() {
    if (!measured_) {
        const Mat4& S = S0().S;
        const Vec4 s1 = S.col(0), s2 = S.col(1), s3 = S.col(2), s4 = S.col(3);
        const auto& F = F0();
        Measured m;
        m.lambda = theta(0, 1, s1);
        m.mu = -theta(1, 2, s3);
        Vec4 dEta = Vec4::Zero();
        for (int c = 0; c < 4; ++c)
            dEta += s3(c) * P.cov_vec(O, c, [&](const Off& q) { return fields(q).eta; });
        m.tau = dEta.dot(s4) / F.rho;
        m.K_P = curv().sectional(s3, s4);
        const Vec4 n33 = nabla_s_along(s3, 2), n44 = nabla_s_along(s4, 3), n34 = nabla_s_along(s3, 3);
        const double a33 = n33.dot(s2), a44 = n44.dot(s2), a34 = n34.dot(s2);
        const double v34 = n34.dot(s1);
        m.K = m.K_P + a33 * a44 - a34 * a34 + 3.0 * v34 * v34;
        measured_ = m;
    }
    return *measured_;
}

}  // namespace detail

// ------------------------------------------------------------- evaluators

namespace {

using Eval = std::function<std::optional<double>(Ctx&)>;

MV asd(const MV& w, int o) { return 0.5 * (w - hodge<4>(w, o)); }
MV sd(const MV& w, int o) { return 0.5 * (w + hodge<4>(w, o)); }

Vec4 e(int a) { return Vec4::Unit(a); }

// ---- S1

std::optional<double> k0(Ctx& c) {
    double r = 0.0;
    const Spinor4& psi = c.psi0();
    for (int a = 0; a < 4; ++a)
        r = std::max(r, rel(c.P.nabla_psi(c.O, a), Spinor4(vec_action<4>(Vec4(c.A0().col(a))) * psi)));
    return r;
}

std::optional<double> p21_1(Ctx& c) {
    const Spinor4& psi = c.psi0();
    const Mat4& A = c.A0();
    double r = 0.0;
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b) {
            const Spinor4 lhs = 0.5 * (endo_action<4>(c.curv().R[a][b]) * psi);
            const Spinor4 rhs = vec_action<4>(c.C(a, b)) * psi +
                                2.0 * (endo_action<4>(wedge_endo(A.col(b), A.col(a))) * psi);
            r = std::max(r, rel(lhs, rhs));
        }
    return r;
}

std::optional<double> p21_2(Ctx& c) {
    const Spinor4& psi = c.psi0();
    const Mat4& A = c.A0();
    const MV Amv = MV::two_form(A);
    double r = 0.0;
    for (int a = 0; a < 4; ++a) {
        const Spinor4 lhs = -0.5 * (vec_action<4>(Vec4(c.curv().Ric.col(a))) * psi);
        const MV w = MV::two_form(c.nablaA(a)) + interior<4>(e(a), c.dA()) + MV::scalar(c.deltaA()(a)) +
                     4.0 * wedge<4>(Amv, MV::vector(A.col(a))) + MV::vector(2.0 * A * A.col(a));
        r = std::max(r, rel(lhs, Spinor4(form_action<4>(w) * psi)));
    }
    return r;
}

std::optional<double> p21_3(Ctx& c) {
    const Spinor4& psi = c.psi0();
    const MV Amv = MV::two_form(c.A0());
    const MV w = 4.0 * (2.0 * c.dA() + MV::vector(c.deltaA()) + 4.0 * wedge<4>(Amv, Amv) + MV::scalar(c.absA2()));
    return rel(Spinor4(c.curv().S * psi), Spinor4(form_action<4>(w) * psi));
}

auto eta_of(Ctx& c) {
    return [&c](const Ctx::Off& q) { return c.fields(q).eta; };
}
auto f_of(Ctx& c) {
    return [&c](const Ctx::Off& q) { return c.fields(q).f; };
}

std::optional<double> l31_1(Ctx& c) {
    Vec4 df;
    for (int a = 0; a < 4; ++a) df(a) = c.P.D(c.O, a, f_of(c));
    return rel(df, Vec4(4.0 * c.A0() * c.F0().eta));
}

std::optional<double> l31_2(Ctx& c) {
    double r = 0.0;
    const double f = c.F0().f;
    for (int a = 0; a < 4; ++a)
        r = std::max(r, rel(c.P.cov_vec(c.O, a, eta_of(c)), Vec4(f * c.A0().col(a))));
    return r;
}

Mat4 nabla_eta(Ctx& c) {
    Mat4 N;
    for (int a = 0; a < 4; ++a) N.col(a) = c.P.cov_vec(c.O, a, eta_of(c));
    return N;
}

std::optional<double> l31_3(Ctx& c) {
    const Mat4 N = nabla_eta(c);
    const double r1 = rel(Mat4(N - N.transpose()), Mat4(2.0 * c.F0().f * c.A0()));
    const double r2 = std::abs(N.trace()) / (1.0 + N.norm());
    return std::max(r1, r2);
}

std::optional<double> l31_4(Ctx& c) {
    const MV lhs = c.F0().f * c.dA();
    const MV rhs = -4.0 * wedge<4>(MV::vector(c.A0() * c.F0().eta), MV::two_form(c.A0()));
    return rel(lhs, rhs);
}

// ---- S2

std::optional<double> d0(Ctx& c) { return c.dA().norm() / (1.0 + c.nablaA(0).norm() + c.nablaA(1).norm() + c.nablaA(2).norm() + c.nablaA(3).norm()); }

const Vec4& xi_of(Ctx& c) {
    need(c.F0().has_xi);
    return c.F0().xi;
}

std::optional<double> e1(Ctx& c) {
    const Vec4& xi = xi_of(c);
    const Mat4& A = c.A0();
    double r = 0.0;
    for (int a = 0; a < 4; ++a) {
        const Vec4 lhs = 0.5 * c.curv().Ric.col(a) + 2.0 * A * A.col(a);
        const Vec4 star = hodge<4>(wedge<4>(MV::vector(xi), MV::two_form(c.nablaA(a))), c.o).to_vector();
        const Vec4 rhs = -(star + c.nablaA(a) * xi + c.deltaA()(a) * xi);
        r = std::max(r, rel(lhs, rhs));
    }
    return r;
}

std::optional<double> e2(Ctx& c) {
    const Vec4& xi = xi_of(c);
    const Mat4& A = c.A0();
    double r = 0.0;
    for (int a = 0; a < 4; ++a) {
        const Vec4 v = 0.5 * c.curv().Ric.col(a) + 2.0 * A * A.col(a);
        const MV w1 = wedge<4>(MV::vector(v), MV::vector(xi));
        const MV w2 = MV::two_form(c.nablaA(a));
        r = std::max(r, asd(w1 + w2, c.o).norm() / (1.0 + w1.norm() + w2.norm()));
    }
    return r;
}

std::optional<double> e3(Ctx& c) {
    const Vec4& xi = xi_of(c);
    const Mat4& A = c.A0();
    return rel(Vec4(0.5 * c.curv().Ric * xi + 2.0 * A * A * xi), c.deltaA());
}

std::optional<double> e4(Ctx& c) {
    const Vec4& xi = xi_of(c);
    return rel(c.deltaA(), Vec4(-(c.absA2() - 0.25 * c.curv().S) * xi));
}

std::optional<double> e5(Ctx& c) {
    const Vec4& xi = xi_of(c);
    const MV w = wedge<4>(MV::vector(xi), MV::vector(c.deltaA()));
    return asd(w, c.o).norm() / (1.0 + w.norm());
}

std::optional<double> e6(Ctx& c) {
    const Vec4& xi = xi_of(c);
    return rel(c.deltaA().dot(xi), c.absA2() - 0.25 * c.curv().S);
}

std::optional<double> p44a(Ctx& c) { return rel(c.deltaA(), Vec4(Vec4::Zero())); }

std::optional<double> p44b(Ctx& c) { return rel(c.curv().S, 4.0 * c.absA2()); }

std::optional<double> p44c(Ctx& c) {
    const Vec4& eta = c.F0().eta;
    const Mat4& A = c.A0();
    return rel(Vec4(c.curv().Ric * eta), Vec4(-4.0 * A * A * eta));
}

std::optional<double> p44d(Ctx& c) {
    const Mat4 m = c.nablaA_along(c.F0().eta);
    return m.norm() / (1.0 + c.F0().eta.norm() * (c.nablaA(0).norm() + c.nablaA(1).norm() + c.nablaA(2).norm() + c.nablaA(3).norm()));
}

std::optional<double> p44e(Ctx& c) {
    const Vec4& eta = c.F0().eta;
    const double f = c.F0().f;
    const Mat4& A = c.A0();
    double r = 0.0;
    for (int a = 0; a < 4; ++a)
        r = std::max(r, rel(Vec4(c.nablaA(a) * eta), Vec4(-f * (0.25 * c.curv().Ric.col(a) + A * A.col(a)))));
    return r;
}

std::optional<double> p44f(Ctx& c) {
    const double f = c.F0().f;
    double r = 0.0;
    for (int a = 0; a < 4; ++a) {
        const Vec4 lhs = c.P.cov_vec(c.O, a, [&](const Ctx::Off& q) { return Vec4(c.P.A(q) * c.fields(q).eta); });
        r = std::max(r, rel(lhs, Vec4(-0.25 * f * c.curv().Ric.col(a))));
    }
    return r;
}

std::optional<double> p44g(Ctx& c) {
    const Vec4& eta = c.F0().eta;
    const Mat4& A = c.A0();
    double r = 0.0;
    for (int a = 0; a < 4; ++a) {
        const Mat4 star = hodge<4>(MV::two_form(c.nablaA(a)), c.o).to_endo();
        r = std::max(r, rel(Vec4(star * eta), Vec4(0.25 * c.curv().Ric.col(a) + A * A.col(a))));
    }
    return r;
}

std::optional<double> ea2(Ctx& c) {
    const Vec4& eta = c.F0().eta;
    const Mat4& A = c.A0();
    const Vec4 Ae = A * eta;
    need(Ae.norm() > c.opt.eps_den);
    return rel(A, Mat4(wedge_endo(Ae, Vec4(A * Ae)) / Ae.squaredNorm()));
}

std::optional<double> ea3(Ctx& c) {
    const Vec4& eta = c.F0().eta;
    const Mat4& A = c.A0();
    return rel(Vec4(A * A * A * eta), Vec4(-(c.curv().S / 8.0) * A * eta));
}

std::optional<double> hess(Ctx& c) {
    auto grad = [&](const Ctx::Off& q) {
        Vec4 g;
        for (int b = 0; b < 4; ++b) g(b) = c.P.D(q, b, f_of(c));
        return g;
    };
    Mat4 H;
    for (int a = 0; a < 4; ++a) H.col(a) = c.P.cov_vec(c.O, a, grad);
    return rel(H, Mat4(-c.F0().f * c.curv().Ric));
}

Vec4 dS(Ctx& c) {
    Vec4 d;
    for (int a = 0; a < 4; ++a) d(a) = c.P.D(c.O, a, [&](const Ctx::Off& q) { return c.P.curvature(q).S; });
    return d;
}

std::optional<double> l46(Ctx& c) {
    const Vec4& eta = c.F0().eta;
    const double f = c.F0().f, S = c.curv().S;
    const Mat4& A = c.A0();
    const Mat4& Ric = c.curv().Ric;
    const Vec4 d = dS(c);
    const Vec4 Ae = A * eta;
    const Vec4 sAe = hodge<4>(MV::two_form(A), c.o).to_endo() * eta;
    const double r1 = rel(Vec4(Ric * Ae), Vec4(0.5 * S * Ae + f / 16.0 * d));
    const double r2 = rel(Vec4(Ric * sAe), Vec4(d / 16.0));
    const double r3 = rel(Ae.dot(d), f * sAe.dot(d));
    return std::max({r1, r2, r3});
}

std::optional<double> l48(Ctx& c) {
    const Vec4& eta = c.F0().eta;
    const double f = c.F0().f;
    const Mat4& A = c.A0();
    const Vec4 Ae = A * eta;
    Vec4 lhs = Vec4::Zero();
    for (int a = 0; a < 4; ++a)
        lhs += Ae(a) * c.P.cov_vec(c.O, a, [&](const Ctx::Off& q) {
            const Mat4& Aq = c.P.A(q);
            return Vec4(Aq * Aq * c.fields(q).eta);
        });
    const Vec4 rhs = -0.25 * f * c.curv().Ric * (A * Ae) - (f * f / 32.0) * A * dS(c);
    return rel(lhs, rhs);
}

std::optional<double> l49(Ctx& c) {
    const Vec4& eta = c.F0().eta;
    const double f = c.F0().f, S = c.curv().S;
    const Mat4& A = c.A0();
    const Mat4& Ric = c.curv().Ric;
    const Vec4 Ae = A * eta, A2e = A * Ae;
    need(Ae.norm() > c.opt.eps_den && A2e.norm() > c.opt.eps_den && std::abs(f * S) > c.opt.eps_den);
    const double lhs = Ae.dot(Ric * Ae) / Ae.squaredNorm() + A2e.dot(Ric * A2e) / A2e.squaredNorm();
    const double rhs = S - 2.0 / (f * S) * Ae.dot(dS(c));
    return rel(lhs, rhs);
}

std::optional<double> l410(Ctx& c) {
    const Mat4& A = c.A0();
    return rel(c.curv().Ric, Mat4(-4.0 * A * A));
}

std::optional<double> l410ds(Ctx& c) { return dS(c).norm() / (1.0 + std::abs(c.curv().S)); }

std::optional<double> p412(Ctx& c) {
    const auto& F = c.F0();
    if (!(F.has_xi && F.flags.M1 && c.rank() <= 2)) return std::nullopt;
    const Mat4& A = c.A0();
    if ((A * F.xi).norm() > 1e-6 * (1.0 + A.norm() * F.xi.norm())) return std::nullopt;
    const double x2 = F.xi.squaredNorm();
    need(x2 > c.opt.eps_den);
    const Spinor4& psi = c.psi0();
    double r = 0.0;
    for (int a = 0; a < 4; ++a) {
        const MV w1 = wedge<4>(MV::vector(A.col(a)), MV::vector(F.xi / x2));
        const MV w2 = wedge<4>(MV::vector(A.col(a)), MV::vector(F.xi));
        const MV B = sd(w1, c.o) - asd(w2, c.o);
        r = std::max(r, rel(c.P.nabla_psi(c.O, a), Spinor4(-(form_action<4>(B) * psi))));
    }
    return r;
}

// ---- S3

struct S3Data {
    const PointFields& F;
    const Mat4& A;
    Vec4 Jeta;
    const AdaptedFrame& fr;
    Vec4 CP;
};

S3Data s3(Ctx& c) {
    const auto& F = c.F0();
    need(F.f > c.opt.eps_den && F.rho > c.opt.eps_den);
    const auto& fr = c.S0();
    return {F, c.A0(), F.J * F.eta, fr, c.C(Vec4(fr.S.col(2)), Vec4(fr.S.col(3)))};
}

Mat4 nablaJ(Ctx& c, int b) {
    return c.P.cov_end(c.O, b, [&](const Ctx::Off& q) {
        need(c.fields(q).has_xi);
        return c.fields(q).J;
    });
}

std::optional<double> p52_nj(Ctx& c) {
    const S3Data d = s3(c);
    const double f = d.F.f;
    need(std::abs(f - 1.0) > c.opt.eps_den);
    double r = 0.0;
    for (int b = 0; b < 4; ++b) {
        const Vec4 AY = d.A.col(b);
        const Mat4 rhs = 4.0 / (f - 1.0) * (wedge_endo(d.Jeta, AY) + wedge_endo(d.F.eta, Vec4(d.F.J * AY)));
        r = std::max(r, rel(nablaJ(c, b), rhs));
    }
    return r;
}

std::optional<double> p52_nxi(Ctx& c) {
    s3(c);
    return l31_2(c);
}

std::optional<double> p52_cx(Ctx& c) {
    const S3Data d = s3(c);
    Vec4 lhs;
    for (int a = 0; a < 4; ++a) lhs(a) = c.C(d.F.eta, e(a)).dot(d.Jeta);
    return rel(lhs, Vec4(d.F.rho * d.F.rho * d.F.f * d.CP));
}

std::optional<double> p52_star(Ctx& c) {
    const S3Data d = s3(c);
    double r = 0.0;
    for (int i = 2; i < 4; ++i) {
        const Vec4 Z = d.fr.S.col(i);
        Mat4 m;
        m << d.CP, Z, d.F.eta, d.Jeta;
        r = std::max(r, rel(c.C(d.Jeta, Z).dot(d.Jeta), c.o * m.determinant()));
    }
    return r;
}

std::optional<double> p52_s(Ctx& c) {
    const S3Data d = s3(c);
    const double KP = c.curv().sectional(d.fr.S.col(2), d.fr.S.col(3));
    const double rhs = -d.CP.dot(d.Jeta) / (d.F.rho * d.F.rho) + 4.0 * d.fr.A_P * d.fr.A_P;
    return rel(KP, rhs);
}

std::optional<double> l53a(Ctx& c) {
    const S3Data d = s3(c);
    double r = 0.0;
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b) {
            const Vec4 C = c.C(a, b);
            r = std::max(r, std::abs(C.dot(d.F.eta)) / (1.0 + C.norm() * d.F.rho));
        }
    return r;
}

std::optional<double> l53b(Ctx& c) {
    const S3Data d = s3(c);
    double r = 0.0;
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b) {
            const Vec4 lhs = c.curv().R[a][b] * d.F.eta;
            const Vec4 rhs = d.F.f * c.C(a, b) - 4.0 * wedge_endo(d.A.col(a), d.A.col(b)) * d.F.eta;
            r = std::max(r, rel(lhs, rhs));
        }
    return r;
}

std::optional<double> l53c(Ctx& c) {
    const S3Data d = s3(c);
    const double f = d.F.f;
    need(std::abs(f - 1.0) > c.opt.eps_den);
    double r = 0.0;
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b) {
            const Vec4 C = c.C(a, b);
            const Vec4 lhs = c.curv().R[a][b] * d.Jeta;
            const Vec4 rhs = -d.F.J * C + 4.0 / (f - 1.0) * C.dot(d.Jeta) * d.F.eta -
                             4.0 * wedge_endo(d.A.col(a), d.A.col(b)) * d.Jeta;
            r = std::max(r, rel(lhs, rhs));
        }
    return r;
}

std::optional<double> rb(Ctx& c) {
    const S3Data d = s3(c);
    const double rho2 = d.F.rho * d.F.rho;
    double r = 0.0;
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b) {
            const Vec4 C = c.C(a, b);
            const Mat4 star = hodge<4>(wedge<4>(MV::vector(C), MV::vector(d.F.eta)), c.o).to_endo();
            const Mat4 B = (star - d.F.f * wedge_endo(C, d.F.eta)) / rho2 - 4.0 * wedge_endo(d.A.col(a), d.A.col(b));
            r = std::max(r, rel(c.curv().R[a][b], B));
        }
    return r;
}

std::optional<double> r51(Ctx& c) {
    const S3Data d = s3(c);
    const Mat4& J = d.F.J;
    if ((d.A * J - J * d.A).norm() > 1e-6 * (1.0 + d.A.norm())) return std::nullopt;
    std::array<Mat4, 4> nJ;
    double scale = 0.0;
    for (int b = 0; b < 4; ++b) {
        nJ[b] = nablaJ(c, b);
        scale += nJ[b].norm();
    }
    auto nJ_along = [&](const Vec4& X) {
        Mat4 m = Mat4::Zero();
        for (int b = 0; b < 4; ++b) m += X(b) * nJ[b];
        return m;
    };
    double nij = 0.0;
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b) {
            const Vec4 X = e(a), Y = e(b);
            const Vec4 N = nJ_along(J * X) * Y - nJ_along(J * Y) * X - J * (nJ_along(X) * Y) + J * (nJ_along(Y) * X);
            nij = std::max(nij, N.norm() / (1.0 + 2.0 * scale));
        }
    MV dOmega;
    for (int j = 0; j < 4; ++j) dOmega = dOmega + wedge<4>(MV::vector(e(j)), MV::two_form(nJ[j]));
    const MV rhs = -4.0 * wedge<4>(MV::two_form(d.A), MV::vector(J * d.F.xi));
    return std::max(nij, rel(dOmega, rhs));
}

std::optional<double> l54(Ctx& c) {
    const S3Data d = s3(c);
    const Vec4 Ae = d.A * d.F.eta;
    const double u = Ae.dot(d.Jeta) / (d.F.rho * d.F.rho);
    if ((Ae - u * d.Jeta).norm() > 1e-6 * (1.0 + Ae.norm())) return std::nullopt;
    const Mat4& J = d.F.J;
    return std::max(rel(Vec4(d.A * Ae), Vec4(-u * u * d.F.eta)), rel(Mat4(d.A * J), Mat4(J * d.A)));
}

std::optional<double> t55a(Ctx& c) {
    const S3Data d = s3(c);
    const auto& m = c.measured();
    return rel(d.F.f * m.mu, m.tau);
}

std::optional<double> t55b(Ctx& c) {
    s3(c);
    const auto& m = c.measured();
    return rel(m.K, 2.0 * m.mu * m.lambda + 2.0 * m.tau * m.tau);
}

std::optional<double> conn(Ctx& c) {
    const S3Data d = s3(c);
    const Mat4& S = d.fr.S;
    const double f = d.F.f, ir = 1.0 / d.F.rho, AE = d.fr.A_E, AP = d.fr.A_P;
    auto th = [&](int i, int j) {
        Vec4 v;
        for (int a = 0; a < 4; ++a) v(a) = c.nabla_s(a, i).dot(S.col(j));
        return v;
    };
    double r = 0.0;
    r = std::max(r, rel(th(0, 1), Vec4(-f * ir * AE * S.col(0))));
    r = std::max(r, rel(th(0, 2), Vec4(f * ir * AP * S.col(3))));
    r = std::max(r, rel(th(0, 3), Vec4(-f * ir * AP * S.col(2))));
    r = std::max(r, rel(th(1, 2), Vec4(-ir * AP * S.col(2))));
    r = std::max(r, rel(th(1, 3), Vec4(-ir * AP * S.col(3))));
    return r;
}

std::optional<double> dgl(Ctx& c) {
    const S3Data d = s3(c);
    const Mat4& S = d.fr.S;
    const double f = d.F.f, rho = d.F.rho, AE = d.fr.A_E, AP = d.fr.A_P;
    auto AEq = [&](const Ctx::Off& q) { return c.sframe(q).A_E; };
    auto APq = [&](const Ctx::Off& q) { return c.sframe(q).A_P; };
    const double s2AE = c.deriv(S.col(1), AEq);
    double r = rel(s2AE, 2.0 * f / rho * AP * AP + 2.0 * f * f / rho * AE * AP);
    for (int i = 2; i < 4; ++i) {
        r = std::max(r, std::abs(c.deriv(S.col(i), APq)) / (1.0 + std::abs(AP) / rho));
        r = std::max(r, std::abs(c.deriv(S.col(i), AEq)) / (1.0 + std::abs(AE) / rho));
    }
    const double KP = c.curv().sectional(S.col(2), S.col(3));
    r = std::max(r, rel(KP, -2.0 * f / (rho * rho) * AE * AP - 2.0 * (1.0 / (rho * rho) - 2.0) * AP * AP));
    return r;
}

std::optional<double> l56(Ctx& c) {
    const S3Data d = s3(c);
    const auto& m = c.measured();
    const double f = d.F.f, rho = d.F.rho, AP = d.fr.A_P;
    return rel(m.K, m.K_P + (1.0 + 3.0 * f * f) / (rho * rho) * AP * AP);
}

// ------------------------------------------------------------- catalog

struct Entry {
    IdentityInfo info;
    Eval eval;
};

std::optional<double> gate_s2(Ctx& c, const Eval& f) {
    if (!c.in_S2()) return std::nullopt;
    return f(c);
}

std::optional<double> gate_s3(Ctx& c, const Eval& f) {
    if (!c.in_S3()) return std::nullopt;
    return f(c);
}

std::optional<double> gate_s4(Ctx& c, const Eval& f) {
    if (!c.cand.dwp) return std::nullopt;
    return f(c);
}

const std::vector<Entry>& catalog() {
    static const std::vector<Entry> entries = [] {
        std::vector<Entry> v;
        auto add = [&](std::string id, Suite s, std::string anchor, std::string statement, TolClass t, Eval f,
                       bool analytic_only = false) {
            Eval g = f;
            if (s == Suite::S2) g = [f](Ctx& c) { return gate_s2(c, f); };
            if (s == Suite::S3) g = [f](Ctx& c) { return gate_s3(c, f); };
            if (s == Suite::S4) g = [f](Ctx& c) { return gate_s4(c, f); };
            v.push_back({{std::move(id), s, std::move(anchor), std::move(statement), t, analytic_only, false}, g});
        };
        auto add_global = [&](std::string id, Suite s, std::string anchor, std::string statement, TolClass t) {
            v.push_back({{std::move(id), s, std::move(anchor), std::move(statement), t, false, true}, nullptr});
        };
        const auto S1 = Suite::S1, S2 = Suite::S2, S3 = Suite::S3, S4 = Suite::S4;
        const auto Fd = TolClass::Fd, Cv = TolClass::Curv, Al = TolClass::Alg;

        add("K0", S1, "(eq:sks) \"nabla_X psi = AX.psi\"", "nabla_X psi - AX.psi = 0", Fd, k0);
        add("P2.1-1", S1, "Prop. 2.1(1) \"2AY^AX\"", "R_{X,Y}psi = ((nabla_X A)Y - (nabla_Y A)X + 2AY^AX).psi", Cv, p21_1);
        add("P2.1-2", S1, "Prop. 2.1(2) \"4A^AX+2A^2X\"",
            "-1/2 Ric(X).psi = (nabla_X A + X-| dA + (delta A)(X) + 4A^AX + 2A^2X).psi", Cv, p21_2);
        add("P2.1-3", S1, "Prop. 2.1(3) \"4(2dA+deltaA+4A^A+|A|^2)\"", "S psi = 4(2dA + delta A + 4A^A + |A|^2).psi",
            Cv, p21_3);
        add("L3.1-1", S1, "Lemma 3.1(1) \"df = 4A eta\"", "df = 4A eta", Fd, l31_1);
        add("L3.1-2", S1, "Lemma 3.1(2) \"nabla_X eta = fAX\"", "nabla_X eta = f AX", Fd, l31_2);
        add("L3.1-3", S1, "Lemma 3.1(3) \"d eta = 2fA, delta eta = 0\"", "d eta = 2fA and delta eta = 0", Fd, l31_3);
        add("L3.1-4", S1, "Lemma 3.1(4) \"f dA = -4A eta ^ A\"", "f dA = -4 A eta ^ A", Fd, l31_4);

        add("D0", S2, "Section 4 \"dA = 0 on M''\"", "dA = 0", Fd, d0);
        add("L4.2-1", S2, "Lemma 4.2 (e:1)", "1/2 Ric(X) + 2A^2X + *(xi^nabla_X A) + xi-|nabla_X A + (delta A)(X) xi = 0",
            Cv, e1);
        add("L4.2-2", S2, "Lemma 4.2 (e:2)", "(1/2 Ric(X)^xi + 2A^2X^xi + nabla_X A)_- = 0", Cv, e2);
        add("L4.2-3", S2, "Lemma 4.2 (e:3)", "1/2 Ric(xi) + 2A^2 xi - delta A = 0", Cv, e3);
        add("L4.2-4", S2, "Lemma 4.2 (e:4)", "delta A + (|A|^2 - S/4) xi = 0", Cv, e4);
        add("L4.2-5", S2, "Lemma 4.2 (e:5)", "(xi ^ delta A)_- = 0", Cv, e5);
        add("L4.2-6", S2, "Lemma 4.2 (e:6)", "-(delta A)(xi) + |A|^2 - S/4 = 0", Cv, e6);
        add("P4.4-a", S2, "Prop. 4.4 \"delta A = 0\"", "delta A = 0", Fd, p44a);
        add("P4.4-b", S2, "Prop. 4.4 \"S = 4|A|^2\"", "S = 4|A|^2", Cv, p44b);
        add("P4.4-c", S2, "Prop. 4.4 \"Ric(eta) = -4A^2 eta\"", "Ric(eta) = -4A^2 eta", Cv, p44c);
        add("P4.4-d", S2, "Prop. 4.4 \"nabla_eta A = 0\"", "nabla_eta A = 0", Fd, p44d);
        add("P4.4-e", S2, "Prop. 4.4 \"(nabla_X A)(eta)\"", "(nabla_X A)(eta) = -f(1/4 Ric(X) + A^2X)", Cv, p44e);
        add("P4.4-f", S2, "Prop. 4.4 \"nabla_X(A eta)\"", "nabla_X(A eta) = -(f/4) Ric(X)", Cv, p44f);
        add("P4.4-g", S2, "Prop. 4.4 \"eta-|nabla_X(*A)\"", "eta-| nabla_X(*A) = 1/4 Ric(X) + A^2X", Cv, p44g);
        add("E-A2", S2, "(eq:AintermsofAxiA2xi)", "A = A eta ^ A^2 eta / |A eta|^2", Al, ea2);
        add("E-A3", S2, "(eq:a3) \"A^3 eta = -(S/8) A eta\"", "A^3 eta = -(S/8) A eta", Cv, ea3);
        add("HESS", S2, "(eq:nabladf=-fric)", "nabla df = -f Ric", Cv, hess);
        add("L4.6", S2, "Lemma 4.6", "Ric(A eta) = S/2 A eta + f/16 dS; Ric((*A)eta) = dS/16; (A eta)(S) = f ((*A)eta)(S)",
            Cv, l46, true);
        add("L4.8", S2, "Lemma 4.8", "nabla_{A eta} A^2 eta = -(f/4) Ric(A^2 eta) - (f^2/32) A(dS)", Cv, l48, true);
        add("L4.9", S2, "Lemma 4.9",
            "Ric(A eta, A eta)/|A eta|^2 + Ric(A^2 eta, A^2 eta)/|A^2 eta|^2 = S - 2/(fS) (A eta)(S)", Cv, l49, true);
        add("L4.10", S2, "Lemma 4.10 \"Ric + 4A^2 = 0\"", "Ric + 4A^2 = 0", Cv, l410);
        add("L4.10-dS", S2, "Lemma 4.10 \"scalar curvature is constant\"", "dS = 0", Cv, l410ds, true);
        // P4.12 carries its own applicability test (A xi = 0, psi+- != 0), independent of M''.
        v.push_back({{"P4.12", S2, "Prop. 4.12", "nabla_X psi + ((AX^xi/|xi|^2)_+ - (AX^xi)_-).psi = 0 where A xi = 0",
                      Fd, false, false},
                     p412});

        add("P5.2-nJ", S3, "Prop. 5.2 (nJ)", "(nabla_Y J)(X) = 4/(f-1) X-|(J eta ^ AY + eta ^ JAY)", Fd, p52_nj);
        add("P5.2-nxi", S3, "Prop. 5.2 (nxi)", "nabla eta = f A", Fd, p52_nxi);
        add("P5.2-CX", S3, "Prop. 5.2 (CX)", "g(C(eta,X), J eta) = rho^2 f g(C_P, X)", Fd, p52_cx);
        add("P5.2-star", S3, "Prop. 5.2 (star)", "g(C(J eta, Z), J eta) = *(C_P ^ Z ^ eta ^ J eta), Z in P", Fd, p52_star);
        add("P5.2-s", S3, "Prop. 5.2 (s)", "K_P = -rho^-2 g(C_P, J eta) + 4 A_P^2", Cv, p52_s);
        add("L5.3-a", S3, "Lemma 5.3 (gC)", "g(C(X,Y), eta) = 0", Fd, l53a);
        add("L5.3-b", S3, "Lemma 5.3 (Rxi)", "R(X,Y)eta = f C(X,Y) - 4 eta-|(AX^AY)", Cv, l53b);
        add("L5.3-c", S3, "Lemma 5.3 (RJxi)",
            "R(X,Y)J eta = -J C(X,Y) + 4/(f-1) g(C(X,Y), J eta) eta - 4 J(eta)-|(AX^AY)", Cv, l53c);
        add("RB", S3, "(R)", "R(X,Y) = rho^-2 (*(C(X,Y)^eta) - f C(X,Y)^eta) - 4 AX^AY", Cv, rb);
        add("R5.1", S3, "Remark 5.1", "N(J) = 0 and d Omega = -4 A ^ (xi-|Omega) when AJ = JA", Fd, r51);
        add("L5.4", S3, "Lemma 5.4", "A^2 eta = -u^2 eta and AJ = JA where A eta = u J eta", Al, l54);
        add("T5.5-a", S3, "Theorem 5.5 (Ktau) \"f mu = tau\"", "f mu = tau", Fd, t55a);
        add("T5.5-b", S3, "Theorem 5.5 (Ktau) \"K = 2 mu lambda + 2 tau^2\"", "K = 2 mu lambda + 2 tau^2", Cv, t55b);
        add("CONN", S3, "(conncoeff)", "theta_12 = -f rho^-1 A_E s^1, theta_13 = f rho^-1 A_P s^4, theta_14 = -f rho^-1 A_P s^3, "
            "theta_23 = -rho^-1 A_P s^3, theta_24 = -rho^-1 A_P s^4", Fd, conn);
        add("DGL", S3, "(dgl2), (dgl), (KP)",
            "s2(A_E) = 2f rho^-1 A_P^2 + 2f^2 rho^-1 A_E A_P; s3,s4(A_P) = s3,s4(A_E) = 0; "
            "K_P = -2f rho^-2 A_E A_P - 2(rho^-2 - 2) A_P^2", Cv, dgl);
        add("L5.6", S3, "Lemma 5.6", "K = K_P + (1 + 3f^2) rho^-2 A_P^2", Cv, l56);

        add("DWP-CONN", S4, "(dwp) connection table", "Levi-Civita connection of dt^2 + rho^2 g_eta + sigma^2 g_Q", Cv,
            detail::eval_dwp_conn);
        add("DWP-AX", S4, "DWP-structure axioms",
            "nu unit geodesic, nu-perp integrable, eta Killing of leaf-constant length, W = lambda on eta, mu on Q", Cv,
            detail::eval_dwp_ax);
        add_global("SOL", S4, "Cor. 5.7 (sol1), (sol2)",
                   "(sigma^2)' = -2 rho tau_hat / sqrt(1 - 4 rho^2); (sigma^2)' rho'/rho = K_hat - 2 rho^2 tau_hat^2 / sigma^2",
                   TolClass::Ode);
        add_global("SCALE", S4, "(taurs)", "tau_hat_rs = r s^-2 tau_hat, K_hat_rs = s^-2 K_hat", Cv);
        add("R5.8", S4, "Remark 5.8 (Eres)",
            "nabla^N_eta phi(psi+-) = -lambda/(2f) eta.phi(psi+-), nabla^N_Z phi(psi+-) = -(mu f/2) Z.phi(psi+-); "
            "quasi-Killing type (-sgn(tau)/2, sgn(tau)(3/4 - S/8)); transversal equations",
            Cv, detail::eval_r58);
        return v;
    }();
    return entries;
}

// Per-point outcome of one entry.
struct Cell {
    enum Kind : uint8_t { NotApplicable, Skipped, Value } kind = NotApplicable;
    double v = 0.0;
};

template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
    int t = threads > 0 ? threads : int(std::thread::hardware_concurrency());
    t = std::clamp(t, 1, std::max(1, n));
    if (t == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex err_m;
    std::vector<std::thread> pool;
    for (int k = 0; k < t; ++k)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(err_m);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

double tolerance_for(const IdentityInfo& info, const Candidate4& cand, const VerifyOptions& opt) {
    auto it = opt.overrides.find(info.id);
    if (it != opt.overrides.end()) return it->second;
    // DWP charts combine FD metric derivatives with a transported spinor.
    if (cand.dwp && info.tol != TolClass::Ode) return opt.tol.curv;
    return opt.tol.of(info.tol);
}

void finish(IdentityResult& r) {
    if (!r.max_residual) {
        r.status = "not_applicable";
        r.pass = true;
        return;
    }
    r.pass = *r.max_residual <= r.tolerance;
    r.status = r.pass ? "pass" : "fail";
}

void run_entries(const Candidate4& cand, const std::vector<const Entry*>& entries, const VerifyOptions& opt,
                 std::vector<IdentityResult>& out) {
    const auto pts = sample_grid<4>(cand.chart, opt.grid);
    const bool analytic = cand.chart.mode == DerivMode::Analytic;
    std::vector<const Entry*> active;
    for (const Entry* e : entries) {
        IdentityResult r;
        r.id = e->info.id;
        r.anchor = e->info.anchor;
        r.suite = e->info.suite;
        r.tolerance = tolerance_for(e->info, cand, opt);
        if (e->info.global) {
            if (!cand.dwp) {
                r.note = "requires a doubly warped product candidate";
            } else {
                int n = 0;
                const double v = e->info.id == "SOL" ? detail::eval_sol(cand, n, r.note)
                                                     : detail::eval_scale(cand, n, r.note);
                r.max_residual = v;
                r.applicable_points = n;
            }
            finish(r);
            out.push_back(r);
            continue;
        }
        if (e->info.analytic_only && !analytic) {
            r.note = "requires analytic metric derivatives";
            finish(r);
            out.push_back(r);
            continue;
        }
        if (e->info.suite == Suite::S4 && !cand.dwp) {
            r.note = "requires a doubly warped product candidate";
            finish(r);
            out.push_back(r);
            continue;
        }
        active.push_back(e);
        out.push_back(r);
    }
    if (active.empty()) return;
    const size_t base = out.size() - active.size();
    // `out` holds the non-active results interleaved; locate active slots by id.
    std::vector<size_t> slot(active.size());
    for (size_t k = 0; k < active.size(); ++k)
        for (size_t i = 0; i < out.size(); ++i)
            if (out[i].id == active[k]->info.id) slot[k] = i;
    (void)base;

    const int n = int(pts.size());
    std::vector<Cell> cells(size_t(n) * active.size());
    parallel_for(n, opt.threads, [&](int i) {
        Ctx c(cand, pts[i], opt);
        for (size_t k = 0; k < active.size(); ++k) {
            Cell& cell = cells[size_t(i) * active.size() + k];
            try {
                const auto v = active[k]->eval(c);
                if (v) {
                    cell.kind = Cell::Value;
                    cell.v = std::isfinite(*v) ? *v : std::numeric_limits<double>::infinity();
                }
            } catch (const SkipPoint&) {
                cell.kind = Cell::Skipped;
            } catch (const DegenerateInput&) {
                cell.kind = Cell::Skipped;
            }
        }
    });
    for (size_t k = 0; k < active.size(); ++k) {
        IdentityResult& r = out[slot[k]];
        for (int i = 0; i < n; ++i) {
            const Cell& cell = cells[size_t(i) * active.size() + k];
            if (cell.kind == Cell::Skipped) ++r.skipped_points;
            if (cell.kind != Cell::Value) continue;
            ++r.applicable_points;
            if (!r.max_residual || cell.v > *r.max_residual) {
                r.max_residual = cell.v;
                r.argmax_point = pts[i];
            }
        }
        finish(r);
    }
}

}  // namespace

const std::vector<IdentityInfo>& list_identities() {
    static const std::vector<IdentityInfo> infos = [] {
        std::vector<IdentityInfo> v;
        for (const auto& e : catalog()) v.push_back(e.info);
        return v;
    }();
    return infos;
}

const IdentityInfo& identity_info(const std::string& id) {
    for (const auto& i : list_identities())
        if (i.id == id) return i;
    throw std::invalid_argument("unknown identity '" + id + "'");
}

namespace {

ResidualReport run_selected(const Candidate4& cand, const std::vector<Suite>& suites,
                            const std::vector<const Entry*>& entries, const VerifyOptions& opt) {
    for (int c : opt.grid)
        if (c < 1) throw std::invalid_argument("grid counts must be positive");
    ResidualReport rep;
    for (size_t i = 0; i < suites.size(); ++i) rep.suite += (i ? "," : "") + suite_name(suites[i]);
    rep.meta.chart = cand.chart.name;
    rep.meta.label = cand.label;
    rep.meta.grid = opt.grid;
    rep.meta.h = cand.chart.h;
    rep.meta.deriv_mode = cand.chart.mode == DerivMode::Analytic ? "analytic" : "finite_difference";
    rep.meta.orientation = cand.chart.orientation;
    rep.meta.points = opt.grid[0] * opt.grid[1] * opt.grid[2] * opt.grid[3];
    for (Suite s : suites) rep.meta.suites.push_back(suite_name(s));

    std::vector<const Entry*> plain, s3;
    for (const Entry* e : entries) (e->info.suite == Suite::S3 ? s3 : plain).push_back(e);

    Candidate4 s3cand = cand;
    if (!s3.empty() && opt.auto_flip) {
        const Vec4 xc = sample_grid<4>(cand.chart, {1, 1, 1, 1}).front();
        const auto F = derive_fields(cand.psi(xc), cand.chart.orientation, opt.eps_region);
        if (F.f < 0) {
            s3cand = flip_orientation(cand);
            rep.meta.flipped = true;
        }
    }
    std::vector<IdentityResult> a, b;
    run_entries(cand, plain, opt, a);
    if (!s3.empty()) run_entries(s3cand, s3, opt, b);
    // restore catalog order
    for (const Entry* e : entries) {
        for (auto* v : {&a, &b})
            for (const auto& r : *v)
                if (r.id == e->info.id) rep.identities.push_back(r);
    }
    for (Suite s : suites) {
        int fail = 0, applicable = 0;
        for (const auto& r : rep.identities)
            if (r.suite == s) {
                fail += r.status == "fail";
                applicable += r.status != "not_applicable";
            }
        rep.meta.extra[suite_name(s) + ".failed"] = fail;
        rep.meta.extra[suite_name(s) + ".applicable"] = applicable;
    }
    if (cand.dwp) {
        const auto sol = sol_residuals(cand.dwp->profile);
        rep.meta.extra["profile.t5a"] = sol.t5a;
        rep.meta.extra["profile.t5b"] = sol.t5b;
    }
    return rep;
}

}  // namespace

ResidualReport run_suites(const Candidate4& cand, const std::vector<Suite>& suites, const VerifyOptions& opt) {
    std::vector<const Entry*> entries;
    for (const auto& e : catalog())
        if (std::find(suites.begin(), suites.end(), e.info.suite) != suites.end()) entries.push_back(&e);
    return run_selected(cand, suites, entries, opt);
}

ResidualReport run_suite(const Candidate4& cand, Suite suite, const VerifyOptions& opt) {
    return run_suites(cand, {suite}, opt);
}

IdentityResult check_identity(const Candidate4& cand, const std::string& id, const VerifyOptions& opt) {
    for (const auto& e : catalog())
        if (e.info.id == id) {
            const ResidualReport rep = run_selected(cand, {e.info.suite}, {&e}, opt);
            return rep.identities.front();
        }
    throw std::invalid_argument("unknown identity '" + id + "'");
}

LeafRestriction leaf_restriction(const Candidate4& cand, const Vec4& x) {
    VerifyOptions opt;
    Ctx c(cand, x, opt);
    return detail::leaf_restriction_ctx(c);
}

}  // namespace sks
