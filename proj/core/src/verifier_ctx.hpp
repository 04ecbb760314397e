#pragma once

#include "skewspin/probe.hpp"
#include "skewspin/verifier.hpp"

#include <Eigen/SVD>

#include <optional>

namespace sks::detail {

// Thrown by evaluators when a denominator or a required field vanishes at a
// gated point; the point is counted as skipped.
struct SkipPoint {};

inline void need(bool cond) {
    if (!cond) throw SkipPoint{};
}

inline double rel(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(a) + std::abs(b)); }

template <class T>
double rel(const T& a, const T& b) {
    return (a - b).norm() / (1.0 + a.norm() + b.norm());
}

inline double rel(const Multivector<4>& a, const Multivector<4>& b) { return rel(a.c, b.c); }

// Per-point evaluation context: a memoizing probe plus derived quantities at
// the base point.
class Ctx {
public:
    using Off = Probe<4>::Off;

    Ctx(const Candidate4& c, const Vec4& x, const VerifyOptions& opt);

    Probe<4> P;
    const VerifyOptions& opt;
    const Candidate4& cand;
    int o;
    Off O{};

    const PointFields& fields(const Off& q);
    const PointFields& F0() { return fields(O); }
    const Mat4& A0() { return P.A(O); }
    const Spinor4& psi0() { return P.psi(O); }
    const CurvatureData<4>& curv() { return P.curvature(O); }
    const FrameData<4>& frame() { return P.frame(O); }

    const Mat4& nablaA(int a);
    Mat4 nablaA_along(const Vec4& X);
    Vec4 C(const Vec4& X, const Vec4& Y);
    Vec4 C(int a, int b) { return C(Vec4::Unit(a), Vec4::Unit(b)); }
    const Multivector<4>& dA();
    const Vec4& deltaA();
    double absA2() { return A0().squaredNorm(); }

    int rank();
    bool in_S2();
    bool in_S3();

    // Adapted frame with the seed direction fixed at the base point.
    const AdaptedFrame& sframe(const Off& q);
    const AdaptedFrame& S0() { return sframe(O); }
    // Covariant derivative of s_i in frame direction e_c at the base point.
    Vec4 nabla_s(int c, int i);
    Vec4 nabla_s_along(const Vec4& X, int i);
    // theta_ij(X) = g(nabla_X s_i, s_j)
    double theta(int i, int j, const Vec4& X);

    struct Measured {
        double lambda, mu, tau, K, K_P;
    };
    const Measured& measured();

    // Directional derivative along frame vector X of a scalar field.
    template <class Fn>
    double deriv(const Vec4& X, Fn&& q) {
        double r = 0.0;
        for (int c = 0; c < 4; ++c)
            if (X(c) != 0.0) r += X(c) * P.D(O, c, q);
        return r;
    }
    template <class Fn>
    auto deriv_any(const Vec4& X, Fn&& q) {
        using T = std::decay_t<decltype(q(O))>;
        T r = P.D(O, 0, q) * X(0);
        for (int c = 1; c < 4; ++c) r += P.D(O, c, q) * X(c);
        return r;
    }

private:
    std::array<std::optional<Mat4>, 4> nA_;
    std::optional<Multivector<4>> dA_;
    std::optional<Vec4> deltaA_;
    std::optional<int> rank_;
    std::optional<Measured> measured_;
    int seed_ = -2;
};

using PointEval = std::optional<double> (*)(Ctx&);

// S4 evaluators (DWP charts).
std::optional<double> eval_dwp_conn(Ctx& c);
std::optional<double> eval_dwp_ax(Ctx& c);
std::optional<double> eval_r58(Ctx& c);
LeafRestriction leaf_restriction_ctx(Ctx& c);
double eval_sol(const Candidate4& cand, int& applicable, std::string& note);
double eval_scale(const Candidate4& cand, int& applicable, std::string& note);

}  // namespace sks::detail
