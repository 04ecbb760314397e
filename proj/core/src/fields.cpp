#include "skewspin/fields.hpp"

#include <cmath>

namespace sks {

namespace {

std::pair<Spinor4, Spinor4> split(const Spinor4& psi, int o) {
    return {chiral_part<4>(psi, +1, o), chiral_part<4>(psi, -1, o)};
}

}  // namespace

Vec4 compute_eta(const Spinor4& psi, int orientation) {
    const auto [p, m] = split(psi, orientation);
    const auto& G = gamma_rep<4>();
    Vec4 eta;
    for (int i = 0; i < 4; ++i) eta(i) = herm(Spinor4(G.gamma[i] * p), m).real();
    return eta;
}

Vec4 compute_eta_imag(const Spinor4& psi, int orientation) {
    const auto [p, m] = split(psi, orientation);
    const auto& G = gamma_rep<4>();
    Vec4 eta;
    for (int i = 0; i < 4; ++i) eta(i) = herm(Spinor4(G.gamma[i] * p), m).imag();
    return eta;
}

std::pair<double, double> compute_f_rho(const Spinor4& psi, int orientation, bool normalized) {
    if (!normalized) throw std::invalid_argument("f and rho require a normalized candidate");
    const auto [p, m] = split(psi, orientation);
    return {1.0 - 2.0 * m.squaredNorm(), compute_eta(psi, orientation).norm()};
}

RegionFlags region_flags(const Spinor4& psi, int orientation, double eps) {
    const auto [p, m] = split(psi, orientation);
    const double rho = compute_eta(psi, orientation).norm();
    RegionFlags r;
    r.M0 = m.norm() > eps;
    r.M1 = p.norm() > eps;
    r.Mprime = rho > eps;
    r.Mdoubleprime = rho > eps && rho < 0.5 - eps;
    return r;
}

PointFields derive_fields(const Spinor4& psi, int orientation, double eps) {
    PointFields pf;
    pf.psi = psi;
    std::tie(pf.plus, pf.minus) = split(psi, orientation);
    pf.eta = compute_eta(psi, orientation);
    pf.eta_imag = compute_eta_imag(psi, orientation);
    pf.f = 1.0 - 2.0 * pf.minus.squaredNorm();
    pf.rho = pf.eta.norm();
    pf.flags = region_flags(psi, orientation, eps);
    if (pf.flags.M0) {
        pf.has_xi = true;
        pf.xi = solve_xi(pf.minus, pf.plus);
        pf.J = solve_J(pf.minus);
    }
    return pf;
}

Candidate4 flip_orientation(const Candidate4& c) {
    Candidate4 r = c;
    r.chart.orientation = -c.chart.orientation;
    r.label = c.label + (c.label.empty() ? "" : "+") + "flipped";
    return r;
}

FlipCheck flip_check(const Spinor4& psi, int orientation) {
    FlipCheck fc;
    const PointFields a = derive_fields(psi, orientation);
    const PointFields b = derive_fields(psi, -orientation);
    fc.eta = (b.eta + a.eta).norm();
    fc.f = std::abs(b.f + a.f);
    if (!a.has_xi || !b.has_xi || a.xi.norm() < 1e-12) {
        fc.xi_defined = false;
    } else {
        fc.xi = (b.xi + a.xi / a.xi.squaredNorm()).norm();
    }
    const PointFields c = derive_fields(psi, orientation);
    fc.roundtrip = std::max((c.plus - a.plus).norm(), (c.minus - a.minus).norm());
    // swapped halves
    fc.roundtrip = std::max(fc.roundtrip, std::max((b.plus - a.minus).norm(), (b.minus - a.plus).norm()));
    return fc;
}

AdaptedFrame frame_5_2(const Mat4& A, const Vec4& eta, const Mat4& J, int seed_index) {
    const double rho = eta.norm();
    if (rho < 1e-12) throw DegenerateInput("eta vanishes; adapted frame undefined");
    AdaptedFrame fr;
    const Vec4 s1 = -eta / rho;
    const Vec4 s2 = J * s1;
    auto project = [&](int k) {
        Vec4 v = Vec4::Unit(k);
        v -= v.dot(s1) * s1;
        v -= v.dot(s2) * s2;
        return v;
    };
    int k = seed_index;
    if (k < 0) {
        for (k = 0; k < 4; ++k)
            if (project(k).norm() >= 0.3) break;
        if (k == 4) throw DegenerateInput("no coordinate direction transverse to {eta, J eta}");
    }
    const Vec4 s3 = project(k).normalized();
    const Vec4 s4 = J * s3;
    fr.seed_index = k;
    fr.S.col(0) = s1;
    fr.S.col(1) = s2;
    fr.S.col(2) = s3;
    fr.S.col(3) = s4;
    const Vec4 Jeta = J * eta;
    fr.A_E = -(A * Jeta).dot(eta) / (rho * rho);
    fr.A_P = -(A * (J * s3)).dot(s3);
    fr.commutator = (A * J - J * A).norm();
    const double r1 = (A * Jeta + fr.A_E * eta).norm();
    const double r2 = (A * (J * s3) + fr.A_P * s3).norm();
    const double r3 = (A * (J * s4) + fr.A_P * s4).norm();
    fr.relation = std::max({r1, r2, r3});
    return fr;
}

}  // namespace sks
