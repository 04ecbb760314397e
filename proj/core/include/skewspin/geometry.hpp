#pragma once

#include "skewspin/clifford.hpp"

#include <Eigen/Cholesky>

#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace sks {

enum class DerivMode { FiniteDifference, Analytic };

class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <int N>
std::string format_point(const Vec<N>& x) {
    std::ostringstream os;
    os.precision(10);
    os << '(';
    for (int i = 0; i < N; ++i) os << (i ? ", " : "") << x(i);
    os << ')';
    return os.str();
}

// Metric with first and second coordinate derivatives:
// dg[k] = d_k g, d2g[k][l] = d_k d_l g.
template <int N>
struct MetricJet {
    Mat<N> g = Mat<N>::Identity();
    std::array<Mat<N>, N> dg;
    std::array<std::array<Mat<N>, N>, N> d2g;

    MetricJet() {
        for (auto& m : dg) m.setZero();
        for (auto& row : d2g)
            for (auto& m : row) m.setZero();
    }
};

template <int N>
struct Chart {
    std::string name;
    Vec<N> lo = Vec<N>::Constant(-1.0);
    Vec<N> hi = Vec<N>::Constant(1.0);
    std::function<Mat<N>(const Vec<N>&)> metric;
    std::function<MetricJet<N>(const Vec<N>&)> analytic;
    DerivMode mode = DerivMode::FiniteDifference;
    double h = 1e-3;
    int orientation = 1;

    Vec<N> center() const { return 0.5 * (lo + hi); }

    bool inside(const Vec<N>& x, double margin = 0.0) const {
        for (int i = 0; i < N; ++i)
            if (x(i) < lo(i) + margin || x(i) > hi(i) - margin) return false;
        return true;
    }

    bool has_analytic() const { return bool(analytic); }

    // order 0: g only; 1: adds dg; 2: adds d2g.
    MetricJet<N> jet(const Vec<N>& x, int order) const {
        if (mode == DerivMode::Analytic) {
            if (!analytic) throw std::logic_error("chart " + name + " has no analytic derivatives");
            return analytic(x);
        }
        MetricJet<N> j;
        j.g = metric(x);
        if (order == 0) return j;
        std::array<Mat<N>, N> gp, gm;
        for (int k = 0; k < N; ++k) {
            Vec<N> xp = x, xm = x;
            xp(k) += h;
            xm(k) -= h;
            gp[k] = metric(xp);
            gm[k] = metric(xm);
            j.dg[k] = (gp[k] - gm[k]) / (2 * h);
        }
        if (order == 1) return j;
        for (int k = 0; k < N; ++k) {
            j.d2g[k][k] = (gp[k] - 2 * j.g + gm[k]) / (h * h);
            for (int l = k + 1; l < N; ++l) {
                Vec<N> x1 = x, x2 = x, x3 = x, x4 = x;
                x1(k) += h; x1(l) += h;
                x2(k) += h; x2(l) -= h;
                x3(k) -= h; x3(l) += h;
                x4(k) -= h; x4(l) -= h;
                j.d2g[k][l] = (metric(x1) - metric(x2) - metric(x3) + metric(x4)) / (4 * h * h);
                j.d2g[l][k] = j.d2g[k][l];
            }
        }
        return j;
    }
};

// First-order local geometry. Frame columns E(:,a) are coordinate components
// of e_a (Gram-Schmidt in coordinate order, E = L^-T for g = L L^T).
// Gamma[i](k,j) = Gamma^k_ij. W[k](j,i) = g(nabla_{d_k} e_i, e_j) and
// Theta[a] = sum_k E(k,a) W[k], so Theta[a](j,i) = theta_ij(e_a).
template <int N>
struct FrameData {
    Vec<N> x;
    Mat<N> g, ginv, E, Einv;
    std::array<Mat<N>, N> dg, dE, Gamma, W, Theta;
};

// Curvature in the frame: R[a][b] is the endomorphism R(e_a, e_b).
template <int N>
struct CurvatureData {
    std::array<std::array<Mat<N>, N>, N> R;
    Mat<N> Ric;
    double S = 0.0;

    double sectional(const Vec<N>& u, const Vec<N>& v) const {
        Mat<N> Ruv = Mat<N>::Zero();
        for (int a = 0; a < N; ++a)
            for (int b = 0; b < N; ++b) Ruv += u(a) * v(b) * R[a][b];
        return (Ruv * v).dot(u);
    }
    Mat<N> endo(const Vec<N>& u, const Vec<N>& v) const {
        Mat<N> Ruv = Mat<N>::Zero();
        for (int a = 0; a < N; ++a)
            for (int b = 0; b < N; ++b) Ruv += u(a) * v(b) * R[a][b];
        return Ruv;
    }
};

template <int N>
struct LocalGeometry {
    FrameData<N> frame;
    CurvatureData<N> curv;
    bool has_curvature = false;
};

namespace detail {

template <int N>
Mat<N> phi_lower(const Mat<N>& m) {
    Mat<N> r = m.template triangularView<Eigen::StrictlyLower>();
    r.diagonal() = 0.5 * m.diagonal();
    return r;
}

template <int N>
std::array<Mat<N>, N> christoffel_T(const std::array<Mat<N>, N>& dg) {
    std::array<Mat<N>, N> T;
    for (int i = 0; i < N; ++i)
        for (int m = 0; m < N; ++m)
            for (int j = 0; j < N; ++j)
                T[i](m, j) = 0.5 * (dg[i](m, j) + dg[j](m, i) - dg[m](i, j));
    return T;
}

}  // namespace detail

template <int N>
FrameData<N> frame_from_jet(const MetricJet<N>& jet, const Vec<N>& x) {
    FrameData<N> F;
    F.x = x;
    F.g = jet.g;
    Eigen::LLT<Mat<N>> llt(jet.g);
    if (llt.info() != Eigen::Success || !(jet.g.diagonal().array() > 0).all())
        throw DomainError("metric not positive definite at " + format_point<N>(x));
    const Mat<N> L = llt.matrixL();
    const Mat<N> Linv = L.inverse();
    F.E = Linv.transpose();
    F.Einv = L.transpose();
    F.ginv = F.E * F.E.transpose();
    F.dg = jet.dg;
    const auto T = detail::christoffel_T<N>(jet.dg);
    for (int k = 0; k < N; ++k) {
        const Mat<N> Lp = L * detail::phi_lower<N>(Linv * jet.dg[k] * Linv.transpose());
        F.dE[k] = -F.E * Lp.transpose() * F.E;
        F.Gamma[k] = F.ginv * T[k];
    }
    for (int k = 0; k < N; ++k) F.W[k] = F.Einv * (F.dE[k] + F.Gamma[k] * F.E);
    for (int a = 0; a < N; ++a) {
        F.Theta[a].setZero();
        for (int k = 0; k < N; ++k) F.Theta[a] += F.E(k, a) * F.W[k];
    }
    return F;
}

template <int N>
FrameData<N> frame_data(const Chart<N>& chart, const Vec<N>& x) {
    return frame_from_jet<N>(chart.jet(x, 1), x);
}

template <int N>
CurvatureData<N> curvature_from_jet(const MetricJet<N>& jet, const FrameData<N>& F) {
    const auto T = detail::christoffel_T<N>(jet.dg);
    // dGamma[l][i] = d_l Gamma[i]
    std::array<std::array<Mat<N>, N>, N> dGamma;
    for (int l = 0; l < N; ++l) {
        const Mat<N> dginv = -F.ginv * jet.dg[l] * F.ginv;
        std::array<Mat<N>, N> d2;
        for (int k = 0; k < N; ++k) d2[k] = jet.d2g[l][k];
        const auto dT = detail::christoffel_T<N>(d2);
        for (int i = 0; i < N; ++i) dGamma[l][i] = dginv * T[i] + F.ginv * dT[i];
    }
    // coordinate Riemann: Riem[i][j] = R(d_i, d_j) acting on coordinate vectors
    std::array<std::array<Mat<N>, N>, N> Riem;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            Riem[i][j] = dGamma[i][j] - dGamma[j][i] + F.Gamma[i] * F.Gamma[j] - F.Gamma[j] * F.Gamma[i];
    CurvatureData<N> C;
    for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) {
            Mat<N> Rc = Mat<N>::Zero();
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j) Rc += F.E(i, a) * F.E(j, b) * Riem[i][j];
            C.R[a][b] = F.Einv * Rc * F.E;
        }
    // Ric(b,c) = sum_a g(R(e_a, e_b) e_c, e_a)
    C.Ric.setZero();
    for (int b = 0; b < N; ++b)
        for (int c = 0; c < N; ++c)
            for (int a = 0; a < N; ++a) C.Ric(b, c) += C.R[a][b](a, c);
    C.S = C.Ric.trace();
    return C;
}

template <int N>
LocalGeometry<N> local_geometry(const Chart<N>& chart, const Vec<N>& x, bool with_curvature) {
    LocalGeometry<N> G;
    const auto jet = chart.jet(x, with_curvature ? 2 : 1);
    G.frame = frame_from_jet<N>(jet, x);
    if (with_curvature) {
        G.curv = curvature_from_jet<N>(jet, G.frame);
        G.has_curvature = true;
    }
    return G;
}

template <int N>
std::array<Mat<N>, N> christoffels(const Chart<N>& chart, const Vec<N>& x) {
    return frame_data<N>(chart, x).Gamma;
}

template <int N>
CurvatureData<N> curvature(const Chart<N>& chart, const Vec<N>& x) {
    return local_geometry<N>(chart, x, true).curv;
}

// Skew Killing transport along a coordinate polyline: RK4 on
// d psi/ds = (A v . - 1/2 Theta(v) .) psi with v the segment velocity,
// using a fixed number of steps per segment so the endpoint value is a
// smooth function of the path.
template <int N>
Spinor<N> transport_polyline(const Chart<N>& chart,
                             const std::function<Mat<N>(const Vec<N>&)>& A,
                             const std::vector<Vec<N>>& path, const Spinor<N>& psi0,
                             int steps_per_segment) {
    auto rhs = [&](const Vec<N>& x, const Vec<N>& v, const Spinor<N>& psi) -> Spinor<N> {
        const FrameData<N> F = frame_data<N>(chart, x);
        Mat<N> Th = Mat<N>::Zero();
        for (int k = 0; k < N; ++k) Th += v(k) * F.W[k];
        const Vec<N> vf = F.Einv * v;
        return (vec_action<N>(A(x) * vf) - 0.5 * endo_action<N>(Th)) * psi;
    };
    Spinor<N> psi = psi0;
    for (size_t s = 0; s + 1 < path.size(); ++s) {
        const Vec<N> d = path[s + 1] - path[s];
        if (d.norm() == 0.0) continue;
        const double dt = 1.0 / steps_per_segment;
        for (int n = 0; n < steps_per_segment; ++n) {
            const Vec<N> x0 = path[s] + (n * dt) * d;
            const Spinor<N> k1 = rhs(x0, d, psi);
            const Spinor<N> k2 = rhs(x0 + 0.5 * dt * d, d, psi + 0.5 * dt * k1);
            const Spinor<N> k3 = rhs(x0 + 0.5 * dt * d, d, psi + 0.5 * dt * k2);
            const Spinor<N> k4 = rhs(x0 + dt * d, d, psi + dt * k3);
            psi += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
    }
    return psi;
}

// Axis-parallel path from `from` to `to`, moving coordinates in index order.
template <int N>
std::vector<Vec<N>> axis_path(const Vec<N>& from, const Vec<N>& to) {
    std::vector<Vec<N>> p{from};
    Vec<N> cur = from;
    for (int k = 0; k < N; ++k) {
        if (cur(k) == to(k)) continue;
        cur(k) = to(k);
        p.push_back(cur);
    }
    return p;
}

// Uniform lattice with a margin of 2h from the chart boundary.
template <int N>
std::vector<Vec<N>> sample_grid(const Chart<N>& chart, const std::array<int, N>& counts) {
    const double margin = 2 * chart.h;
    std::vector<Vec<N>> pts;
    std::array<int, N> idx{};
    int total = 1;
    for (int c : counts) {
        if (c < 1) throw std::invalid_argument("grid counts must be positive");
        total *= c;
    }
    pts.reserve(total);
    for (int n = 0; n < total; ++n) {
        int r = n;
        for (int k = N - 1; k >= 0; --k) {
            idx[k] = r % counts[k];
            r /= counts[k];
        }
        Vec<N> x;
        for (int k = 0; k < N; ++k) {
            const double a = chart.lo(k) + margin, b = chart.hi(k) - margin;
            x(k) = counts[k] == 1 ? 0.5 * (a + b) : a + (b - a) * idx[k] / double(counts[k] - 1);
        }
        pts.push_back(x);
    }
    return pts;
}

}  // namespace sks
