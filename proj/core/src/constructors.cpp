#include "skewspin/constructors.hpp"

#include "skewspin/probe.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace sks {

namespace {

constexpr double kPi = std::numbers::pi;
const cplx kI(0.0, 1.0);

double rel(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(a) + std::abs(b)); }

Mat<2> complex_structure_2d() {
    Mat<2> J;
    J << 0.0, -1.0, 1.0, 0.0;
    return J;
}

CMat4 kron(const CMat<2>& a, const CMat<2>& b) {
    CMat4 m;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) m.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return m;
}

CMat4 block_offdiag(const CMat<2>& upper, const CMat<2>& lower) {
    CMat4 m = CMat4::Zero();
    m.block<2, 2>(0, 2) = upper;
    m.block<2, 2>(2, 0) = lower;
    return m;
}

// Frame from the metric alone (no derivatives).
template <int N>
FrameData<N> frame_at(const Chart<N>& chart, const Vec<N>& x) {
    MetricJet<N> j;
    j.g = chart.metric(x);
    return frame_from_jet<N>(j, x);
}

// Gauss-Legendre nodes and weights on [0, 1] (Golub-Welsch).
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = k / std::sqrt(4.0 * k * k - 1.0);
        T(k, k - 1) = T(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    std::vector<double> x(n), w(n);
    for (int i = 0; i < n; ++i) {
        x[i] = 0.5 * (es.eigenvalues()(i) + 1.0);
        const double v0 = es.eigenvectors()(0, i);
        w[i] = v0 * v0;  // 2 v0^2 on [-1,1], halved for [0,1]
    }
    return {x, w};
}

// Chart for the metric a (dchi + cos th dphi)^2 + b (dth^2 + sin^2 th dphi^2)
// in coordinates (th, phi, chi), with a, b constant.
Mat<3> berger_block(double a, double b, double th) {
    const double c = std::cos(th), s = std::sin(th);
    Mat<3> g = Mat<3>::Zero();
    g(0, 0) = b;
    g(1, 1) = a * c * c + b * s * s;
    g(1, 2) = g(2, 1) = a * c;
    g(2, 2) = a;
    return g;
}

// th-derivatives of berger_block.
Mat<3> berger_block_dth(double a, double b, double th) {
    const double c = std::cos(th), s = std::sin(th);
    Mat<3> g = Mat<3>::Zero();
    g(1, 1) = 2 * s * c * (b - a);
    g(1, 2) = g(2, 1) = -a * s;
    return g;
}

Mat<3> berger_block_dth2(double a, double b, double th) {
    const double c = std::cos(th);
    Mat<3> g = Mat<3>::Zero();
    g(1, 1) = 2 * (b - a) * std::cos(2 * th);
    g(1, 2) = g(2, 1) = -a * c;
    return g;
}

Chart<3> berger_chart(const std::string& name, double a, double b, double half_width, DerivMode mode, double h) {
    Chart<3> c;
    c.name = name;
    c.lo = Vec<3>(kPi / 2 - half_width, -half_width, -half_width);
    c.hi = Vec<3>(kPi / 2 + half_width, half_width, half_width);
    c.metric = [a, b](const Vec<3>& x) { return berger_block(a, b, x(0)); };
    c.analytic = [a, b](const Vec<3>& x) {
        MetricJet<3> j;
        j.g = berger_block(a, b, x(0));
        j.dg[0] = berger_block_dth(a, b, x(0));
        j.d2g[0][0] = berger_block_dth2(a, b, x(0));
        return j;
    };
    c.mode = mode;
    c.h = h;
    return c;
}

// Unit vector completing (s1, s2, s3) to a positively oriented orthonormal basis.
Vec4 complete_basis(const Vec4& s1, const Vec4& s2, const Vec4& s3) {
    Vec4 w;
    for (int i = 0; i < 4; ++i) {
        Mat4 m;
        m.col(0) = s1;
        m.col(1) = s2;
        m.col(2) = s3;
        m.col(3) = Vec4::Unit(i);
        w(i) = m.determinant();
    }
    return w.normalized();
}

}  // namespace

// ------------------------------------------------------------- flat

Candidate4 build_flat_parallel(FlatCorruption corruption, double eps, DerivMode mode, double h) {
    Candidate4 c;
    c.chart.name = "flat";
    c.chart.lo = Vec4::Constant(-1.0);
    c.chart.hi = Vec4::Constant(1.0);
    c.chart.metric = [](const Vec4&) { return Mat4::Identity(); };
    c.chart.analytic = [](const Vec4&) { return MetricJet<4>(); };
    c.chart.mode = mode;
    c.chart.h = h;
    Spinor4 psi0(cplx(0.6, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.8), cplx(0.0, 0.0));
    c.label = "flat";
    if (corruption == FlatCorruption::AddA) {
        const Mat4 B = eps * wedge_endo(Vec4::Unit(0), Vec4::Unit(1));
        c.A = [B](const Vec4&) { return B; };
        c.label += "+A";
    } else {
        c.A = [](const Vec4&) { return Mat4::Zero(); };
    }
    if (corruption == FlatCorruption::PerturbPsi) {
        const Spinor4 v(cplx(0.0, 0.0), cplx(1.0, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0));
        c.psi = [psi0, v, eps](const Vec4& x) -> Spinor4 {
            const double a = eps * (x(0) + 0.5 * x(2));
            return std::cos(a) * psi0 + std::sin(a) * v;
        };
        c.label += "+psi";
    } else {
        c.psi = [psi0](const Vec4&) { return psi0; };
    }
    return c;
}

// ------------------------------------------------------------- S^2

Chart<2> sphere_chart(double radius, double half_width, DerivMode mode, double h) {
    Chart<2> c;
    c.name = "sphere";
    c.lo = Vec<2>(kPi / 2 - half_width, -half_width);
    c.hi = Vec<2>(kPi / 2 + half_width, half_width);
    const double R2 = radius * radius;
    c.metric = [R2](const Vec<2>& x) {
        const double s = std::sin(x(0));
        Mat<2> g = Mat<2>::Zero();
        g(0, 0) = R2;
        g(1, 1) = R2 * s * s;
        return g;
    };
    c.analytic = [R2](const Vec<2>& x) {
        MetricJet<2> j;
        const double s = std::sin(x(0));
        j.g(0, 0) = R2;
        j.g(1, 1) = R2 * s * s;
        j.dg[0](1, 1) = R2 * std::sin(2 * x(0));
        j.d2g[0][0](1, 1) = 2 * R2 * std::cos(2 * x(0));
        return j;
    };
    c.mode = mode;
    c.h = h;
    return c;
}

double s2_flatness(const Candidate<2>& c, int grid) {
    double worst = 0.0;
    const auto pts = sample_grid<2>(c.chart, {grid, grid});
    for (const auto& x : pts) {
        Probe<2> P(c, x);
        const auto o = P.origin();
        const Mat<2>& A = P.A(o);
        const Mat<2> nA0 = P.nabla_A(o, 0), nA1 = P.nabla_A(o, 1);
        const Vec<2> C = nA0.col(1) - nA1.col(0);
        const Vec<2> u = A.col(0), v = A.col(1);
        const Mat<2> uv = v * u.transpose() - u * v.transpose();
        const CMat<2> Rhat = 0.5 * endo_action<2>(P.curvature(o).R[0][1]) - vec_action<2>(C) + 2.0 * endo_action<2>(uv);
        worst = std::max(worst, Rhat.norm());
    }
    return worst;
}

double s2_k0(const Candidate<2>& c, int grid) {
    double worst = 0.0;
    const auto pts = sample_grid<2>(c.chart, {grid, grid});
    for (const auto& x : pts) {
        Probe<2> P(c, x);
        const auto o = P.origin();
        for (int a = 0; a < 2; ++a) {
            const Spinor<2> lhs = P.nabla_psi(o, a);
            const Spinor<2> rhs = vec_action<2>(Vec<2>(P.A(o).col(a))) * P.psi(o);
            worst = std::max(worst, (lhs - rhs).norm() / (1.0 + lhs.norm() + rhs.norm()));
        }
    }
    return worst;
}

Candidate<2> build_s2_skew_killing(const Spinor<2>& base, const S2Options& opt, S2Report* report) {
    if (opt.radius <= 0) throw std::invalid_argument("sphere radius must be positive");
    if (base.norm() == 0.0) throw std::invalid_argument("base spinor must be nonzero");
    Candidate<2> c;
    c.chart = sphere_chart(opt.radius, opt.half_width, opt.mode, opt.h);
    c.label = "s2";
    const Mat<2> A = double(opt.j_sign) * complex_structure_2d();
    c.A = [A](const Vec<2>&) { return A; };

    // Per-step rotation stays below 0.01 rad: the transport rate per unit
    // coordinate length is bounded by radius + 1/2.
    const int steps = std::max(8, int(std::ceil(opt.half_width * (opt.radius + 0.5) / 0.01)));
    struct Cache {
        std::mutex m;
        std::map<std::pair<double, double>, Spinor<2>> values;
    };
    auto cache = std::make_shared<Cache>();
    const Chart<2> chart = c.chart;
    const Spinor<2> psi0 = base.normalized();
    const MatField<2> Afield = c.A;
    c.psi = [=](const Vec<2>& x) -> Spinor<2> {
        const auto key = std::make_pair(x(0), x(1));
        {
            std::lock_guard<std::mutex> lk(cache->m);
            auto it = cache->values.find(key);
            if (it != cache->values.end()) return it->second;
        }
        const Spinor<2> v = transport_polyline<2>(chart, Afield, axis_path<2>(chart.center(), x), psi0, steps);
        std::lock_guard<std::mutex> lk(cache->m);
        cache->values.emplace(key, v);
        return v;
    };

    S2Report rep;
    rep.steps_per_segment = steps;
    rep.flatness = s2_flatness(c, opt.grid);
    if (opt.enforce && rep.flatness > opt.flat_tol)
        throw ConstructionError("modified connection is not flat on the sphere of radius " +
                                std::to_string(opt.radius) + ": curvature norm " + std::to_string(rep.flatness));
    rep.k0 = s2_k0(c, opt.grid);
    if (opt.enforce && rep.k0 > opt.k0_tol)
        throw ConstructionError("transported spinor violates the skew Killing equation: " + std::to_string(rep.k0));
    {
        const Vec<2> x0 = chart.center();
        const double d = 0.1 * opt.half_width;
        std::vector<Vec<2>> loop{x0, x0 + Vec<2>(d, 0), x0 + Vec<2>(d, d), x0 + Vec<2>(0, d), x0};
        rep.loop = (transport_polyline<2>(chart, Afield, loop, psi0, steps) - psi0).norm();
    }
    if (report) *report = rep;
    return c;
}

std::vector<RadiusScanRow> scan_radius(double r_min, double r_max, int samples, DerivMode mode, int grid) {
    if (samples < 2 || r_min <= 0 || r_max <= r_min) throw std::invalid_argument("invalid radius scan range");
    std::vector<RadiusScanRow> rows;
    for (int i = 0; i < samples; ++i) {
        const double r = r_min + (r_max - r_min) * i / double(samples - 1);
        Candidate<2> c;
        c.chart = sphere_chart(r, 0.6, mode, 1e-3);
        const Mat<2> A = complex_structure_2d();
        c.A = [A](const Vec<2>&) { return A; };
        c.psi = [](const Vec<2>&) { return Spinor<2>(1.0, 0.0); };
        rows.push_back({r, s2_flatness(c, grid)});
    }
    return rows;
}

// --------------------------------------------------- products (4D)

CMat4 block_to_gauge(const std::array<CMat4, 4>& block) {
    const auto& G = gamma_rep<4>();
    const std::vector<CMat4> from(block.begin(), block.end());
    const std::vector<CMat4> to(G.gamma.begin(), G.gamma.end());
    const auto [U, res] = intertwiner<4>(from, to);
    if (res > 1e-10) throw ConstructionError("block representation is not equivalent to the fixed gauge");
    return U;
}

namespace {

// Metric R^2 (dth^2 + sin^2 th dphi^2) on coordinates (i, i+1), flat elsewhere.
Chart<4> sphere_product_chart(const std::string& name, int theta_index, double R, const Vec4& lo, const Vec4& hi,
                              DerivMode mode, double h) {
    Chart<4> c;
    c.name = name;
    c.lo = lo;
    c.hi = hi;
    const int i = theta_index;
    const double R2 = R * R;
    c.metric = [i, R2](const Vec4& x) {
        Mat4 g = Mat4::Identity();
        const double s = std::sin(x(i));
        g(i, i) = R2;
        g(i + 1, i + 1) = R2 * s * s;
        return g;
    };
    c.analytic = [i, R2](const Vec4& x) {
        MetricJet<4> j;
        const double s = std::sin(x(i));
        j.g(i, i) = R2;
        j.g(i + 1, i + 1) = R2 * s * s;
        j.dg[i](i + 1, i + 1) = R2 * std::sin(2 * x(i));
        j.d2g[i][i](i + 1, i + 1) = 2 * R2 * std::cos(2 * x(i));
        return j;
    };
    c.mode = mode;
    c.h = h;
    return c;
}

S2Options sphere_options(const ProductOptions& opt, int j_sign) {
    S2Options s;
    s.radius = 0.5;
    s.j_sign = j_sign;
    s.half_width = opt.half_width;
    s.mode = DerivMode::Analytic;
    s.grid = 5;
    return s;
}

}  // namespace

Candidate4 build_product_3d(const ProductOptions& opt) {
    const Candidate<2> s2 = build_s2_skew_killing(opt.base, sphere_options(opt, +1));
    const double w = opt.half_width;
    Candidate4 c;
    c.chart = sphere_product_chart("product3d", 1, 0.5, Vec4(-w, kPi / 2 - w, -w, -w), Vec4(w, kPi / 2 + w, w, w),
                                   opt.mode, opt.h);
    c.label = "product3d";
    Mat4 A = Mat4::Zero();
    A(2, 1) = 1.0;
    A(1, 2) = -1.0;
    c.A = [A](const Vec4&) { return A; };

    // N = S^2 x R_z with Cl(3); d_t -> [[0,-1],[1,0]], X -> [[0,X_N],[X_N,0]].
    const auto& G3 = gamma_rep<3>();
    std::array<CMat4, 4> block;
    block[0] = block_offdiag(-CMat<2>::Identity(), CMat<2>::Identity());
    for (int k = 0; k < 3; ++k) block[k + 1] = block_offdiag(G3.gamma[k], G3.gamma[k]);
    const CMat4 U = block_to_gauge(block);
    const SpinorField<2> phi = s2.psi;
    c.psi = [U, phi](const Vec4& x) -> Spinor4 {
        const Spinor<2> p = phi(Vec<2>(x(1), x(2)));
        Spinor4 b;
        b << p, p;
        return U * (b / std::sqrt(2.0));
    };
    return c;
}

Candidate4 build_s2xr2(S2xR2Mode mode, S2xR2Combo combo, const ProductOptions& opt) {
    // Killing map A = j (J + 0). The S^2 factor carries the spinor for j J and
    // sigma lies in Sigma+ of R^2, so that X.(phi x sigma) = (X.phi) x sigma.
    const int j = mode == S2xR2Mode::Plus ? +1 : -1;
    const Candidate<2> s2 = build_s2_skew_killing(opt.base, sphere_options(opt, j));
    const double w = opt.half_width;
    Candidate4 c;
    c.chart = sphere_product_chart("s2xr2", 0, 0.5, Vec4(kPi / 2 - w, -w, -w, -w), Vec4(kPi / 2 + w, w, w, w),
                                   opt.mode, opt.h);
    c.label = std::string("s2xr2_") + (j > 0 ? "plus" : "minus") + (combo == S2xR2Combo::AetaZero ? "_aeta_zero" : "");
    Mat4 A = Mat4::Zero();
    A(1, 0) = j;
    A(0, 1) = -j;
    c.A = [A](const Vec4&) { return A; };

    const auto& G2 = gamma_rep<2>();
    const CMat<2> eps = G2.volume_c;
    const CMat<2> I2 = CMat<2>::Identity();
    std::array<CMat4, 4> block{kron(G2.gamma[0], eps), kron(G2.gamma[1], eps), kron(I2, G2.gamma[0]),
                               kron(I2, G2.gamma[1])};
    const CMat4 U = block_to_gauge(block);
    const Spinor<2> sigma(1.0, 0.0);
    const SpinorField<2> phi = s2.psi;
    auto product = [U, phi, sigma](const Vec4& x) -> Spinor4 {
        const Spinor<2> p = phi(Vec<2>(x(0), x(1)));
        Spinor4 b;
        b << p(0) * sigma, p(1) * sigma;
        return U * b;
    };
    if (combo == S2xR2Combo::AetaNonzero) {
        c.psi = product;
    } else {
        // psi + Y.psibar with Y = e3 parallel; orientation of the chart is +1.
        const CMat4 Y = gamma_rep<4>().gamma[2];
        const CMat4 vol = gamma_rep<4>().volume_c;
        c.psi = [product, Y, vol](const Vec4& x) -> Spinor4 {
            const Spinor4 p = product(x);
            const Spinor4 bar = vol * p;
            return (p + Y * bar) / std::sqrt(2.0);
        };
    }
    return c;
}

// ------------------------------------------------------------- DWP

Mat<3> berger_metric(double r, double s, const Vec<3>& x) { return berger_block(r * r / 4, s * s / 4, x(0)); }

FlowData berger_flow(double r, double s, DerivMode mode) {
    if (r <= 0 || s <= 0) throw std::invalid_argument("Berger scales must be positive");
    // tau measured with a fixed orientation rule on eta_hat-perp
    auto measure = [](const Chart<3>& ch, const Vec<3>& x, double rr, double& unit, double& tau, double& ksec) {
        const auto G = local_geometry<3>(ch, x, true);
        const auto& F = G.frame;
        const Vec<3> eta_c(0.0, 0.0, 2.0 / rr);
        const Vec<3> eta = F.Einv * eta_c;
        unit = std::abs(eta.norm() - 1.0);
        Vec<3> u1 = Vec<3>::Unit(0) - eta.dot(Vec<3>::Unit(0)) * eta;
        u1.normalize();
        const Vec<3> u2 = eta.cross(u1);
        Mat<3> nab = Mat<3>::Zero();  // coordinate covariant derivative of eta_c
        for (int i = 0; i < 3; ++i) nab.col(i) = F.Gamma[i] * eta_c;
        const Vec<3> X = F.E * u1;
        const Vec<3> dEta = F.Einv * (nab * X);
        tau = dEta.dot(u2);
        ksec = G.curv.sectional(u1, u2);
    };
    FlowData fd;
    fd.r = r;
    fd.s = s;
    fd.tau_hat = r / (s * s);
    fd.K_hat = 4.0 / (s * s);
    fd.chart = berger_chart("berger", r * r / 4, s * s / 4, 0.3, mode, 1e-3);

    {
        const Chart<3> seed = berger_chart("berger_seed", 0.25, 0.25, 0.3, DerivMode::Analytic, 1e-3);
        double unit, tau, ks;
        measure(seed, seed.center(), 1.0, unit, tau, ks);
        fd.j_sign = tau >= 0 ? 1 : -1;
    }
    const auto pts = sample_grid<3>(fd.chart, {3, 3, 3});
    double tau_c = 0.0;
    for (size_t n = 0; n < pts.size(); ++n) {
        double unit, tau, ks;
        measure(fd.chart, pts[n], r, unit, tau, ks);
        tau *= fd.j_sign;
        fd.unit_residual = std::max(fd.unit_residual, unit);
        if (n == pts.size() / 2) {
            tau_c = tau;
            fd.tau_hat_measured = tau;
            fd.K_hat_measured = ks + 3 * tau * tau;
        }
    }
    for (const auto& x : pts) {
        double unit, tau, ks;
        measure(fd.chart, x, r, unit, tau, ks);
        fd.tau_spread = std::max(fd.tau_spread, std::abs(fd.j_sign * tau - tau_c));
    }
    return fd;
}

std::array<double, 2> DwpRhs::operator()(double rho, double s2) const {
    const double ds2 = -2.0 * rho * tau_hat / std::sqrt(1.0 - 4.0 * rho * rho);
    const double drho = rho * (K_hat - 2.0 * rho * rho * tau_hat * tau_hat / s2) / ds2;
    return {drho, ds2};
}

namespace {

std::array<double, 2> rk4_step(const DwpRhs& f, std::array<double, 2> y, double dt) {
    auto add = [](std::array<double, 2> a, std::array<double, 2> b, double c) {
        return std::array<double, 2>{a[0] + c * b[0], a[1] + c * b[1]};
    };
    const auto k1 = f(y[0], y[1]);
    const auto k2 = f(add(y, k1, dt / 2)[0], add(y, k1, dt / 2)[1]);
    const auto k3 = f(add(y, k2, dt / 2)[0], add(y, k2, dt / 2)[1]);
    const auto k4 = f(add(y, k3, dt)[0], add(y, k3, dt)[1]);
    return {y[0] + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            y[1] + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])};
}

void append_knot(DwpProfile& p, double t, double rho, double s2) {
    const DwpRhs f{p.K_hat, p.tau_hat};
    const auto d = f(rho, s2);
    const double sigma = std::sqrt(s2);
    p.t.push_back(t);
    p.rho.push_back(rho);
    p.s2.push_back(s2);
    p.sigma.push_back(sigma);
    p.lambda.push_back(-d[0] / rho);
    p.mu.push_back(-d[1] / (2 * s2));
    p.tau.push_back(rho * p.tau_hat / s2);
    p.K.push_back(p.K_hat / s2);
}

}  // namespace

DwpProfile integrate_dwp(const DwpParams& prm) {
    if (!(prm.rho0 > 0 && prm.rho0 < 0.5)) throw std::invalid_argument("rho0 must lie in (0, 1/2)");
    if (!(prm.sigma0 > 0)) throw std::invalid_argument("sigma0 must be positive");
    if (prm.tau_hat == 0) throw std::invalid_argument("tau_hat must be nonzero");
    if (!(prm.step > 0)) throw std::invalid_argument("step must be positive");
    DwpProfile p;
    p.K_hat = prm.K_hat;
    p.tau_hat = prm.tau_hat;
    p.step = prm.step;
    const DwpRhs f{prm.K_hat, prm.tau_hat};
    std::array<double, 2> y{prm.rho0, prm.sigma0 * prm.sigma0};
    append_knot(p, prm.t0, y[0], y[1]);
    const int n = int(std::llround(std::abs(prm.t_span) / prm.step));
    const double dt = prm.t_span >= 0 ? prm.step : -prm.step;
    for (int k = 1; k <= n; ++k) {
        const auto next = rk4_step(f, y, dt);
        std::string reason;
        if (!std::isfinite(next[0]) || !std::isfinite(next[1]))
            reason = "nonfinite";
        else if (next[0] <= prm.delta)
            reason = "rho_lower";
        else if (next[0] >= 0.5 - prm.delta)
            reason = "rho_upper";
        else if (next[1] <= 0)
            reason = "sigma_nonpositive";
        else if (std::abs(f(next[0], next[1])[1]) < prm.eps_den)
            reason = "singular";
        if (!reason.empty()) {
            p.exit = reason;
            break;
        }
        y = next;
        append_knot(p, prm.t0 + k * dt, y[0], y[1]);
    }
    return p;
}

double DwpProfile::t_min() const { return std::min(t.front(), t.back()); }
double DwpProfile::t_max() const { return std::max(t.front(), t.back()); }

ProfilePoint DwpProfile::at(double tq) const {
    if (t.empty()) throw std::logic_error("empty profile");
    if (tq < t_min() - 1e-12 || tq > t_max() + 1e-12)
        throw DomainError("t = " + std::to_string(tq) + " outside the integrated profile");
    const double dt0 = t.size() > 1 ? t[1] - t[0] : 1.0;
    long k = std::lround((tq - t.front()) / dt0);
    k = std::clamp<long>(k, 0, long(t.size()) - 1);
    const DwpRhs f{K_hat, tau_hat};
    const auto y = rk4_step(f, {rho[k], s2[k]}, tq - t[k]);
    ProfilePoint q;
    q.rho = y[0];
    q.s2 = y[1];
    const auto d = f(q.rho, q.s2);
    q.drho = d[0];
    q.ds2 = d[1];
    const double r2 = q.rho * q.rho, th = tau_hat, w = std::sqrt(1.0 - 4.0 * r2);
    const double bracket = K_hat - 2.0 * r2 * th * th / q.s2;
    const double Grho = -((-4.0 * q.rho / w) * bracket + w * (-4.0 * q.rho * th * th / q.s2)) / (2.0 * th);
    const double Gs = -w * (2.0 * r2 * th * th / (q.s2 * q.s2)) / (2.0 * th);
    q.d2rho = Grho * q.drho + Gs * q.ds2;
    q.d2s2 = -2.0 * th / (w * w * w) * q.drho;
    q.sigma = std::sqrt(q.s2);
    q.dsigma = q.ds2 / (2.0 * q.sigma);
    q.d2sigma = (0.5 * q.d2s2 - q.dsigma * q.dsigma) / q.sigma;
    q.f = w;
    q.lambda = -q.drho / q.rho;
    q.mu = -q.dsigma / q.sigma;
    q.tau = q.rho * th / q.s2;
    q.K = K_hat / q.s2;
    return q;
}

SolResidual sol_residuals(const DwpProfile& p) {
    SolResidual r;
    const size_t n = p.t.size();
    if (n < 5) return r;
    const double h = p.t[1] - p.t[0];
    auto d5 = [h](const std::vector<double>& y, size_t i) {
        return (y[i - 2] - 8 * y[i - 1] + 8 * y[i + 1] - y[i + 2]) / (12 * h);
    };
    for (size_t i = 2; i + 2 < n; ++i) {
        const double rho = p.rho[i], s2 = p.s2[i];
        const double drho = d5(p.rho, i), ds2 = d5(p.s2, i);
        const double w = std::sqrt(1 - 4 * rho * rho);
        r.sol1 = std::max(r.sol1, rel(ds2, -2 * rho * p.tau_hat / w));
        r.sol2 = std::max(r.sol2, rel(ds2 * drho / rho, p.K_hat - 2 * rho * rho * p.tau_hat * p.tau_hat / s2));
        const double lambda = -drho / rho, mu = -ds2 / (2 * s2);
        const double tau = rho * p.tau_hat / s2, K = p.K_hat / s2;
        r.t5a = std::max(r.t5a, rel(w * mu, tau));
        r.t5b = std::max(r.t5b, rel(K, 2 * mu * lambda + 2 * tau * tau));
    }
    return r;
}

double rk4_order(const DwpParams& prm, double t_eval) {
    auto run = [&](double step) {
        DwpParams q = prm;
        q.step = step;
        q.t_span = t_eval - prm.t0;
        const DwpProfile p = integrate_dwp(q);
        if (p.exit != "complete") throw DomainError("profile exits before t_eval: " + p.exit);
        return std::array<double, 2>{p.rho.back(), p.s2.back()};
    };
    const auto a = run(prm.step), b = run(prm.step / 2), c = run(prm.step / 4);
    const double e1 = std::hypot(a[0] - b[0], a[1] - b[1]);
    const double e2 = std::hypot(b[0] - c[0], b[1] - c[1]);
    return std::log2(e1 / e2);
}

Mat4 dwp_metric(const DwpProfile& p, const FlowData& flow, const Vec4& x) {
    const ProfilePoint q = p.at(x(0));
    Mat4 g = Mat4::Zero();
    g(0, 0) = 1.0;
    g.block<3, 3>(1, 1) = berger_block(q.rho * q.rho * flow.r * flow.r / 4, q.s2 * flow.s * flow.s / 4, x(1));
    return g;
}

namespace {

MetricJet<4> dwp_jet(const DwpProfile& p, const FlowData& flow, const Vec4& x) {
    const ProfilePoint q = p.at(x(0));
    const double r2 = flow.r * flow.r / 4, s2f = flow.s * flow.s / 4;
    const double a = q.rho * q.rho * r2, b = q.s2 * s2f;
    const double da = 2 * q.rho * q.drho * r2, db = q.ds2 * s2f;
    const double d2a = 2 * (q.drho * q.drho + q.rho * q.d2rho) * r2, d2b = q.d2s2 * s2f;
    const double th = x(1);
    MetricJet<4> j;
    j.g(0, 0) = 1.0;
    j.g.block<3, 3>(1, 1) = berger_block(a, b, th);
    // block is linear in (a, b)
    auto lin = [&](double ca, double cb, auto fn) { return Mat<3>(fn(ca, cb, th)); };
    j.dg[0].block<3, 3>(1, 1) = lin(da, db, berger_block);
    j.dg[1].block<3, 3>(1, 1) = lin(a, b, berger_block_dth);
    j.d2g[0][0].block<3, 3>(1, 1) = lin(d2a, d2b, berger_block);
    j.d2g[0][1].block<3, 3>(1, 1) = lin(da, db, berger_block_dth);
    j.d2g[1][0] = j.d2g[0][1];
    j.d2g[1][1].block<3, 3>(1, 1) = lin(a, b, berger_block_dth2);
    return j;
}

}  // namespace

Chart<3> DwpContext::leaf_chart(double t) const {
    const ProfilePoint q = profile.at(t);
    Chart<3> c = berger_chart("dwp_leaf", q.rho * q.rho * flow.r * flow.r / 4, q.s2 * flow.s * flow.s / 4,
                              options.half_width, options.mode, options.h);
    return c;
}

Candidate4 build_dwp_candidate(const DwpProfile& profile, const FlowData& flow, cplx base_phase,
                               const DwpBuildOptions& opt, DwpDiagnostics* diag) {
    if (std::abs(std::abs(base_phase) - 1.0) > 1e-12) throw std::invalid_argument("base_phase must be a unit complex");
    if (std::abs(flow.tau_hat - profile.tau_hat) > 1e-12 || std::abs(flow.K_hat - profile.K_hat) > 1e-12)
        throw std::invalid_argument("flow constants do not match the profile");
    const double margin = 3 * opt.h + opt.h_alpha;
    if (opt.t_lo - margin < profile.t_min() || opt.t_hi + margin > profile.t_max())
        throw ConstructionError("chart t-range [" + std::to_string(opt.t_lo) + ", " + std::to_string(opt.t_hi) +
                                "] is not inside the integrated profile (exit: " + profile.exit + ")");

    auto ctx = std::make_shared<DwpContext>();
    ctx->profile = profile;
    ctx->flow = flow;
    ctx->options = opt;

    Chart<4> chart;
    chart.name = "dwp";
    const double w = opt.half_width;
    chart.lo = Vec4(opt.t_lo, kPi / 2 - w, -w, -w);
    chart.hi = Vec4(opt.t_hi, kPi / 2 + w, w, w);
    {
        auto prof = std::make_shared<const DwpProfile>(profile);
        chart.metric = [prof, flow](const Vec4& x) { return dwp_metric(*prof, flow, x); };
        chart.analytic = [prof, flow](const Vec4& x) { return dwp_jet(*prof, flow, x); };
    }
    chart.mode = opt.mode;
    chart.h = opt.h;
    const Vec4 eta_c(0.0, 0.0, 0.0, 2.0 / flow.r);

    // s-frame without the s4 sign; the sign is fixed once at the centre.
    auto raw_frame = [eta_c](const FrameData<4>& F) {
        const Vec4 eta = F.Einv * eta_c;
        const Vec4 s1 = -eta / eta.norm();
        const Vec4 s2 = F.Einv * Vec4::Unit(0);
        Vec4 s3 = Vec4::Unit(1) - Vec4::Unit(1).dot(s1) * s1 - Vec4::Unit(1).dot(s2) * s2;
        s3.normalize();
        Mat4 S;
        S << s1, s2, s3, complete_basis(s1, s2, s3);
        return S;
    };
    {
        const Vec4 xc = chart.center();
        const FrameData<4> F = frame_data<4>(chart, xc);
        const Mat4 S = raw_frame(F);
        Mat4 nab;  // coordinate covariant derivative of eta_c
        for (int i = 0; i < 4; ++i) nab.col(i) = F.Gamma[i] * eta_c;
        const Vec4 dEta = F.Einv * (nab * (F.E * S.col(2)));
        const double rho = (F.Einv * eta_c).norm();
        const double tau0 = dEta.dot(S.col(3)) / rho;
        const ProfilePoint q = profile.at(xc(0));
        const double target = q.f * q.mu;
        ctx->s4_sign = (tau0 * target >= 0) ? 1 : -1;
        ctx->orientation = -ctx->s4_sign;  // det S = s4_sign
    }
    chart.orientation = ctx->orientation;
    const int eps4 = ctx->s4_sign;
    auto sframe_of = [raw_frame, eps4](const FrameData<4>& F) {
        Mat4 S = raw_frame(F);
        S.col(3) *= eps4;
        return S;
    };
    {
        Chart<4> ch = chart;
        ctx->sframe = [ch, sframe_of](const Vec4& x) { return sframe_of(frame_at<4>(ch, x)); };
    }

    Mat4 Js = Mat4::Zero();
    Js(1, 0) = 1;
    Js(0, 1) = -1;
    Js(3, 2) = 1;
    Js(2, 3) = -1;
    auto A_at = [ctx, sframe_of](const Vec4& x, const FrameData<4>& F) -> Mat4 {
        const ProfilePoint q = ctx->profile.at(x(0));
        const double AE = -q.lambda * q.rho / q.f, AP = q.mu * q.rho;
        Mat4 As = Mat4::Zero();
        As(1, 0) = AE;
        As(0, 1) = -AE;
        As(3, 2) = AP;
        As(2, 3) = -AP;
        const Mat4 S = sframe_of(F);
        return S * As * S.transpose();
    };

    const int o = ctx->orientation;
    const auto& G = gamma_rep<4>();
    const CMat4 Pp = 0.5 * (CMat4::Identity() + double(o) * G.volume_c);
    const CMat4 Pm = 0.5 * (CMat4::Identity() - double(o) * G.volume_c);

    struct Section {
        Spinor4 minus;
        double sv;
    };
    auto raw_minus = [=](const FrameData<4>& F) -> Section {
        const Mat4 J = sframe_of(F) * Js * sframe_of(F).transpose();
        Eigen::Matrix<cplx, 20, 4> M;
        for (int i = 0; i < 4; ++i)
            M.block<4, 4>(4 * i, 0) = (vec_action<4>(Vec4(J.col(i))) - kI * G.gamma[i]) * Pm;
        M.block<4, 4>(16, 0) = Pp;
        Eigen::JacobiSVD<Eigen::Matrix<cplx, 20, 4>> svd(M, Eigen::ComputeFullV);
        return {svd.matrixV().col(3), svd.singularValues()(3)};
    };
    int gauge_index = 0;
    {
        const Section s = raw_minus(frame_at<4>(chart, chart.center()));
        s.minus.cwiseAbs().maxCoeff(&gauge_index);
    }
    auto section = [=](const Vec4& x, double* sv) -> Spinor4 {
        const FrameData<4> F = frame_at<4>(chart, x);
        Section s = raw_minus(F);
        const cplx c = s.minus(gauge_index);
        if (std::abs(c) < 1e-8) throw ConstructionError("section gauge component vanishes at " + format_point<4>(x));
        Spinor4 m = s.minus * (std::conj(c) / std::abs(c));
        const Vec4 eta = F.Einv * eta_c;
        const double rho = eta.norm();
        const double f = std::sqrt(1.0 - 4.0 * rho * rho);
        const Vec4 xi = 2.0 / (f - 1.0) * eta;
        const Spinor4 v = vec_action<4>(xi) * m + m;
        if (sv) *sv = s.sv;
        return v.normalized();
    };
    const double ha = opt.h_alpha;
    auto alpha = [=](const Vec4& x, int k) -> cplx {
        const FrameData<4> F = frame_data<4>(chart, x);
        const Spinor4 s = section(x, nullptr);
        Vec4 xp = x, xm = x;
        xp(k) += ha;
        xm(k) -= ha;
        const Spinor4 ds = (section(xp, nullptr) - section(xm, nullptr)) / (2 * ha);
        const Mat4 A = A_at(x, F);
        const Spinor4 nh = ds + 0.5 * (endo_action<4>(F.W[k]) * s) - vec_action<4>(Vec4(A * F.Einv.col(k))) * s;
        return herm(nh, s);
    };

    const auto [gl_x, gl_w] = gauss_legendre(opt.gl_nodes);
    const Vec4 xc = chart.center();
    auto psi = [=](const Vec4& x) -> Spinor4 {
        const auto path = axis_path<4>(xc, x);
        cplx integral = 0.0;
        for (size_t s = 0; s + 1 < path.size(); ++s) {
            const Vec4 d = path[s + 1] - path[s];
            int k = 0;
            d.cwiseAbs().maxCoeff(&k);
            for (size_t n = 0; n < gl_x.size(); ++n) integral += gl_w[n] * d(k) * alpha(path[s] + gl_x[n] * d, k);
        }
        return base_phase * std::exp(-integral) * section(x, nullptr);
    };

    DwpDiagnostics dg;
    dg.orientation = ctx->orientation;
    dg.s4_sign = ctx->s4_sign;
    {
        Chart<4> probe_chart = chart;
        const auto pts = sample_grid<4>(probe_chart, {2, 2, 2, 2});
        std::vector<Vec4> probes(pts.begin(), pts.end());
        probes.push_back(xc);
        const double hd = 1e-3;
        for (const auto& x : probes) {
            double sv = 0.0;
            section(x, &sv);
            dg.gauge_sv = std::max(dg.gauge_sv, sv);
            const Vec4 eta = frame_at<4>(chart, x).Einv * eta_c;
            dg.rho_match = std::max(dg.rho_match, std::abs(eta.norm() - profile.at(x(0)).rho));
            // d alpha on the (t, theta) and mixed coordinate planes
            for (int i = 0; i < 4; ++i)
                for (int j = i + 1; j < 4; ++j) {
                    Vec4 xpi = x, xmi = x, xpj = x, xmj = x;
                    xpi(i) += hd;
                    xmi(i) -= hd;
                    xpj(j) += hd;
                    xmj(j) -= hd;
                    const cplx da = (alpha(xpi, j) - alpha(xmi, j)) / (2 * hd) - (alpha(xpj, i) - alpha(xmj, i)) / (2 * hd);
                    dg.dalpha = std::max(dg.dalpha, std::abs(da));
                }
        }
    }
    if (diag) *diag = dg;
    if (dg.gauge_sv > 1e-8)
        throw ConstructionError("E-conditions inconsistent: smallest singular value " + std::to_string(dg.gauge_sv));
    if (opt.enforce && dg.dalpha > opt.flat_tol)
        throw ConstructionError("induced connection on E is not flat: |d alpha| = " + std::to_string(dg.dalpha));

    Candidate4 c;
    c.chart = chart;
    c.label = "dwp";
    c.A = [A_at, chart](const Vec4& x) { return A_at(x, frame_at<4>(chart, x)); };
    c.psi = psi;
    c.dwp = ctx;
    return c;
}

}  // namespace sks
