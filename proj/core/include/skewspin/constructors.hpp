#pragma once

#include "skewspin/fields.hpp"

#include <optional>

namespace sks {

class ConstructionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ------------------------------------------------------------- flat

enum class FlatCorruption { None, AddA, PerturbPsi };

Candidate4 build_flat_parallel(FlatCorruption corruption = FlatCorruption::None, double eps = 0.0,
                               DerivMode mode = DerivMode::FiniteDifference, double h = 1e-3);

// ------------------------------------------------------------- S^2

struct S2Options {
    double radius = 0.5;
    int j_sign = +1;  // A = j_sign * J
    double half_width = 0.6;
    DerivMode mode = DerivMode::Analytic;
    double h = 1e-3;
    int grid = 9;  // per axis for the flatness and K0 checks
    double flat_tol = 5e-4;
    double k0_tol = 5e-5;
    bool enforce = true;  // throw ConstructionError on flatness failure
};

struct S2Report {
    double flatness = 0.0;  // max |R-hat(e1,e2)| over the grid
    double k0 = 0.0;        // max skew Killing residual over the grid
    double loop = 0.0;      // transport defect around a coordinate rectangle
    int steps_per_segment = 0;
};

Chart<2> sphere_chart(double radius, double half_width, DerivMode mode, double h);
double s2_flatness(const Candidate<2>& c, int grid);
double s2_k0(const Candidate<2>& c, int grid);

Candidate<2> build_s2_skew_killing(const Spinor<2>& base, const S2Options& opt = {},
                                   S2Report* report = nullptr);

struct RadiusScanRow {
    double radius;
    double residual;
};
std::vector<RadiusScanRow> scan_radius(double r_min, double r_max, int samples,
                                       DerivMode mode = DerivMode::FiniteDifference, int grid = 5);

// --------------------------------------------------- products (4D)

struct ProductOptions {
    DerivMode mode = DerivMode::Analytic;
    double h = 1e-3;
    double half_width = 0.5;
    Spinor<2> base = Spinor<2>(cplx(std::cos(0.4), 0.0), cplx(std::sin(0.4), 0.0));
};

// Example 4.1: N = S^2(4) x R_z, M = R_t x N with chart (t, theta, phi, z).
Candidate4 build_product_3d(const ProductOptions& opt = {});

enum class S2xR2Mode { Plus, Minus };
enum class S2xR2Combo { AetaNonzero, AetaZero };
// Example 4.2 with chart (theta, phi, x, y).
Candidate4 build_s2xr2(S2xR2Mode mode, S2xR2Combo combo, const ProductOptions& opt = {});

// Unitary intertwiner from a block representation to the fixed 4D gauge.
CMat4 block_to_gauge(const std::array<CMat4, 4>& block);

// ------------------------------------------------------------- DWP

struct FlowData {
    double r = 1.0, s = 1.0;
    Chart<3> chart;       // (theta, phi, chi)
    double tau_hat = 1.0;  // r s^-2 for the unit round seed
    double K_hat = 4.0;    // 4 s^-2
    double tau_hat_measured = 0.0;
    double K_hat_measured = 0.0;
    double unit_residual = 0.0;  // max | |eta_hat| - 1 |
    double tau_spread = 0.0;     // max deviation of measured tau_hat over samples
    int j_sign = 1;              // orientation of J-hat on eta_hat-perp
};

Mat<3> berger_metric(double r, double s, const Vec<3>& x);
FlowData berger_flow(double r, double s, DerivMode mode = DerivMode::Analytic);

struct DwpParams {
    double K_hat = 4.0;
    double tau_hat = 1.0;
    double rho0 = 0.3;
    double sigma0 = 1.0;
    double t0 = 0.0;
    double t_span = 0.5;
    double step = 1e-3;
    double delta = 1e-3;
    double eps_den = 1e-5;
};

struct ProfilePoint {
    double rho, sigma, drho, dsigma, d2rho, d2sigma;
    double s2, ds2, d2s2;
    double lambda, mu, tau, K, f;
};

struct DwpProfile {
    std::vector<double> t, rho, sigma, lambda, mu, tau, K;
    std::vector<double> s2;
    double K_hat = 4.0;
    double tau_hat = 1.0;
    double step = 1e-3;
    std::string exit = "complete";

    // Evaluation between knots: one RK4 step from the nearest knot.
    ProfilePoint at(double t) const;
    double t_min() const;
    double t_max() const;
};

// Right-hand side of the (rho, sigma^2) system.
struct DwpRhs {
    double K_hat, tau_hat;
    std::array<double, 2> operator()(double rho, double s2) const;
};

DwpProfile integrate_dwp(const DwpParams& p);

struct SolResidual {
    double sol1 = 0.0;
    double sol2 = 0.0;
    double t5a = 0.0;  // |f mu - tau|
    double t5b = 0.0;  // |K - 2 mu lambda - 2 tau^2|
};
SolResidual sol_residuals(const DwpProfile& p);

// Self-convergence order of rho and sigma^2 at t_eval from steps h, h/2, h/4.
double rk4_order(const DwpParams& p, double t_eval);

struct DwpBuildOptions {
    double t_lo = 0.005, t_hi = 0.065;
    double half_width = 0.3;
    DerivMode mode = DerivMode::FiniteDifference;
    double h = 1e-3;
    double h_alpha = 1e-4;
    int gl_nodes = 12;
    double flat_tol = 5e-4;
    bool enforce = true;
};

struct DwpDiagnostics {
    double dalpha = 0.0;      // max |d alpha| at probe points
    double gauge_sv = 0.0;    // largest smallest-singular-value of the E system
    double rho_match = 0.0;   // max | |eta| - rho(t) |
    int orientation = 1;
    int s4_sign = 1;
};

struct DwpContext {
    DwpProfile profile;
    FlowData flow;
    DwpBuildOptions options;
    int s4_sign = 1;
    int orientation = 1;
    std::function<Mat4(const Vec4&)> sframe;  // frame components of s1..s4
    Chart<3> leaf_chart(double t) const;
};

Mat4 dwp_metric(const DwpProfile& p, const FlowData& flow, const Vec4& x);
Candidate4 build_dwp_candidate(const DwpProfile& profile, const FlowData& flow, cplx base_phase,
                               const DwpBuildOptions& opt = {}, DwpDiagnostics* diag = nullptr);

}  // namespace sks
