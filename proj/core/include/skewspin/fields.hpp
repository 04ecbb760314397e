#pragma once

#include "skewspin/geometry.hpp"

#include <memory>

namespace sks {

struct DwpContext;

template <int N>
using MatField = std::function<Mat<N>(const Vec<N>&)>;
template <int N>
using SpinorField = std::function<Spinor<N>(const Vec<N>&)>;

// A (chart, Killing map, spinor) triple. A and psi are expressed in the
// chart's Gram-Schmidt frame; spinor components are only meaningful in that
// gauge. The orientation sign lives on the chart.
template <int N>
struct Candidate {
    Chart<N> chart;
    MatField<N> A;
    SpinorField<N> psi;
    bool normalized = true;
    std::string label;
    std::shared_ptr<const DwpContext> dwp;

    int orientation() const { return chart.orientation; }
};

using Candidate4 = Candidate<4>;

struct RegionFlags {
    bool M0 = false;
    bool M1 = false;
    bool Mprime = false;
    bool Mdoubleprime = false;
};

struct PointFields {
    Spinor4 psi, plus, minus;
    Vec4 eta = Vec4::Zero();
    Vec4 eta_imag = Vec4::Zero();
    double f = 1.0;
    double rho = 0.0;
    bool has_xi = false;
    Vec4 xi = Vec4::Zero();
    Mat4 J = Mat4::Zero();
    RegionFlags flags;
};

Vec4 compute_eta(const Spinor4& psi, int orientation);
// Imaginary part of <e_i . psi+, psi->, reported as a diagnostic.
Vec4 compute_eta_imag(const Spinor4& psi, int orientation);
std::pair<double, double> compute_f_rho(const Spinor4& psi, int orientation, bool normalized = true);
RegionFlags region_flags(const Spinor4& psi, int orientation, double eps = 1e-6);
PointFields derive_fields(const Spinor4& psi, int orientation, double eps = 1e-6);

// Remark-3.3 orientation flip: same components, opposite orientation.
Candidate4 flip_orientation(const Candidate4& c);

struct FlipCheck {
    double xi = 0.0;
    double eta = 0.0;
    double f = 0.0;
    double roundtrip = 0.0;
    bool xi_defined = true;
};
FlipCheck flip_check(const Spinor4& psi, int orientation);

// Adapted frame s1 = -eta/rho, s2 = J s1, s3 in {eta, J eta}-perp, s4 = J s3.
// Columns of S are frame components of s1..s4.
struct AdaptedFrame {
    Mat4 S = Mat4::Identity();
    double A_E = 0.0;
    double A_P = 0.0;
    double commutator = 0.0;  // |AJ - JA|
    double relation = 0.0;    // residual of A J eta = -A_E eta, A J Z = -A_P Z
    int seed_index = -1;
};

// seed_index < 0 picks the first frame vector whose projection to P has
// norm >= 0.3; otherwise the given vector is used.
AdaptedFrame frame_5_2(const Mat4& A, const Vec4& eta, const Mat4& J, int seed_index = -1);

inline Mat4 wedge_endo(const Vec4& u, const Vec4& v) { return v * u.transpose() - u * v.transpose(); }

}  // namespace sks
