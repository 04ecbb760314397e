#pragma once

#include "skewspin/constructors.hpp"

#include <map>
#include <optional>

namespace sks {

enum class Suite { S1, S2, S3, S4 };
enum class TolClass { Fd, Curv, Alg, Ode };

std::string suite_name(Suite s);
Suite parse_suite(const std::string& s);

struct Tolerances {
    double fd = 5e-5;
    double curv = 5e-4;
    double alg = 1e-8;
    double ode = 1e-7;

    double of(TolClass c) const;
};

struct VerifyOptions {
    std::array<int, 4> grid{5, 5, 5, 5};
    Tolerances tol;
    std::map<std::string, double> overrides;  // per-identity tolerance
    double eps_den = 1e-5;
    double eps_region = 1e-6;
    bool auto_flip = true;  // S3: flip orientation when f < 0 at the grid centre
    int threads = 0;        // 0: hardware concurrency
};

struct IdentityInfo {
    std::string id;
    Suite suite;
    std::string anchor;
    std::string statement;
    TolClass tol;
    bool analytic_only = false;
    bool global = false;
};

const std::vector<IdentityInfo>& list_identities();
const IdentityInfo& identity_info(const std::string& id);

struct IdentityResult {
    std::string id;
    std::string anchor;
    Suite suite = Suite::S1;
    std::optional<double> max_residual;
    std::optional<Vec4> argmax_point;
    int applicable_points = 0;
    int skipped_points = 0;  // gated points where a denominator fell below eps_den
    double tolerance = 0.0;
    bool pass = true;
    std::string status = "not_applicable";  // pass | fail | not_applicable
    std::string note;
};

struct ReportMeta {
    std::string chart;
    std::string label;
    std::array<int, 4> grid{};
    double h = 0.0;
    std::string deriv_mode;
    int orientation = 1;
    bool flipped = false;
    int points = 0;
    std::vector<std::string> suites;
    std::map<std::string, double> extra;
};

struct ResidualReport {
    std::string suite;
    std::vector<IdentityResult> identities;
    ReportMeta meta;

    bool passed() const;
    const IdentityResult* find(const std::string& id) const;
};

ResidualReport run_suites(const Candidate4& cand, const std::vector<Suite>& suites, const VerifyOptions& opt = {});
ResidualReport run_suite(const Candidate4& cand, Suite suite, const VerifyOptions& opt = {});
IdentityResult check_identity(const Candidate4& cand, const std::string& id, const VerifyOptions& opt = {});

std::string report_to_json(const ResidualReport& r, int indent = 2);
std::string profile_to_json(const DwpProfile& p, int indent = 2);

// Restriction of a DWP candidate to the leaf through x (orthogonal to nu = s2).
struct LeafRestriction {
    double eres = 0.0;          // max residual of the leaf Killing-type equations over psi+-
    double transversal = 0.0;   // max residual of the transversal equations
    double a_direct = 0.0, b_direct = 0.0;    // from lambda, f, tau
    double a_leaf = 0.0, b_leaf = 0.0;        // from the leaf scalar curvature
    double lambda = 0.0, mu = 0.0, tau = 0.0, f = 0.0, leaf_scalar = 0.0;
};
LeafRestriction leaf_restriction(const Candidate4& cand, const Vec4& x);

}  // namespace sks
