#pragma once

#include "skewspin/verifier.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sks::cli {

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kConfigError = 2, kConstructionError = 3 };

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DwpConfig {
    double K_hat = 4.0;
    double tau_hat = 1.0;
    double rho0 = 0.3;
    double sigma0 = 1.0;
    double t_span = 0.5;
    double step = 1e-3;
};

struct RunConfig {
    std::string fixture = "flat";
    std::array<int, 4> grid{5, 5, 5, 5};
    double h = 1e-3;
    std::string deriv_mode = "fd";  // fd | analytic
    std::map<std::string, double> tolerances;  // identity id or class name (fd, curv, alg, ode)
    std::optional<DwpConfig> dwp;
    std::vector<std::string> suites;  // empty: the fixture's designated suites
    std::string output;               // empty: stdout
    std::string corrupt;              // A:<factor> | A+:<eps> | psi:<eps>
    int threads = 0;
};

const std::vector<std::string>& fixture_names();

RunConfig config_from_json(const std::string& text);
std::string config_to_json(const RunConfig& c);
// Throws ConfigError on violated invariants; fills fixture defaults (suites, dwp).
void validate(RunConfig& c);

std::vector<Suite> designated_suites(const std::string& fixture);
VerifyOptions verify_options(const RunConfig& c);
DwpParams dwp_params(const DwpConfig& d);

// Fixture construction; ConstructionError and DomainError propagate.
Candidate4 build_fixture(const RunConfig& c);
Candidate4 apply_corruption(Candidate4 c, const std::string& spec);

// Report for the 2-dimensional sphere fixture (K0 and connection flatness).
ResidualReport verify_s2(const RunConfig& c);

// Commands write their primary artifact to `out` and diagnostics to `err`.
int cmd_verify(RunConfig c, std::ostream& out, std::ostream& err);

struct BuildDwpRequest {
    bool verify = false;
    std::string report_path;  // report destination when verify is set; empty: stderr summary only
    std::string table_path;   // TSV (t, rho, sigma, tau, K)
};
int cmd_build_dwp(RunConfig c, const BuildDwpRequest& req, std::ostream& out, std::ostream& err);

struct ScanRequest {
    double r_min = 0.3, r_max = 0.8;
    int samples = 51;
    std::string deriv_mode = "fd";
};
int cmd_scan_radius(const ScanRequest& req, std::ostream& out, std::ostream& err);

int cmd_list_identities(bool json, std::ostream& out);

std::string profile_table(const DwpProfile& p);

}  // namespace sks::cli
