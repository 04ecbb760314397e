#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace sks::cli;

// Flags shared by verify and build-dwp; applied over the config file.
struct Overrides {
    std::string config_path;
    std::string fixture;
    std::vector<int> grid;
    double h = 0.0;
    std::string deriv_mode;
    std::vector<std::string> tolerances;
    std::string suites;
    std::string output;
    std::string corrupt;
    int threads = 0;
    double K_hat = 0, tau_hat = 0, rho0 = 0, sigma0 = 0, t_span = 0, step = 0;
};

void add_common(CLI::App* cmd, Overrides& o, bool with_fixture) {
    cmd->add_option("--config", o.config_path, "RunConfig JSON file");
    if (with_fixture)
        cmd->add_option("--fixture", o.fixture, "flat|s2|product3d|s2xr2_plus|s2xr2_minus|s2xr2_aeta_zero|dwp");
    cmd->add_option("--grid", o.grid, "samples per axis (one value or four)")->delimiter(',');
    cmd->add_option("--h", o.h, "finite-difference step");
    cmd->add_option("--deriv-mode", o.deriv_mode, "fd|analytic");
    cmd->add_option("--tol", o.tolerances, "tolerance override ID=VALUE or CLASS=VALUE (fd, curv, alg, ode)");
    cmd->add_option("--suites", o.suites, "comma-separated subset of S1,S2,S3,S4");
    cmd->add_option("--output,-o", o.output, "output path (default stdout)");
    cmd->add_option("--corrupt", o.corrupt, "A:<factor>, A+:<eps> or psi:<eps>");
    cmd->add_option("--threads", o.threads, "worker threads (0: hardware concurrency)");
    cmd->add_option("--K-hat", o.K_hat, "DWP: K_hat");
    cmd->add_option("--tau-hat", o.tau_hat, "DWP: tau_hat");
    cmd->add_option("--rho0", o.rho0, "DWP: rho(t0)");
    cmd->add_option("--sigma0", o.sigma0, "DWP: sigma(t0)");
    cmd->add_option("--t-span", o.t_span, "DWP: signed integration span");
    cmd->add_option("--step", o.step, "DWP: RK4 step");
}

RunConfig resolve(CLI::App* cmd, const Overrides& o) {
    RunConfig c;
    if (!o.config_path.empty()) {
        std::ifstream f(o.config_path);
        if (!f) throw ConfigError("cannot read config '" + o.config_path + "'");
        std::stringstream ss;
        ss << f.rdbuf();
        c = config_from_json(ss.str());
    }
    auto set = [cmd](const char* name) {
        const CLI::Option* opt = cmd->get_option_no_throw(name);
        return opt && opt->count() > 0;
    };
    if (set("--fixture")) c.fixture = o.fixture;
    if (set("--grid")) {
        if (o.grid.size() == 1)
            c.grid = {o.grid[0], o.grid[0], o.grid[0], o.grid[0]};
        else if (o.grid.size() == 4)
            c.grid = {o.grid[0], o.grid[1], o.grid[2], o.grid[3]};
        else
            throw ConfigError("--grid takes one or four values");
    }
    if (set("--h")) c.h = o.h;
    if (set("--deriv-mode")) c.deriv_mode = o.deriv_mode;
    for (const auto& t : o.tolerances) {
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("--tol expects ID=VALUE, got '" + t + "'");
        try {
            c.tolerances[t.substr(0, eq)] = std::stod(t.substr(eq + 1));
        } catch (const std::exception&) {
            throw ConfigError("--tol value is not a number: '" + t + "'");
        }
    }
    if (set("--suites")) {
        c.suites.clear();
        std::stringstream ss(o.suites);
        for (std::string s; std::getline(ss, s, ',');)
            if (!s.empty()) c.suites.push_back(s);
    }
    if (set("--output")) c.output = o.output;
    if (set("--corrupt")) c.corrupt = o.corrupt;
    if (set("--threads")) c.threads = o.threads;
    const bool any_dwp = set("--K-hat") || set("--tau-hat") || set("--rho0") || set("--sigma0") || set("--t-span") ||
                         set("--step");
    if (any_dwp) {
        DwpConfig d = c.dwp.value_or(DwpConfig{});
        if (set("--K-hat")) d.K_hat = o.K_hat;
        if (set("--tau-hat")) d.tau_hat = o.tau_hat;
        if (set("--rho0")) d.rho0 = o.rho0;
        if (set("--sigma0")) d.sigma0 = o.sigma0;
        if (set("--t-span")) d.t_span = o.t_span;
        if (set("--step")) d.step = o.step;
        c.dwp = d;
    }
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical verification of skew Killing spinor identities"};
    app.set_help_flag("--help", "print this help message and exit");
    app.require_subcommand(1);

    Overrides vo;
    auto* verify = app.add_subcommand("verify", "build a fixture and run identity suites");
    add_common(verify, vo, true);

    Overrides bo;
    BuildDwpRequest breq;
    auto* build = app.add_subcommand("build-dwp", "integrate a doubly warped profile and optionally verify it");
    add_common(build, bo, false);
    build->add_flag("--verify", breq.verify, "build the candidate and run its suites");
    build->add_option("--report", breq.report_path, "report path when --verify is given");
    build->add_option("--emit-table", breq.table_path, "TSV table (t, rho, sigma, tau, K)");

    ScanRequest sreq;
    auto* scan = app.add_subcommand("scan-radius", "flatness residual of the sphere construction over radii");
    scan->add_option("--r-min", sreq.r_min, "smallest radius");
    scan->add_option("--r-max", sreq.r_max, "largest radius");
    scan->add_option("--samples", sreq.samples, "number of radii");
    scan->add_option("--deriv-mode", sreq.deriv_mode, "fd|analytic");

    bool list_json = false;
    auto* list = app.add_subcommand("list-identities", "print the identity catalog");
    list->add_flag("--json", list_json, "JSON output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*verify) return cmd_verify(resolve(verify, vo), std::cout, std::cerr);
        if (*build) return cmd_build_dwp(resolve(build, bo), breq, std::cout, std::cerr);
        if (*scan) return cmd_scan_radius(sreq, std::cout, std::cerr);
        if (*list) return cmd_list_identities(list_json, std::cout);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    return kConfigError;
}
