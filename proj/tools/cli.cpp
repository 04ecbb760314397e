#include "cli.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace sks::cli {

using nlohmann::json;

const std::vector<std::string>& fixture_names() {
    static const std::vector<std::string> names{"flat",        "s2",          "product3d",       "s2xr2_plus",
                                                "s2xr2_minus", "s2xr2_aeta_zero", "dwp"};
    return names;
}

namespace {

const std::vector<std::string> kClassNames{"fd", "curv", "alg", "ode"};

template <class T>
T get_as(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("field '") + key + "': " + e.what());
    }
}

void reject_unknown(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
    for (const auto& [k, v] : j.items()) {
        (void)v;
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            throw ConfigError("unknown field '" + k + "' in " + where);
    }
}

DerivMode deriv_mode(const std::string& s) { return s == "analytic" ? DerivMode::Analytic : DerivMode::FiniteDifference; }

void write_text(const std::string& path, const std::string& text, std::ostream& fallback) {
    if (path.empty() || path == "-") {
        fallback << text;
        return;
    }
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot open '" + path + "' for writing");
    f << text;
}

}  // namespace

RunConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(j, {"fixture", "grid", "h", "deriv_mode", "tolerances", "dwp", "suites", "output", "corrupt", "threads"},
                   "config");
    RunConfig c;
    if (j.contains("fixture")) c.fixture = get_as<std::string>(j, "fixture");
    if (j.contains("grid")) {
        const auto g = get_as<std::vector<int>>(j, "grid");
        if (g.size() == 1)
            c.grid = {g[0], g[0], g[0], g[0]};
        else if (g.size() == 4)
            c.grid = {g[0], g[1], g[2], g[3]};
        else
            throw ConfigError("grid must have 1 or 4 entries");
    }
    if (j.contains("h")) c.h = get_as<double>(j, "h");
    if (j.contains("deriv_mode")) c.deriv_mode = get_as<std::string>(j, "deriv_mode");
    if (j.contains("tolerances")) c.tolerances = get_as<std::map<std::string, double>>(j, "tolerances");
    if (j.contains("dwp") && !j.at("dwp").is_null()) {
        const json& d = j.at("dwp");
        if (!d.is_object()) throw ConfigError("dwp must be an object");
        reject_unknown(d, {"K_hat", "tau_hat", "rho0", "sigma0", "t_span", "step"}, "dwp");
        DwpConfig w;
        if (d.contains("K_hat")) w.K_hat = get_as<double>(d, "K_hat");
        if (d.contains("tau_hat")) w.tau_hat = get_as<double>(d, "tau_hat");
        if (d.contains("rho0")) w.rho0 = get_as<double>(d, "rho0");
        if (d.contains("sigma0")) w.sigma0 = get_as<double>(d, "sigma0");
        if (d.contains("t_span")) w.t_span = get_as<double>(d, "t_span");
        if (d.contains("step")) w.step = get_as<double>(d, "step");
        c.dwp = w;
    }
    if (j.contains("suites")) c.suites = get_as<std::vector<std::string>>(j, "suites");
    if (j.contains("output")) c.output = get_as<std::string>(j, "output");
    if (j.contains("corrupt")) c.corrupt = get_as<std::string>(j, "corrupt");
    if (j.contains("threads")) c.threads = get_as<int>(j, "threads");
    return c;
}

std::string config_to_json(const RunConfig& c) {
    json j = {{"fixture", c.fixture}, {"grid", c.grid},   {"h", c.h},           {"deriv_mode", c.deriv_mode},
              {"tolerances", c.tolerances}, {"suites", c.suites}, {"output", c.output}, {"corrupt", c.corrupt},
              {"threads", c.threads}};
    if (c.dwp)
        j["dwp"] = {{"K_hat", c.dwp->K_hat},   {"tau_hat", c.dwp->tau_hat}, {"rho0", c.dwp->rho0},
                    {"sigma0", c.dwp->sigma0}, {"t_span", c.dwp->t_span},   {"step", c.dwp->step}};
    else
        j["dwp"] = nullptr;
    return j.dump(2);
}

std::vector<Suite> designated_suites(const std::string& fixture) {
    if (fixture == "dwp") return {Suite::S1, Suite::S3, Suite::S4};
    if (fixture == "s2") return {Suite::S1};
    return {Suite::S1, Suite::S2};
}

void validate(RunConfig& c) {
    const auto& f = fixture_names();
    if (std::find(f.begin(), f.end(), c.fixture) == f.end()) throw ConfigError("unknown fixture '" + c.fixture + "'");
    for (int n : c.grid)
        if (n < 3) throw ConfigError("grid counts must be at least 3 per axis");
    if (!(c.h > 0) || !std::isfinite(c.h)) throw ConfigError("h must be positive");
    if (c.deriv_mode != "fd" && c.deriv_mode != "analytic")
        throw ConfigError("deriv_mode must be 'fd' or 'analytic'");
    for (const auto& [k, v] : c.tolerances) {
        const bool cls = std::find(kClassNames.begin(), kClassNames.end(), k) != kClassNames.end();
        if (!cls) {
            try {
                identity_info(k);
            } catch (const std::invalid_argument&) {
                throw ConfigError("tolerance override for unknown identity '" + k + "'");
            }
        }
        if (!(v > 0)) throw ConfigError("tolerance for '" + k + "' must be positive");
    }
    if (c.fixture == "dwp") {
        if (!c.dwp) c.dwp = DwpConfig{};
        if (!(c.dwp->step > 0)) throw ConfigError("dwp.step must be positive");
        if (!(c.dwp->rho0 > 0 && c.dwp->rho0 < 0.5)) throw ConfigError("dwp.rho0 must lie in (0, 1/2)");
        if (!(c.dwp->sigma0 > 0)) throw ConfigError("dwp.sigma0 must be positive");
        if (c.dwp->tau_hat == 0) throw ConfigError("dwp.tau_hat must be nonzero");
    } else if (c.dwp) {
        throw ConfigError("dwp parameters are only valid with fixture 'dwp'");
    }
    if (c.suites.empty())
        for (Suite s : designated_suites(c.fixture)) c.suites.push_back(suite_name(s));
    for (const auto& s : c.suites) {
        try {
            parse_suite(s);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    if (!c.corrupt.empty()) {
        const auto colon = c.corrupt.find(':');
        const std::string kind = c.corrupt.substr(0, colon);
        if (colon == std::string::npos || (kind != "A" && kind != "A+" && kind != "psi"))
            throw ConfigError("corrupt must be A:<factor>, A+:<eps> or psi:<eps>");
        try {
            std::stod(c.corrupt.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("corrupt amount is not a number: '" + c.corrupt + "'");
        }
    }
    if (c.threads < 0) throw ConfigError("threads must be non-negative");
}

VerifyOptions verify_options(const RunConfig& c) {
    VerifyOptions o;
    o.grid = c.grid;
    o.threads = c.threads;
    for (const auto& [k, v] : c.tolerances) {
        if (k == "fd")
            o.tol.fd = v;
        else if (k == "curv")
            o.tol.curv = v;
        else if (k == "alg")
            o.tol.alg = v;
        else if (k == "ode")
            o.tol.ode = v;
        else
            o.overrides[k] = v;
    }
    return o;
}

DwpParams dwp_params(const DwpConfig& d) {
    DwpParams p;
    p.K_hat = d.K_hat;
    p.tau_hat = d.tau_hat;
    p.rho0 = d.rho0;
    p.sigma0 = d.sigma0;
    p.t_span = d.t_span;
    p.step = d.step;
    return p;
}

Candidate4 apply_corruption(Candidate4 c, const std::string& spec) {
    if (spec.empty()) return c;
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const double v = std::stod(spec.substr(colon + 1));
    const Vec4 xc = c.chart.center();
    if (kind == "A") {
        auto A = c.A;
        c.A = [A, v](const Vec4& x) { return Mat4(v * A(x)); };
    } else if (kind == "A+") {
        auto A = c.A;
        const Mat4 B = v * wedge_endo(Vec4::Unit(0), Vec4::Unit(1));
        c.A = [A, B](const Vec4& x) { return Mat4(A(x) + B); };
    } else {
        // rotate psi towards a fixed spinor by an angle growing along the chart
        auto psi = c.psi;
        const Spinor4 w(cplx(0.0, 0.0), cplx(1.0, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0));
        c.psi = [psi, w, v, xc](const Vec4& x) -> Spinor4 {
            const double a = v * ((x(0) - xc(0)) + 0.5 * (x(2) - xc(2)));
            return std::cos(a) * psi(x) + std::sin(a) * w;
        };
    }
    c.label += "+corrupt(" + spec + ")";
    return c;
}

Candidate4 build_fixture(const RunConfig& c) {
    const DerivMode mode = deriv_mode(c.deriv_mode);
    Candidate4 cand;
    ProductOptions po;
    po.mode = mode;
    po.h = c.h;
    if (c.fixture == "flat") {
        cand = build_flat_parallel(FlatCorruption::None, 0.0, mode, c.h);
    } else if (c.fixture == "product3d") {
        cand = build_product_3d(po);
    } else if (c.fixture == "s2xr2_plus") {
        cand = build_s2xr2(S2xR2Mode::Plus, S2xR2Combo::AetaNonzero, po);
    } else if (c.fixture == "s2xr2_minus") {
        cand = build_s2xr2(S2xR2Mode::Minus, S2xR2Combo::AetaNonzero, po);
    } else if (c.fixture == "s2xr2_aeta_zero") {
        cand = build_s2xr2(S2xR2Mode::Plus, S2xR2Combo::AetaZero, po);
    } else if (c.fixture == "dwp") {
        const DwpProfile prof = integrate_dwp(dwp_params(*c.dwp));
        const FlowData flow = berger_flow(1.0, 1.0);
        DwpBuildOptions bo;
        bo.mode = mode;
        bo.h = c.h;
        cand = build_dwp_candidate(prof, flow, cplx(1.0, 0.0), bo);
    } else {
        throw ConfigError("fixture '" + c.fixture + "' has no 4-dimensional candidate");
    }
    return apply_corruption(std::move(cand), c.corrupt);
}

ResidualReport verify_s2(const RunConfig& c) {
    S2Options so;
    so.mode = deriv_mode(c.deriv_mode);
    so.h = c.h;
    so.grid = c.grid[0];
    const Candidate<2> s2 = build_s2_skew_killing(Spinor<2>(cplx(std::cos(0.4), 0.0), cplx(std::sin(0.4), 0.0)), so);
    const VerifyOptions opt = verify_options(c);
    ResidualReport rep;
    rep.suite = "S1";
    rep.meta.chart = s2.chart.name;
    rep.meta.label = "s2";
    rep.meta.grid = {c.grid[0], c.grid[0], 1, 1};
    rep.meta.h = c.h;
    rep.meta.deriv_mode = c.deriv_mode == "analytic" ? "analytic" : "finite_difference";
    rep.meta.orientation = s2.chart.orientation;
    rep.meta.points = c.grid[0] * c.grid[0];
    rep.meta.suites = {"S1"};
    auto entry = [&](const std::string& id, const std::string& anchor, double value, double tol) {
        IdentityResult r;
        r.id = id;
        r.anchor = anchor;
        r.suite = Suite::S1;
        r.max_residual = value;
        r.applicable_points = rep.meta.points;
        auto it = opt.overrides.find(id);
        r.tolerance = it != opt.overrides.end() ? it->second : tol;
        r.pass = value <= r.tolerance;
        r.status = r.pass ? "pass" : "fail";
        r.note = "two-dimensional sphere of radius 1/2; argmax not tracked";
        rep.identities.push_back(r);
    };
    entry("K0", "(eq:sks) \"nabla_X psi = AX.psi\"", s2_k0(s2, c.grid[0]), opt.tol.fd);
    entry("S2-FLAT", "Example 4.1 \"skew Killing spinor on S^2\"", s2_flatness(s2, c.grid[0]),
          so.mode == DerivMode::Analytic ? 1e-8 : opt.tol.curv);
    return rep;
}

int cmd_verify(RunConfig c, std::ostream& out, std::ostream& err) {
    try {
        validate(c);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    ResidualReport rep;
    try {
        if (c.fixture == "s2") {
            if (!c.corrupt.empty()) throw ConfigError("corruptions apply to 4-dimensional fixtures only");
            rep = verify_s2(c);
        } else {
            const Candidate4 cand = build_fixture(c);
            std::vector<Suite> suites;
            for (const auto& s : c.suites) suites.push_back(parse_suite(s));
            rep = run_suites(cand, suites, verify_options(c));
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const ConstructionError& e) {
        err << "construction failed: " << e.what() << '\n';
        return kConstructionError;
    } catch (const DomainError& e) {
        err << "construction failed: " << e.what() << '\n';
        return kConstructionError;
    }
    const int code = rep.passed() ? kOk : kVerifyFailed;
    rep.meta.extra["exit_code"] = code;
    try {
        write_text(c.output, report_to_json(rep) + "\n", out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    for (const auto& r : rep.identities)
        if (r.status == "fail")
            err << "FAIL " << r.id << " residual " << *r.max_residual << " > " << r.tolerance << '\n';
    return code;
}

std::string profile_table(const DwpProfile& p) {
    std::ostringstream os;
    os << std::setprecision(12) << "t\trho\tsigma\ttau\tK\n";
    for (size_t i = 0; i < p.t.size(); ++i)
        os << p.t[i] << '\t' << p.rho[i] << '\t' << p.sigma[i] << '\t' << p.tau[i] << '\t' << p.K[i] << '\n';
    return os.str();
}

int cmd_build_dwp(RunConfig c, const BuildDwpRequest& req, std::ostream& out, std::ostream& err) {
    c.fixture = "dwp";
    try {
        validate(c);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    DwpProfile prof;
    try {
        prof = integrate_dwp(dwp_params(*c.dwp));
        write_text(c.output, profile_to_json(prof) + "\n", out);
        if (!req.table_path.empty()) write_text(req.table_path, profile_table(prof), out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    if (prof.exit != "complete") err << "profile truncated: " << prof.exit << " at t = " << prof.t.back() << '\n';
    if (!req.verify) return kOk;
    ResidualReport rep;
    try {
        const Candidate4 cand = apply_corruption(
            [&] {
                DwpBuildOptions bo;
                bo.mode = deriv_mode(c.deriv_mode);
                bo.h = c.h;
                return build_dwp_candidate(prof, berger_flow(1.0, 1.0), cplx(1.0, 0.0), bo);
            }(),
            c.corrupt);
        std::vector<Suite> suites;
        for (const auto& s : c.suites) suites.push_back(parse_suite(s));
        rep = run_suites(cand, suites, verify_options(c));
    } catch (const ConstructionError& e) {
        err << "construction failed: " << e.what() << '\n';
        return kConstructionError;
    } catch (const DomainError& e) {
        err << "construction failed: " << e.what() << '\n';
        return kConstructionError;
    }
    const int code = rep.passed() ? kOk : kVerifyFailed;
    rep.meta.extra["exit_code"] = code;
    if (!req.report_path.empty()) {
        try {
            write_text(req.report_path, report_to_json(rep) + "\n", out);
        } catch (const ConfigError& e) {
            err << "config error: " << e.what() << '\n';
            return kConfigError;
        }
    }
    for (const auto& r : rep.identities)
        err << r.id << '\t' << r.status << '\t' << (r.max_residual ? *r.max_residual : 0.0) << '\n';
    return code;
}

int cmd_scan_radius(const ScanRequest& req, std::ostream& out, std::ostream& err) {
    if (!(req.r_min > 0 && req.r_max > req.r_min) || req.samples < 2) {
        err << "config error: need 0 < r_min < r_max and samples >= 2\n";
        return kConfigError;
    }
    if (req.deriv_mode != "fd" && req.deriv_mode != "analytic") {
        err << "config error: deriv_mode must be 'fd' or 'analytic'\n";
        return kConfigError;
    }
    const auto rows = scan_radius(req.r_min, req.r_max, req.samples, deriv_mode(req.deriv_mode));
    out << std::setprecision(12) << "radius\tresidual\n";
    for (const auto& r : rows) out << r.radius << '\t' << r.residual << '\n';
    return kOk;
}

int cmd_list_identities(bool as_json, std::ostream& out) {
    if (as_json) {
        json a = json::array();
        for (const auto& i : list_identities())
            a.push_back({{"id", i.id},
                         {"suite", suite_name(i.suite)},
                         {"anchor", i.anchor},
                         {"statement", i.statement},
                         {"analytic_only", i.analytic_only}});
        out << a.dump(2) << '\n';
        return kOk;
    }
    for (const auto& i : list_identities())
        out << suite_name(i.suite) << '\t' << i.id << '\t' << i.anchor << '\t' << i.statement << '\n';
    return kOk;
}

}  // namespace sks::cli
