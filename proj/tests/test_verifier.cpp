#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <set>

using namespace sks;
using nlohmann::json;

namespace {

VerifyOptions small_grid(int n = 3) {
    VerifyOptions o;
    o.grid = {n, n, n, n};
    return o;
}

const Candidate4& s2xr2_plus() {
    static const Candidate4 c = build_s2xr2(S2xR2Mode::Plus, S2xR2Combo::AetaNonzero);
    return c;
}

}  // namespace

TEST_SUITE("verifier") {

TEST_CASE("catalog") {
    const auto& ids = list_identities();
    std::set<std::string> seen;
    for (const auto& info : ids) {
        CHECK(seen.insert(info.id).second);
        CHECK_FALSE(info.anchor.empty());
        CHECK_FALSE(info.statement.empty());
        CHECK(identity_info(info.id).id == info.id);
    }
    for (const char* id : {"K0", "P2.1-1", "L4.10", "P4.12", "P5.2-nJ", "RB", "R5.1", "DWP-CONN", "SOL", "R5.8"})
        CHECK(seen.count(id) == 1);
    CHECK(identity_info("SOL").global);
    CHECK(identity_info("SOL").tol == TolClass::Ode);
    CHECK_THROWS(identity_info("no-such-id"));

    for (Suite s : {Suite::S1, Suite::S2, Suite::S3, Suite::S4}) CHECK(parse_suite(suite_name(s)) == s);
    CHECK_THROWS(parse_suite("S9"));

    Tolerances t;
    CHECK(t.of(TolClass::Fd) == 5e-5);
    CHECK(t.of(TolClass::Curv) == 5e-4);
    CHECK(t.of(TolClass::Alg) == 1e-8);
    CHECK(t.of(TolClass::Ode) == 1e-7);
}

TEST_CASE("flat candidate") {
    const auto r = run_suite(build_flat_parallel(), Suite::S1, small_grid());
    CHECK(r.passed());
    const auto* p3 = r.find("P2.1-3");
    REQUIRE(p3 != nullptr);
    CHECK(p3->max_residual.value() == 0.0);
    CHECK(p3->status == "pass");
    CHECK(r.meta.points == 81);
}

TEST_CASE("sphere times plane passes S1 and S2") {
    const auto r = run_suites(s2xr2_plus(), {Suite::S1, Suite::S2}, small_grid());
    CHECK(r.passed());
    for (const auto& id : r.identities) {
        INFO(id.id);
        CHECK(id.status != "fail");
    }
    const auto* k0 = r.find("K0");
    REQUIRE(k0);
    CHECK(*k0->max_residual <= 5e-5);
    const auto* l410 = r.find("L4.10");
    REQUIRE(l410);
    CHECK(l410->status == "pass");
    CHECK(*l410->max_residual <= 5e-5);
    CHECK(l410->applicable_points == 81);
    CHECK(l410->argmax_point.has_value());
}

TEST_CASE("gating and tolerance overrides") {
    // rho = 1/2 everywhere: outside M'' so S2 has nothing to check
    const auto r = run_suite(build_product_3d(), Suite::S2, small_grid());
    const auto* d0 = r.find("D0");
    REQUIRE(d0);
    CHECK(d0->status == "not_applicable");
    CHECK(d0->applicable_points == 0);
    CHECK_FALSE(d0->max_residual.has_value());

    VerifyOptions strict = small_grid();
    strict.overrides["K0"] = 1e-20;
    const auto k = check_identity(s2xr2_plus(), "K0", strict);
    CHECK(k.tolerance == 1e-20);
    CHECK(k.status == "fail");
    CHECK_FALSE(k.pass);
}

TEST_CASE("corruption is detected") {
    Candidate4 c = s2xr2_plus();
    const auto A0 = c.A;
    c.A = [A0](const Vec4& x) { return (1.01 * A0(x)).eval(); };
    const auto r = run_suite(c, Suite::S1, small_grid());
    CHECK_FALSE(r.passed());
    CHECK(r.find("K0")->status == "fail");
    CHECK(*r.find("K0")->max_residual >= 1e-3);
}

TEST_CASE("report JSON") {
    const auto r = run_suites(s2xr2_plus(), {Suite::S1, Suite::S2}, small_grid());
    const json j = json::parse(report_to_json(r));
    REQUIRE(j.contains("identities"));
    REQUIRE(j.contains("meta"));
    CHECK(j["meta"]["grid"] == json::array({3, 3, 3, 3}));
    CHECK(j["meta"]["passed"] == true);
    bool saw = false;
    for (const auto& e : j["identities"]) {
        for (const char* key : {"id", "anchor", "max_residual", "argmax_point", "applicable_points", "tolerance", "pass"})
            CHECK(e.contains(key));
        if (e["id"] == "L4.10") {
            saw = true;
            CHECK(e["pass"] == true);
            CHECK(e["argmax_point"].size() == 4);
        }
    }
    CHECK(saw);

    // sweeps are deterministic regardless of the worker count
    VerifyOptions one = small_grid(), many = small_grid();
    one.threads = 1;
    many.threads = 4;
    CHECK(report_to_json(run_suite(s2xr2_plus(), Suite::S2, one)) ==
          report_to_json(run_suite(s2xr2_plus(), Suite::S2, many)));
}

TEST_CASE("profile JSON") {
    DwpParams p;
    p.t_span = 0.01;
    const DwpProfile prof = integrate_dwp(p);
    const json j = json::parse(profile_to_json(prof));
    for (const char* key : {"t", "rho", "sigma", "lambda", "mu", "tau", "K", "K_hat", "tau_hat", "exit"})
        CHECK(j.contains(key));
    CHECK(j["t"].size() == prof.t.size());
    CHECK(j["exit"] == "complete");
    CHECK(j["K_hat"].get<double>() == 4.0);
}

TEST_CASE("doubly warped candidate passes S3 and S4 on a coarse grid") {
    const DwpProfile prof = integrate_dwp(DwpParams{});
    const Candidate4 c = build_dwp_candidate(prof, berger_flow(1.0, 1.0), cplx(1.0, 0.0));
    VerifyOptions o;
    o.grid = {2, 2, 2, 2};
    const auto r = run_suites(c, {Suite::S3, Suite::S4}, o);
    for (const auto& id : r.identities) {
        INFO(id.id, " ", id.max_residual.value_or(-1.0));
        CHECK(id.status == "pass");
    }
    const LeafRestriction lr = leaf_restriction(c, c.chart.center());
    CHECK(lr.eres <= 5e-4);
    CHECK(lr.a_direct == doctest::Approx(lr.a_leaf).epsilon(5e-4));
    CHECK(std::abs(lr.b_direct - lr.b_leaf) <= 5e-4);
}

}  // TEST_SUITE
