#include "skewspin/verifier.hpp"

#include <json.hpp>

namespace sks {

namespace {

using nlohmann::json;

json number_or_null(const std::optional<double>& v) {
    if (!v) return nullptr;
    if (!std::isfinite(*v)) return "inf";
    return *v;
}

}  // namespace

std::string report_to_json(const ResidualReport& r, int indent) {
    json ids = json::array();
    for (const auto& i : r.identities) {
        json p = nullptr;
        if (i.argmax_point) p = {(*i.argmax_point)(0), (*i.argmax_point)(1), (*i.argmax_point)(2), (*i.argmax_point)(3)};
        json e = {{"id", i.id},
                  {"anchor", i.anchor},
                  {"max_residual", number_or_null(i.max_residual)},
                  {"argmax_point", p},
                  {"applicable_points", i.applicable_points},
                  {"tolerance", i.tolerance},
                  {"pass", i.pass},
                  {"status", i.status},
                  {"suite", suite_name(i.suite)},
                  {"skipped_points", i.skipped_points}};
        if (!i.note.empty()) e["note"] = i.note;
        ids.push_back(std::move(e));
    }
    const auto& m = r.meta;
    json meta = {{"chart", m.chart},
                 {"label", m.label},
                 {"grid", m.grid},
                 {"h", m.h},
                 {"deriv_mode", m.deriv_mode},
                 {"orientation", m.orientation},
                 {"orientation_flipped", m.flipped},
                 {"points", m.points},
                 {"suites", m.suites},
                 {"passed", r.passed()}};
    for (const auto& [k, v] : m.extra) meta[k] = v;
    json doc = {{"suite", r.suite}, {"identities", ids}, {"meta", meta}};
    return doc.dump(indent);
}

std::string profile_to_json(const DwpProfile& p, int indent) {
    json doc = {{"t", p.t},         {"rho", p.rho}, {"sigma", p.sigma},     {"lambda", p.lambda},
                {"mu", p.mu},       {"tau", p.tau}, {"K", p.K},             {"K_hat", p.K_hat},
                {"tau_hat", p.tau_hat}, {"exit", p.exit}};
    return doc.dump(indent);
}

}  // namespace sks
