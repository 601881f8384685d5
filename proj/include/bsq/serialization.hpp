#pragma once

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bs_lattice.hpp"
#include "errors.hpp"
#include "torus_field.hpp"

namespace bsq {

using json = nlohmann::json;

inline json to_json_value(cd z) { return json::array({z.real(), z.imag()}); }

inline cd complex_from_json(const json& j, const std::string& where) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw Error(ErrorKind::ConfigInvalid, where + ": expected a number or [re, im]");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

inline json lattice_to_json(const Lattice& l) { return {{"e1", to_json_value(l.e1)}, {"e2", to_json_value(l.e2)}}; }

/// Coefficient list [[m, n, re, im], ...], dropping |c| < cutoff.
inline json coeffs_to_json(const TorusField& f, double cutoff = 1e-14) {
    json out = json::array();
    const int n = f.resolution();
    for (int m = -n / 2; m < n / 2; ++m) {
        for (int q = -n / 2; q < n / 2; ++q) {
            const cd c = f.coeff(m, q);
            if (std::abs(c) >= cutoff) out.push_back({m, q, c.real(), c.imag()});
        }
    }
    return out;
}

inline json field_to_json(const TorusField& f) {
    return {{"N", f.resolution()},
            {"lattice", lattice_to_json(f.lattice())},
            {"shift", to_json_value(f.shift())},
            {"coeffs", coeffs_to_json(f)}};
}

inline TorusField field_from_json(const json& j) {
    const Lattice l = make_lattice(complex_from_json(j.at("lattice").at("e1"), "lattice.e1"),
                                   complex_from_json(j.at("lattice").at("e2"), "lattice.e2"));
    const int n = j.at("N").get<int>();
    std::vector<cd> c(static_cast<std::size_t>(n) * n);
    for (const json& e : j.at("coeffs")) {
        c[storage_index(e.at(0).get<int>(), n) * n + storage_index(e.at(1).get<int>(), n)] =
            cd(e.at(2).get<double>(), e.at(3).get<double>());
    }
    return TorusField::from_coeffs(l, n, std::move(c), complex_from_json(j.at("shift"), "shift"));
}

inline json lattice_meta_to_json(const LatticeMeta& m) {
    json failures = json::array();
    for (const auto& f : m.failures) failures.push_back({{"k", {f.k[0], f.k[1]}}, {"error", f.error}});
    return {{"source", m.source},
            {"theta0", {m.theta0[0], m.theta0[1]}},
            {"theta0_default", m.theta0_default},
            {"theta1_supplied", m.theta1_supplied},
            {"tol", m.tol},
            {"probe", m.probe},
            {"k_range", {m.k_range[0], m.k_range[1], m.k_range[2], m.k_range[3]}},
            {"candidates", m.candidates},
            {"orientation", m.orientation},
            {"diffeomorphic", m.diffeomorphic},
            {"non_injective", m.non_injective},
            {"sigma_min", m.sigma_min},
            {"sigma_max", m.sigma_max},
            {"separation", m.separation},
            {"certified", m.certified},
            {"failures", failures}};
}

inline json spectral_lattice_to_json(const SpectralLattice& l) {
    json entries = json::array();
    for (const auto& e : l.entries) {
        entries.push_back(
            {{"k", {e.k[0], e.k[1]}}, {"z", to_json_value(e.z)}, {"mult", e.multiplicity}, {"res", e.newton_residual}});
    }
    return {{"h", l.h},
            {"window", {l.window.re_min, l.window.re_max, l.window.im_min, l.window.im_max}},
            {"entries", entries},
            {"meta", lattice_meta_to_json(l.meta)}};
}

namespace detail {

inline std::string format_double(double v) {
    if (!std::isfinite(v)) return "null";
    if (v == 0.0) return "0";  // drops the sign of -0
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void canonical(const json& j, std::string& out) {
    switch (j.type()) {
        case json::value_t::object: {
            // nlohmann's default object keeps keys sorted.
            out += '{';
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ',';
                first = false;
                out += json(it.key()).dump();
                out += ':';
                canonical(it.value(), out);
            }
            out += '}';
            break;
        }
        case json::value_t::array: {
            out += '[';
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ',';
                canonical(j[i], out);
            }
            out += ']';
            break;
        }
        case json::value_t::number_float: out += format_double(j.get<double>()); break;
        default: out += j.dump(); break;
    }
}

}  // namespace detail

/// Canonical JSON: sorted keys, no whitespace, floats as %.17g.
inline std::string canonical_json(const json& j) {
    std::string out;
    detail::canonical(j, out);
    return out;
}

inline std::string lattice_csv(const SpectralLattice& l) {
    std::ostringstream s;
    s << "k1,k2,re_z,im_z,mult,residual\n";
    for (const auto& e : l.entries) {
        s << e.k[0] << ',' << e.k[1] << ',' << detail::format_double(e.z.real()) << ','
          << detail::format_double(e.z.imag()) << ',' << e.multiplicity << ','
          << detail::format_double(e.newton_residual) << '\n';
    }
    return s.str();
}

}  // namespace bsq
