#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "actions.hpp"
#include "bs_lattice.hpp"
#include "floquet.hpp"
#include "hj_solver.hpp"
#include "pipeline.hpp"
#include "separable.hpp"
#include "serialization.hpp"
#include "straighten.hpp"
#include "symbol_model.hpp"

namespace bsq {

inline constexpr const char* version_string = "bsq 0.1.0";

enum class Command { Straighten, Hj, Actions, Floquet, Bs, Oracle, Pipeline };
enum class Format { Json, Csv };

inline const std::map<std::string, Command>& command_names() {
    static const std::map<std::string, Command> m{{"straighten", Command::Straighten}, {"hj", Command::Hj},
                                                  {"actions", Command::Actions},       {"floquet", Command::Floquet},
                                                  {"bs", Command::Bs},                 {"oracle", Command::Oracle},
                                                  {"pipeline", Command::Pipeline}};
    return m;
}

inline std::string command_name(Command c) {
    for (const auto& [k, v] : command_names()) {
        if (v == c) return k;
    }
    return "";
}

struct ModeCoeff {
    int m = 0;
    int n = 0;
    cd value = 0.0;
};
using CoeffList = std::vector<ModeCoeff>;

struct PolySpec {
    int p1 = 0;
    int p2 = 0;
    CoeffList coeff;
};

struct SeparableSpec {
    Vec2 c{1.0, 1.0};
    Vec2 kappa{0.0, 0.0};
};

/// Action maps given by finite data: affine, holomorphic polynomial, or separable oscillators.
struct MapSpec {
    std::string type;
    std::array<Vec2, 2> M{{{1.0, 0.0}, {0.0, 1.0}}};
    Vec2 v{0.0, 0.0};
    std::vector<cd> coeffs;
    SeparableSpec separable;
    std::optional<Rect> domain;
};

struct ModelSpec {
    cd e1{1.0, 0.0};
    cd e2{0.0, 1.0};
    CoeffList A{{0, 0, 1.0}};
    CoeffList gamma1, gamma2, r, r_z, g, q0;
    std::vector<PolySpec> F;
    std::optional<double> epsilon;
    std::optional<double> epsilon_tilde;
    cd a = 0.0;
    cd z = 0.0;
    std::optional<SeparableSpec> separable;
};

struct Numerics {
    int N = 32;
    double tol = 1e-12;
    int max_iters = 200;
    int bandwidth = 12;
    double m_weight = 2.5;
    int degree = 12;
    int threads = 0;
    int oracle_points = 4;
};

struct Spectral {
    std::optional<double> h;
    Rect window{-0.05, 0.05, -0.05, 0.05};
    std::optional<Vec2> theta0;
    cd theta = 0.0;
    std::array<double, 2> corrections{0.0, 0.0};
    bool certify = true;
    std::optional<MapSpec> map;
};

struct Output {
    std::string path;
    Format format = Format::Json;
};

struct RunConfig {
    Command command = Command::Straighten;
    ModelSpec model;
    Numerics numerics;
    Spectral spectral;
    Output output;
};

struct Overrides {
    std::optional<double> h;
    std::optional<double> tol;
    std::optional<int> resolution;
    std::optional<std::string> out;
    std::optional<std::string> format;
};

struct RunReport {
    std::string command;
    std::string inputs_digest;
    std::string version = version_string;
    json results = json::object();
    json diagnostics = json::object();
    std::optional<SpectralLattice> lattice;
};

namespace detail {

[[noreturn]] inline void invalid(const std::string& where, const std::string& what) {
    throw Error(ErrorKind::ConfigInvalid, where + ": " + what);
}

inline void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) invalid(where, "expected an object");
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!ok.count(it.key())) invalid(where + "." + it.key(), "unknown field");
    }
}

inline double number(const json& j, const std::string& where) {
    if (!j.is_number()) invalid(where, "expected a number");
    return j.get<double>();
}

inline int integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) invalid(where, "expected an integer");
    return j.get<int>();
}

inline Vec2 pair(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2) invalid(where, "expected [x, y]");
    return {number(j[0], where + "[0]"), number(j[1], where + "[1]")};
}

inline Rect rect(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 4) invalid(where, "expected [re_min, re_max, im_min, im_max]");
    Rect r{number(j[0], where), number(j[1], where), number(j[2], where), number(j[3], where)};
    if (!r.valid()) invalid(where, "empty rectangle");
    return r;
}

inline CoeffList coeff_list(const json& j, const std::string& where) {
    if (!j.is_array()) invalid(where, "expected a list of [m, n, re, im]");
    CoeffList out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string w = where + "[" + std::to_string(i) + "]";
        const json& e = j[i];
        if (!e.is_array() || (e.size() != 3 && e.size() != 4)) invalid(w, "expected [m, n, re, im]");
        out.push_back({integer(e[0], w), integer(e[1], w), cd(number(e[2], w), e.size() == 4 ? number(e[3], w) : 0.0)});
    }
    return out;
}

inline json coeff_list_json(const CoeffList& c) {
    json out = json::array();
    for (const auto& e : c) out.push_back({e.m, e.n, e.value.real(), e.value.imag()});
    return out;
}

inline SeparableSpec separable_spec(const json& j, const std::string& where) {
    only_keys(j, where, {"c", "kappa"});
    SeparableSpec s;
    if (j.contains("c")) s.c = pair(j["c"], where + ".c");
    if (j.contains("kappa")) s.kappa = pair(j["kappa"], where + ".kappa");
    return s;
}

inline json separable_json(const SeparableSpec& s) {
    return {{"c", {s.c[0], s.c[1]}}, {"kappa", {s.kappa[0], s.kappa[1]}}};
}

inline MapSpec map_spec(const json& j, const std::string& where) {
    only_keys(j, where, {"type", "M", "v", "coeffs", "c", "kappa", "domain"});
    MapSpec m;
    if (!j.contains("type") || !j["type"].is_string()) invalid(where + ".type", "expected affine, holomorphic or separable");
    m.type = j["type"].get<std::string>();
    if (m.type == "affine") {
        if (j.contains("M")) {
            const json& M = j["M"];
            if (!M.is_array() || M.size() != 2) invalid(where + ".M", "expected a 2x2 matrix");
            m.M = {pair(M[0], where + ".M[0]"), pair(M[1], where + ".M[1]")};
        }
        if (j.contains("v")) m.v = pair(j["v"], where + ".v");
    } else if (m.type == "holomorphic") {
        if (!j.contains("coeffs") || !j["coeffs"].is_array() || j["coeffs"].empty()) {
            invalid(where + ".coeffs", "expected polynomial coefficients [[re, im], ...]");
        }
        for (std::size_t i = 0; i < j["coeffs"].size(); ++i) {
            m.coeffs.push_back(complex_from_json(j["coeffs"][i], where + ".coeffs[" + std::to_string(i) + "]"));
        }
    } else if (m.type == "separable") {
        json s = json::object();
        if (j.contains("c")) s["c"] = j["c"];
        if (j.contains("kappa")) s["kappa"] = j["kappa"];
        m.separable = separable_spec(s, where);
    } else {
        invalid(where + ".type", "unknown map type '" + m.type + "'");
    }
    if (j.contains("domain")) m.domain = rect(j["domain"], where + ".domain");
    return m;
}

inline json map_json(const MapSpec& m) {
    json j = {{"type", m.type}};
    if (m.type == "affine") {
        j["M"] = {{m.M[0][0], m.M[0][1]}, {m.M[1][0], m.M[1][1]}};
        j["v"] = {m.v[0], m.v[1]};
    } else if (m.type == "holomorphic") {
        j["coeffs"] = json::array();
        for (cd c : m.coeffs) j["coeffs"].push_back(to_json_value(c));
    } else {
        j["c"] = {m.separable.c[0], m.separable.c[1]};
        j["kappa"] = {m.separable.kappa[0], m.separable.kappa[1]};
    }
    if (m.domain) j["domain"] = {m.domain->re_min, m.domain->re_max, m.domain->im_min, m.domain->im_max};
    return j;
}

inline void check_indices(const CoeffList& c, int n, const std::string& where) {
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (2 * std::abs(c[i].m) >= n || 2 * std::abs(c[i].n) >= n) {
            invalid(where + "[" + std::to_string(i) + "]", "index (" + std::to_string(c[i].m) + "," +
                                                               std::to_string(c[i].n) +
                                                               ") outside the resolvable window for N=" +
                                                               std::to_string(n));
        }
    }
}

}  // namespace detail

inline void apply_overrides(json& j, const Overrides& o) {
    if (o.h) j["spectral"]["h"] = *o.h;
    if (o.tol) j["numerics"]["tol"] = *o.tol;
    if (o.resolution) j["numerics"]["N"] = *o.resolution;
    if (o.out) j["output"]["path"] = *o.out;
    if (o.format) j["output"]["format"] = *o.format;
}

/// Parses and validates a config; every failure names the offending field.
inline RunConfig parse_config(const json& j) {
    using namespace detail;
    only_keys(j, "config", {"command", "model", "numerics", "spectral", "output"});
    RunConfig c;
    if (!j.contains("command") || !j["command"].is_string() || !command_names().count(j["command"].get<std::string>())) {
        invalid("command", "expected one of straighten, hj, actions, floquet, bs, oracle, pipeline");
    }
    c.command = command_names().at(j["command"].get<std::string>());

    if (j.contains("numerics")) {
        const json& n = j["numerics"];
        only_keys(n, "numerics",
                  {"N", "tol", "max_iters", "bandwidth", "m_weight", "degree", "threads", "oracle_points"});
        if (n.contains("N")) c.numerics.N = integer(n["N"], "numerics.N");
        if (n.contains("tol")) c.numerics.tol = number(n["tol"], "numerics.tol");
        if (n.contains("max_iters")) c.numerics.max_iters = integer(n["max_iters"], "numerics.max_iters");
        if (n.contains("bandwidth")) c.numerics.bandwidth = integer(n["bandwidth"], "numerics.bandwidth");
        if (n.contains("m_weight")) c.numerics.m_weight = number(n["m_weight"], "numerics.m_weight");
        if (n.contains("degree")) c.numerics.degree = integer(n["degree"], "numerics.degree");
        if (n.contains("threads")) c.numerics.threads = integer(n["threads"], "numerics.threads");
        if (n.contains("oracle_points")) c.numerics.oracle_points = integer(n["oracle_points"], "numerics.oracle_points");
    }
    const Numerics& nm = c.numerics;
    if (nm.N < 8 || nm.N % 2 != 0) invalid("numerics.N", "must be an even integer >= 8");
    if (!(nm.tol >= 1e-14 && nm.tol <= 1e-4)) invalid("numerics.tol", "must lie in [1e-14, 1e-4]");
    if (nm.max_iters < 1) invalid("numerics.max_iters", "must be positive");
    if (nm.bandwidth < 1) invalid("numerics.bandwidth", "must be positive");
    if (!(nm.m_weight > 0.0)) invalid("numerics.m_weight", "must be positive");
    if (nm.degree < 2 || nm.degree > 40) invalid("numerics.degree", "must lie in [2, 40]");
    if (nm.threads < 0) invalid("numerics.threads", "must be >= 0");
    if (nm.oracle_points < 0) invalid("numerics.oracle_points", "must be >= 0");

    if (j.contains("model")) {
        const json& m = j["model"];
        only_keys(m, "model", {"lattice", "A", "gamma1", "gamma2", "r", "r_z", "g", "q0", "F", "epsilon",
                               "epsilon_tilde", "a", "z", "separable"});
        ModelSpec& s = c.model;
        if (m.contains("lattice")) {
            only_keys(m["lattice"], "model.lattice", {"e1", "e2"});
            if (m["lattice"].contains("e1")) s.e1 = complex_from_json(m["lattice"]["e1"], "model.lattice.e1");
            if (m["lattice"].contains("e2")) s.e2 = complex_from_json(m["lattice"]["e2"], "model.lattice.e2");
        }
        if (std::abs((std::conj(s.e1) * s.e2).imag()) < 1e-12) invalid("model.lattice", "periods are collinear");
        const std::pair<const char*, CoeffList*> fields[] = {{"A", &s.A},   {"gamma1", &s.gamma1}, {"gamma2", &s.gamma2},
                                                              {"r", &s.r},   {"r_z", &s.r_z},       {"g", &s.g},
                                                              {"q0", &s.q0}};
        for (const auto& [name, dst] : fields) {
            if (m.contains(name)) *dst = coeff_list(m[name], std::string("model.") + name);
            check_indices(*dst, nm.N, std::string("model.") + name);
        }
        if (m.contains("F")) {
            if (!m["F"].is_array()) invalid("model.F", "expected a list of terms");
            for (std::size_t i = 0; i < m["F"].size(); ++i) {
                const std::string w = "model.F[" + std::to_string(i) + "]";
                const json& t = m["F"][i];
                only_keys(t, w, {"p1", "p2", "coeff"});
                PolySpec p;
                p.p1 = t.contains("p1") ? integer(t["p1"], w + ".p1") : 0;
                p.p2 = t.contains("p2") ? integer(t["p2"], w + ".p2") : 0;
                if (p.p1 < 0 || p.p2 < 0 || p.p1 + p.p2 < 2) invalid(w, "total degree must be at least 2");
                if (!t.contains("coeff")) invalid(w + ".coeff", "missing");
                p.coeff = coeff_list(t["coeff"], w + ".coeff");
                check_indices(p.coeff, nm.N, w + ".coeff");
                s.F.push_back(std::move(p));
            }
        }
        if (m.contains("epsilon")) s.epsilon = number(m["epsilon"], "model.epsilon");
        if (m.contains("epsilon_tilde")) s.epsilon_tilde = number(m["epsilon_tilde"], "model.epsilon_tilde");
        if (s.epsilon && *s.epsilon < 0.0) invalid("model.epsilon", "must be >= 0");
        if (s.epsilon_tilde && !(*s.epsilon_tilde > 0.0 && *s.epsilon_tilde < 1.0)) {
            invalid("model.epsilon_tilde", "must lie in (0, 1)");
        }
        if (m.contains("a")) s.a = complex_from_json(m["a"], "model.a");
        if (m.contains("z")) s.z = complex_from_json(m["z"], "model.z");
        if (m.contains("separable")) s.separable = separable_spec(m["separable"], "model.separable");
    }

    if (j.contains("spectral")) {
        const json& s = j["spectral"];
        only_keys(s, "spectral", {"h", "window", "theta0", "theta", "corrections", "certify", "map"});
        if (s.contains("h")) c.spectral.h = number(s["h"], "spectral.h");
        if (s.contains("window")) c.spectral.window = rect(s["window"], "spectral.window");
        if (s.contains("theta0")) c.spectral.theta0 = pair(s["theta0"], "spectral.theta0");
        if (s.contains("theta")) c.spectral.theta = complex_from_json(s["theta"], "spectral.theta");
        if (s.contains("corrections")) {
            const Vec2 v = pair(s["corrections"], "spectral.corrections");
            c.spectral.corrections = {v[0], v[1]};
        }
        if (s.contains("certify")) {
            if (!s["certify"].is_boolean()) invalid("spectral.certify", "expected true or false");
            c.spectral.certify = s["certify"].get<bool>();
        }
        if (s.contains("map")) c.spectral.map = map_spec(s["map"], "spectral.map");
    }
    if (c.spectral.h && !(*c.spectral.h > 0.0 && *c.spectral.h < 1.0)) invalid("spectral.h", "must lie in (0, 1)");

    if (j.contains("output")) {
        const json& o = j["output"];
        only_keys(o, "output", {"path", "format"});
        if (o.contains("path")) {
            if (!o["path"].is_string()) invalid("output.path", "expected a string");
            c.output.path = o["path"].get<std::string>();
        }
        if (o.contains("format")) {
            const std::string f = o["format"].is_string() ? o["format"].get<std::string>() : "";
            if (f == "json") {
                c.output.format = Format::Json;
            } else if (f == "csv") {
                c.output.format = Format::Csv;
            } else {
                invalid("output.format", "expected json or csv");
            }
        }
    }

    // Command-specific requirements.
    const bool spectral_cmd = c.command == Command::Bs || c.command == Command::Oracle || c.command == Command::Pipeline;
    if (spectral_cmd && !c.spectral.h) invalid("spectral.h", "required for " + command_name(c.command));
    if (c.output.format == Format::Csv && !spectral_cmd) invalid("output.format", "csv is only available for lattices");
    if (c.command == Command::Bs && !c.spectral.map) invalid("spectral.map", "required for bs");
    if (c.command == Command::Oracle && !c.model.separable) invalid("model.separable", "required for oracle");
    if (c.command == Command::Pipeline && !c.model.separable && c.model.r_z.empty()) {
        invalid("model", "pipeline needs model.separable or a z-dependent forcing model.r_z");
    }
    if ((c.command == Command::Hj || c.command == Command::Actions ||
         (c.command == Command::Pipeline && !c.model.separable)) &&
        !c.model.epsilon && !c.model.epsilon_tilde) {
        invalid("model.epsilon", "give epsilon or epsilon_tilde");
    }
    return c;
}

/// Normalized config with all defaults filled in; its canonical form is hashed.
inline json config_to_json(const RunConfig& c) {
    using namespace detail;
    const ModelSpec& m = c.model;
    json model = {{"lattice", {{"e1", to_json_value(m.e1)}, {"e2", to_json_value(m.e2)}}},
                  {"A", coeff_list_json(m.A)},
                  {"gamma1", coeff_list_json(m.gamma1)},
                  {"gamma2", coeff_list_json(m.gamma2)},
                  {"r", coeff_list_json(m.r)},
                  {"r_z", coeff_list_json(m.r_z)},
                  {"g", coeff_list_json(m.g)},
                  {"q0", coeff_list_json(m.q0)},
                  {"F", json::array()},
                  {"a", to_json_value(m.a)},
                  {"z", to_json_value(m.z)}};
    for (const auto& t : m.F) model["F"].push_back({{"p1", t.p1}, {"p2", t.p2}, {"coeff", coeff_list_json(t.coeff)}});
    if (m.epsilon) model["epsilon"] = *m.epsilon;
    if (m.epsilon_tilde) model["epsilon_tilde"] = *m.epsilon_tilde;
    if (m.separable) model["separable"] = separable_json(*m.separable);
    const Numerics& n = c.numerics;
    const Spectral& s = c.spectral;
    json spectral = {{"window", {s.window.re_min, s.window.re_max, s.window.im_min, s.window.im_max}},
                     {"theta", to_json_value(s.theta)},
                     {"corrections", {s.corrections[0], s.corrections[1]}},
                     {"certify", s.certify}};
    if (s.h) spectral["h"] = *s.h;
    if (s.theta0) spectral["theta0"] = {(*s.theta0)[0], (*s.theta0)[1]};
    if (s.map) spectral["map"] = map_json(*s.map);
    return {{"command", command_name(c.command)},
            {"model", model},
            {"numerics",
             {{"N", n.N},
              {"tol", n.tol},
              {"max_iters", n.max_iters},
              {"bandwidth", n.bandwidth},
              {"m_weight", n.m_weight},
              {"degree", n.degree},
              {"threads", n.threads},
              {"oracle_points", n.oracle_points}}},
            {"spectral", spectral},
            {"output", {{"path", c.output.path}, {"format", c.output.format == Format::Csv ? "csv" : "json"}}}};
}

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorKind::IoError, "SHA-256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

/// The output path does not affect results, so it is left out of the digest.
inline std::string inputs_digest(const RunConfig& c) {
    json j = config_to_json(c);
    j.erase("output");
    return sha256_hex(canonical_json(j));
}

namespace detail {

inline TorusField field_from_list(const Lattice& l, int n, const CoeffList& c) {
    std::vector<cd> v(static_cast<std::size_t>(n) * n);
    for (const auto& e : c) v[storage_index(e.m, n) * n + storage_index(e.n, n)] += e.value;
    return TorusField::from_coeffs(l, n, std::move(v));
}

inline Lattice model_lattice(const RunConfig& c) { return make_lattice(c.model.e1, c.model.e2); }

inline std::pair<double, double> model_epsilons(const ModelSpec& m) {
    const double et = m.epsilon_tilde ? *m.epsilon_tilde : default_epsilon_tilde(*m.epsilon);
    const double eps = m.epsilon ? *m.epsilon : et * et;
    return {eps, et};
}

inline Nonlinearity model_nonlinearity(const RunConfig& c, const Lattice& l) {
    if (c.model.F.empty()) return Nonlinearity{};
    std::vector<PolyTerm> terms;
    for (const auto& t : c.model.F) terms.push_back({t.p1, t.p2, field_from_list(l, c.numerics.N, t.coeff)});
    return polynomial_nonlinearity(std::move(terms));
}

inline SymbolModel build_model(const RunConfig& c, cd z = 0.0) {
    const Lattice l = model_lattice(c);
    const int n = c.numerics.N;
    const auto [eps, et] = model_epsilons(c.model);
    TorusField r = field_from_list(l, n, c.model.r);
    if (z != 0.0) r = r + z * field_from_list(l, n, c.model.r_z);
    return make_symbol_model(l, field_from_list(l, n, c.model.A), field_from_list(l, n, c.model.gamma1),
                             field_from_list(l, n, c.model.gamma2), std::move(r), model_nonlinearity(c, l), eps, et);
}

inline ZFamily model_family(const RunConfig& c) {
    ZFamily fam;
    fam.at = [c](cd z) { return build_model(c, z); };
    const Lattice l = model_lattice(c);
    const TorusField dr = field_from_list(l, c.numerics.N, c.model.r_z);
    fam.dp_dz_over_A = [dr](cd) { return -dr; };
    return fam;
}

inline HJOptions hj_options(const RunConfig& c) {
    HJOptions o;
    o.max_iters = c.numerics.max_iters;
    o.m_weight = c.numerics.m_weight;
    return o;
}

inline RealityOptions reality_options(const RunConfig& c) {
    RealityOptions o;
    o.corrections = c.spectral.corrections;
    o.hj_tol = std::min(c.numerics.tol, 1e-13);
    o.hj = hj_options(c);
    return o;
}

inline Rect padded(const Rect& w, double frac) {
    const double dx = frac * w.width(), dy = frac * w.height();
    return {w.re_min - dx, w.re_max + dx, w.im_min - dy, w.im_max + dy};
}

inline ActionMap map_from_spec(const MapSpec& s, const Rect& window, Vec2 theta0) {
    ActionMap map;
    map.domain = s.domain ? *s.domain : padded(window, 0.5);
    map.theta0 = theta0;
    if (s.type == "affine") {
        map.eval = [M = s.M, v = s.v](cd z) {
            return Vec2{M[0][0] * z.real() + M[0][1] * z.imag() + v[0], M[1][0] * z.real() + M[1][1] * z.imag() + v[1]};
        };
    } else if (s.type == "holomorphic") {
        map.eval = [coeffs = s.coeffs](cd z) {
            cd p = 0.0;
            for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) p = p * z + *it;
            return Vec2{p.real(), p.imag()};
        };
    } else {
        map = separable_action_map(oscillator_model(s.separable.c, s.separable.kappa), map.domain, theta0);
    }
    return map;
}

inline json cvec(const std::vector<cd>& v) {
    json out = json::array();
    for (cd z : v) out.push_back(to_json_value(z));
    return out;
}

inline BSOptions bs_options(const RunConfig& c) {
    BSOptions o;
    o.tol = std::max(c.numerics.tol, 1e-12);
    o.certify = c.spectral.certify;
    o.theta0_default = !c.spectral.theta0;
    o.threads = static_cast<unsigned>(c.numerics.threads);
    return o;
}

inline json tabulation(const SeparableModel& m, int count = 11) {
    json t = {{"E", json::array()}, {"A1", json::array()}, {"A2", json::array()}};
    for (int k = 0; k < count; ++k) {
        const double s = static_cast<double>(k) / (count - 1);
        const double e = std::max(m.p1.E_lo, m.p2.E_lo) + s * (std::min(m.p1.E_hi, m.p2.E_hi) - std::max(m.p1.E_lo, m.p2.E_lo));
        t["E"].push_back(e);
        t["A1"].push_back(m.p1.action(e));
        t["A2"].push_back(m.p2.action(e));
    }
    return t;
}

inline void run_straighten(const RunConfig& c, RunReport& r) {
    const Lattice l = model_lattice(c);
    const EllipticField f = make_elliptic_field(field_from_list(l, c.numerics.N, c.model.g));
    const Straightening s = straighten(f, c.numerics.tol, c.numerics.max_iters);
    r.results = {{"e1", to_json_value(s.induced_lattice.e1)},
                 {"e2", to_json_value(s.induced_lattice.e2)},
                 {"b", to_json_value(s.u.b)},
                 {"residual", s.residual},
                 {"pushforward", pushforward_check(s, f)},
                 {"jacobian_min", s.jacobian_min},
                 {"jacobian_max", s.jacobian_max},
                 {"u_coeffs", coeffs_to_json(s.u.periodic)}};
    r.diagnostics = {{"iterations", s.iterations}, {"history", s.history}};
}

inline void run_hj(const RunConfig& c, RunReport& r) {
    const HJSolution s = solve_hj(build_model(c, c.model.z), c.model.a, c.numerics.tol, hj_options(c));
    r.results = {{"a", to_json_value(s.a)},
                 {"b", to_json_value(s.b)},
                 {"residual", s.residual},
                 {"iterations", s.iterations},
                 {"u_coeffs", coeffs_to_json(s.u_per)}};
    r.diagnostics = {{"contraction_history", s.contraction_history},
                     {"roundoff_floor", s.roundoff_floor},
                     {"size_constant", s.size_constant}};
}

inline void run_actions(const RunConfig& c, RunReport& r) {
    RealityOptions opt = reality_options(c);
    const RealityResult res = find_real_actions(build_model(c, c.model.z), std::max(c.numerics.tol, 1e-12), opt);
    r.results = {{"a_star", to_json_value(res.a_star)},
                 {"I", {res.actions.I1.real(), res.actions.I2.real()}},
                 {"I_imag", {res.actions.I1.imag(), res.actions.I2.imag()}},
                 {"dI2_dI1", to_json_value(res.derivative_ratio)}};
    r.diagnostics = {{"newton_iterations", res.newton_iters}, {"hj_residual", res.solution.residual}};
    if (!c.model.r_z.empty()) {
        const ActionJacobian j = action_jacobian_z(model_family(c), c.model.z, std::max(c.numerics.tol, 1e-12), 1e-4, opt);
        r.results["jacobian"] = {{j.jacobian[0][0], j.jacobian[0][1]}, {j.jacobian[1][0], j.jacobian[1][1]}};
        r.results["det"] = j.det;
        r.diagnostics["richardson_defect"] = j.richardson_defect;
    }
}

inline void run_floquet(const RunConfig& c, RunReport& r) {
    const Lattice l = model_lattice(c);
    const int n = c.numerics.N;
    const FirstOrderOperator op = make_first_order_operator(field_from_list(l, n, c.model.A),
                                                            field_from_list(l, n, c.model.q0),
                                                            field_from_list(l, n, c.model.r));
    const FloquetSpectrumReport rep = spectrum_lattice(op, c.spectral.theta, c.spectral.window);
    json labels = json::array();
    for (const auto& [a, b] : rep.labels) labels.push_back({a, b});
    json oracle = json::array();
    const std::size_t count = std::min<std::size_t>(rep.lattice_points.size(), c.numerics.oracle_points);
    for (std::size_t i = 0; i < count; ++i) {
        const auto eig = truncated_matrix_eigs(op, rep.lattice_points[i], c.spectral.theta, c.numerics.bandwidth, 1);
        oracle.push_back({{"z", to_json_value(rep.lattice_points[i])}, {"min_abs_eig", std::abs(eig.at(0))}});
    }
    r.results = {{"theta0", to_json_value(rep.theta0)},
                 {"coupling", to_json_value(rep.coupling)},
                 {"nondegenerate", rep.nondegenerate},
                 {"spectrum", cvec(rep.lattice_points)},
                 {"labels", labels},
                 {"oracle", oracle}};
    r.diagnostics = {{"bandwidth", c.numerics.bandwidth}};
}

inline void run_bs(const RunConfig& c, RunReport& r) {
    const Vec2 theta0 = c.spectral.theta0.value_or(Vec2{0.0, 0.0});
    const ActionMap map = map_from_spec(*c.spectral.map, c.spectral.window, theta0);
    SpectralLattice l = bs_solve(map, *c.spectral.h, c.spectral.window, bs_options(c));
    r.results = {{"lattice", spectral_lattice_to_json(l)}};
    r.diagnostics = {{"failures", l.meta.failures.size()}, {"candidates", l.meta.candidates}};
    r.lattice = std::move(l);
}

inline void run_oracle(const RunConfig& c, RunReport& r) {
    const Vec2 theta0 = c.spectral.theta0.value_or(Vec2{-0.5, -0.5});
    const SeparableModel m = oscillator_model(c.model.separable->c, c.model.separable->kappa);
    SpectralLattice l = separable_bs(m, *c.spectral.h, c.spectral.window, theta0);
    l.meta.theta0_default = !c.spectral.theta0;
    r.results = {{"lattice", spectral_lattice_to_json(l)}, {"tabulation", tabulation(m)}};
    r.diagnostics = {{"interpolant_tail", {m.p1.interpolant_tail, m.p2.interpolant_tail}}};
    r.lattice = std::move(l);
}

inline void run_pipeline(const RunConfig& c, RunReport& r) {
    const double h = *c.spectral.h;
    const Rect& window = c.spectral.window;
    const Rect domain = padded(window, 0.25);
    const int n = c.numerics.N;
    ZFamily fam;
    std::array<double, 2> corrections = c.spectral.corrections;
    double et = 0.0;
    Vec2 theta0{0.0, 0.0};
    if (c.model.separable) {
        et = c.model.epsilon_tilde.value_or(0.25);
        const auto sf = separable_torus_family(c.model.separable->c, c.model.separable->kappa, et, n);
        fam = sf.family;
        corrections = sf.corrections;
        theta0 = c.spectral.theta0.value_or(Vec2{-0.5, -0.5});
    } else {
        fam = model_family(c);
        et = model_epsilons(c.model).second;
        theta0 = c.spectral.theta0.value_or(Vec2{0.0, 0.0});
    }
    RealityOptions opt = reality_options(c);
    const TabulatedActions tab = tabulate_actions(fam, corrections, domain, theta0, std::max(c.numerics.tol, 1e-12),
                                                  c.numerics.degree, opt, static_cast<unsigned>(c.numerics.threads));
    SpectralLattice l = bs_solve(tab.map, h, window, bs_options(c));
    l.meta.theta0_default = !c.spectral.theta0;
    r.results = {{"lattice", spectral_lattice_to_json(l)}};
    r.diagnostics = {{"tabulation",
                      {{"degree", tab.degree},
                       {"nodes", tab.nodes.size()},
                       {"max_imag", tab.max_imag},
                       {"max_newton", tab.max_newton}}}};
    if (c.model.separable) {
        const SeparableModel m = oscillator_model(c.model.separable->c, c.model.separable->kappa);
        const SpectralLattice o = separable_bs(m, h, window, theta0);
        json rows = json::array();
        double worst = 0.0;
        std::size_t matched = 0;
        for (const auto& e : l.entries) {
            for (const auto& q : o.entries) {
                if (q.k != e.k) continue;
                const double d = std::abs(q.z - e.z);
                worst = std::max(worst, d);
                ++matched;
                rows.push_back({{"k", {e.k[0], e.k[1]}}, {"z", to_json_value(e.z)}, {"z_oracle", to_json_value(q.z)}, {"dz", d}});
            }
        }
        const double tolerance = 10.0 * (et * et + h * h);
        const bool counts = matched == l.entries.size() && matched == o.entries.size();
        r.results["comparison"] = {{"rows", rows},
                                   {"max_deviation", worst},
                                   {"tolerance", tolerance},
                                   {"counts_match", counts},
                                   {"within_tolerance", counts && worst <= tolerance}};
        r.results["oracle"] = spectral_lattice_to_json(o);
    }
    r.lattice = std::move(l);
}

}  // namespace detail

/// Dispatches to the named module. Module errors keep their kind and gain the command as context.
inline RunReport run(const RunConfig& c) {
    RunReport r;
    r.command = command_name(c.command);
    r.inputs_digest = inputs_digest(c);
    try {
        switch (c.command) {
            case Command::Straighten: detail::run_straighten(c, r); break;
            case Command::Hj: detail::run_hj(c, r); break;
            case Command::Actions: detail::run_actions(c, r); break;
            case Command::Floquet: detail::run_floquet(c, r); break;
            case Command::Bs: detail::run_bs(c, r); break;
            case Command::Oracle: detail::run_oracle(c, r); break;
            case Command::Pipeline: detail::run_pipeline(c, r); break;
        }
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::ConfigInvalid) throw;
        throw Error(e.kind(), r.command + ": " + e.message());
    }
    return r;
}

inline json report_to_json(const RunReport& r) {
    return {{"command", r.command},
            {"inputs_digest", r.inputs_digest},
            {"version", r.version},
            {"results", r.results},
            {"diagnostics", r.diagnostics}};
}

inline SpectralLattice spectral_lattice_from_json(const json& j) {
    SpectralLattice l;
    l.h = j.at("h").get<double>();
    const json& w = j.at("window");
    l.window = Rect{w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>(), w.at(3).get<double>()};
    for (const json& e : j.at("entries")) {
        l.entries.push_back({{e.at("k").at(0).get<int>(), e.at("k").at(1).get<int>()},
                             complex_from_json(e.at("z"), "z"),
                             e.at("mult").get<int>(),
                             e.at("res").get<double>()});
    }
    const json& m = j.at("meta");
    LatticeMeta& t = l.meta;
    t.source = m.at("source").get<std::string>();
    t.theta0 = {m.at("theta0").at(0).get<double>(), m.at("theta0").at(1).get<double>()};
    t.theta0_default = m.at("theta0_default").get<bool>();
    t.theta1_supplied = m.at("theta1_supplied").get<bool>();
    t.tol = m.at("tol").get<double>();
    t.probe = m.at("probe").get<int>();
    for (int i = 0; i < 4; ++i) t.k_range[i] = m.at("k_range").at(i).get<int>();
    t.candidates = m.at("candidates").get<int>();
    t.orientation = m.at("orientation").get<int>();
    t.diffeomorphic = m.at("diffeomorphic").get<bool>();
    t.non_injective = m.at("non_injective").get<bool>();
    t.sigma_min = m.at("sigma_min").is_null() ? 0.0 : m.at("sigma_min").get<double>();
    t.sigma_max = m.at("sigma_max").get<double>();
    t.separation = m.at("separation").get<double>();
    t.certified = m.at("certified").get<bool>();
    for (const json& f : m.at("failures")) {
        t.failures.push_back({{f.at("k").at(0).get<int>(), f.at("k").at(1).get<int>()}, f.at("error").get<std::string>()});
    }
    return l;
}

inline RunReport report_from_json(const json& j) {
    RunReport r;
    r.command = j.at("command").get<std::string>();
    r.inputs_digest = j.at("inputs_digest").get<std::string>();
    r.version = j.at("version").get<std::string>();
    r.results = j.at("results");
    r.diagnostics = j.at("diagnostics");
    if (r.results.contains("lattice")) r.lattice = spectral_lattice_from_json(r.results["lattice"]);
    return r;
}

/// Canonical JSON of the whole report, or the lattice entries as CSV.
inline std::string emit(const RunReport& r, Format f) {
    if (f == Format::Csv) return r.lattice ? lattice_csv(*r.lattice) : lattice_csv(SpectralLattice{});
    return canonical_json(report_to_json(r)) + "\n";
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ConfigInvalid, path + ": " + e.what());
    }
}

inline void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << data)) throw Error(ErrorKind::IoError, "cannot write " + path);
}

}  // namespace bsq
