#pragma once
/**
 * Experiment configuration: a JSON document validated against a fixed schema
 * (unknown keys are errors) and turned into models, frames and options.
 *
 *   {
 *     "model":  {"kind": "barotropic", "pressure": {"law": "polytropic", "kappa": 1, "gamma": 2},
 *                "force": {"kind": "gtw_family", "k1": 0.5, "s": 1, "beta": "rho_over_c"}},
 *     "frame":  {"s": 1, "F": "gtw_family", "a0": 0.1, "rho0": 1},
 *     "window": {"x_min": -2, "x_max": 2, "t_max": 1, "nx": 201, "nt": 101}
 *   }
 */

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gtw/constraints.hpp"
#include "gtw/expression.hpp"
#include "gtw/field.hpp"
#include "gtw/fv.hpp"
#include "gtw/models/barotropic.hpp"
#include "gtw/moc.hpp"
#include "gtw/reduction.hpp"

namespace gtw::config {

namespace detail {

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

inline void only_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError("'" + (path.empty() ? std::string("<root>") : path) + "' must be an object");
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || k == a;
        if (!ok) throw ConfigError("unknown key '" + join(path, k) + "'");
    }
}

inline const json* find(const json& j, const char* key) {
    const auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

inline double number(const json& j, const std::string& path, const char* key, std::optional<double> fallback = {}) {
    const json* v = find(j, key);
    if (!v) {
        if (fallback) return *fallback;
        throw ConfigError("missing required key '" + join(path, key) + "'");
    }
    if (!v->is_number()) throw ConfigError("'" + join(path, key) + "' must be a number");
    return v->get<double>();
}

inline std::size_t count(const json& j, const std::string& path, const char* key, std::optional<std::size_t> fallback = {}) {
    const json* v = find(j, key);
    if (!v) {
        if (fallback) return *fallback;
        throw ConfigError("missing required key '" + join(path, key) + "'");
    }
    if (!v->is_number_unsigned()) throw ConfigError("'" + join(path, key) + "' must be a nonnegative integer");
    return v->get<std::size_t>();
}

inline std::string text(const json& j, const std::string& path, const char* key, std::optional<std::string> fallback = {}) {
    const json* v = find(j, key);
    if (!v) {
        if (fallback) return *fallback;
        throw ConfigError("missing required key '" + join(path, key) + "'");
    }
    if (!v->is_string()) throw ConfigError("'" + join(path, key) + "' must be a string");
    return v->get<std::string>();
}

inline bool flag(const json& j, const std::string& path, const char* key, bool fallback) {
    const json* v = find(j, key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw ConfigError("'" + join(path, key) + "' must be true or false");
    return v->get<bool>();
}

inline const json& block(const json& j, const std::string& path, const char* key) {
    const json* v = find(j, key);
    if (!v) throw ConfigError("missing required block '" + join(path, key) + "'");
    return *v;
}

inline std::vector<double> numbers(const json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError("'" + where + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw ConfigError("'" + where + "' must be an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

inline std::vector<std::string> strings(const json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError("'" + where + "' must be an array of expressions");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) throw ConfigError("'" + where + "' must be an array of expressions");
        out.push_back(e.get<std::string>());
    }
    return out;
}

inline FieldVector vec(const std::vector<double>& v) {
    FieldVector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
    return out;
}

inline Expression expr(const std::string& src, const std::vector<std::string>& vars, const std::string& where) {
    try {
        return Expression::parse(src, vars);
    } catch (const ConfigError& e) {
        throw ConfigError("'" + where + "': " + e.what());
    }
}

inline std::vector<Expression> exprs(const json& v, const std::vector<std::string>& vars, const std::string& where) {
    std::vector<Expression> out;
    for (const auto& s : strings(v, where)) out.push_back(expr(s, vars, where));
    return out;
}

/// Vector-valued function of a vector from per-component expressions.
inline std::function<FieldVector(const FieldVector&)> vector_fn(std::vector<Expression> es) {
    return [es = std::move(es)](const FieldVector& u) {
        FieldVector out(static_cast<Eigen::Index>(es.size()));
        for (std::size_t i = 0; i < es.size(); ++i)
            out[static_cast<Eigen::Index>(i)] = es[i](std::span<const double>(u.data(), static_cast<std::size_t>(u.size())));
        return out;
    };
}

/// Vector-valued function of one scalar (x or xi).
inline std::function<FieldVector(double)> curve_fn(std::vector<Expression> es) {
    return [es = std::move(es)](double x) {
        FieldVector out(static_cast<Eigen::Index>(es.size()));
        const double a[1] = {x};
        for (std::size_t i = 0; i < es.size(); ++i) out[static_cast<Eigen::Index>(i)] = es[i](a);
        return out;
    };
}

inline std::function<double(double)> scalar_fn(Expression e) {
    return [e = std::move(e)](double x) {
        const double a[1] = {x};
        return e(a);
    };
}

inline std::vector<std::string> invariant_names(std::size_t m) {
    if (m == 1) return {"R"};
    std::vector<std::string> v;
    for (std::size_t a = 1; a <= m; ++a) v.push_back("R" + std::to_string(a));
    return v;
}

}  // namespace detail

/** Numeric tolerances shared by every command, adjustable with K=V overrides. */
struct Tolerances {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    double sonic_tol = -1.0;         ///< negative: 1e-8 (1 + |s|)
    double compat_tol = 1e-5;
    double residual_tol = 1e-7;
    double constraint_tol = 1e-6;
    double structural_tol = 1e-7;
    double fd_step = 1e-6;
    double fixed_step_size = 1e-3;
    bool fixed_step = false;
    std::map<std::string, double> overrides;

    static const std::vector<std::string>& keys() {
        static const std::vector<std::string> k = {"abs_tol",        "rel_tol",        "sonic_tol",
                                                   "compat_tol",     "residual_tol",   "constraint_tol",
                                                   "structural_tol", "fd_step",        "fixed_step_size"};
        return k;
    }

    double& slot(const std::string& key) {
        if (key == "abs_tol") return abs_tol;
        if (key == "rel_tol") return rel_tol;
        if (key == "sonic_tol") return sonic_tol;
        if (key == "compat_tol") return compat_tol;
        if (key == "residual_tol") return residual_tol;
        if (key == "constraint_tol") return constraint_tol;
        if (key == "structural_tol") return structural_tol;
        if (key == "fd_step") return fd_step;
        if (key == "fixed_step_size") return fixed_step_size;
        throw ConfigError("unknown tolerance '" + key + "'");
    }

    void load(const json& j) {
        for (const auto& [k, v] : j.items()) {
            if (k == "fixed_step") {
                if (!v.is_boolean()) throw ConfigError("'tolerances.fixed_step' must be true or false");
                fixed_step = v.get<bool>();
                continue;
            }
            double& s = slot(k);
            if (!v.is_number()) throw ConfigError("'tolerances." + k + "' must be a number");
            s = v.get<double>();
        }
        check();
    }

    /// "key=value" from the command line.
    void apply_override(const std::string& kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("tolerance override '" + kv + "' is not of the form K=V");
        const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
        double v = 0.0;
        std::size_t used = 0;
        try {
            v = std::stod(val, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != val.size()) throw ConfigError("tolerance override '" + kv + "' has no numeric value");
        slot(key) = v;
        overrides[key] = v;
        check();
    }

    void check() const {
        for (double v : {abs_tol, rel_tol, compat_tol, residual_tol, constraint_tol, structural_tol, fd_step, fixed_step_size})
            if (!(v > 0) || !std::isfinite(v)) throw ConfigError("tolerances must be positive and finite");
    }

    ode::Options ode() const {
        ode::Options o;
        o.abs_tol = abs_tol;
        o.rel_tol = rel_tol;
        o.fixed_step = fixed_step;
        o.fixed_step_size = fixed_step_size;
        return o;
    }

    GtwOptions gtw() const {
        GtwOptions g;
        g.sonic_tol = sonic_tol;
        g.compat_tol = compat_tol;
        g.grad = GradientOperator::central(fd_step);
        g.ode = ode();
        return g;
    }

    MocOptions moc() const {
        MocOptions m;
        m.ode = ode();
        m.constraint_tol = constraint_tol;
        m.structural_tol = structural_tol;
        return m;
    }

    json to_json() const {
        json j;
        for (const auto& k : keys()) j[k] = const_cast<Tolerances*>(this)->slot(k);
        j["fixed_step"] = fixed_step;
        j["overrides"] = json::object();
        for (const auto& [k, v] : overrides) j["overrides"][k] = v;
        return j;
    }
};

/** A model built from the config: the system plus the barotropic parameters when applicable. */
struct Model {
    std::string kind;
    HyperbolicSystem sys;
    std::optional<models::BarotropicModel> barotropic;
    json description;
};

inline models::PressureLaw build_pressure(const json& j) {
    const std::string path = "model.pressure";
    detail::only_keys(j, path, {"law", "kappa", "gamma", "a", "p", "dp"});
    const std::string law = detail::text(j, path, "law");
    if (law == "polytropic") return models::PressureLaw::polytropic(detail::number(j, path, "kappa", 1.0), detail::number(j, path, "gamma"));
    if (law == "isothermal") return models::PressureLaw::isothermal(detail::number(j, path, "a"));
    if (law == "user") {
        auto p = detail::scalar_fn(detail::expr(detail::text(j, path, "p"), {"rho"}, path + ".p"));
        auto dp = detail::scalar_fn(detail::expr(detail::text(j, path, "dp"), {"rho"}, path + ".dp"));
        return models::PressureLaw::user(p, dp);
    }
    throw ConfigError("'model.pressure.law' must be polytropic, isothermal or user");
}

inline models::Beta build_beta(const json* j) {
    if (!j) return models::Beta::rho_over_c();
    if (j->is_number()) return models::Beta::constant(j->get<double>());
    if (j->is_string()) {
        const std::string s = j->get<std::string>();
        if (s == "rho_over_c") return models::Beta::rho_over_c();
        return models::Beta::user(detail::scalar_fn(detail::expr(s, {"rho"}, "model.force.beta")));
    }
    throw ConfigError("'model.force.beta' must be \"rho_over_c\", a number or an expression in rho");
}

inline models::ForceSpec build_force(const json* j) {
    if (!j) return models::ForceSpec::none();
    const std::string path = "model.force";
    detail::only_keys(*j, path, {"kind", "k1", "s", "beta", "f"});
    const std::string kind = detail::text(*j, path, "kind");
    if (kind == "none") return models::ForceSpec::none();
    if (kind == "gtw_family")
        return models::ForceSpec::gtw_family(detail::number(*j, path, "k1"), detail::number(*j, path, "s"),
                                             build_beta(detail::find(*j, "beta")));
    if (kind == "user") {
        const Expression e = detail::expr(detail::text(*j, path, "f"), {"rho", "u"}, path + ".f");
        return models::ForceSpec::user([e](double r, double u) {
            const double a[2] = {r, u};
            return e(a);
        });
    }
    throw ConfigError("'model.force.kind' must be none, gtw_family or user");
}

inline Model build_model(const json& j) {
    const std::string path = "model";
    if (!j.is_object()) throw ConfigError("'model' must be an object");
    const std::string kind = detail::text(j, path, "kind");
    Model m;
    m.kind = kind;
    if (kind == "barotropic") {
        detail::only_keys(j, path, {"kind", "pressure", "force", "rho_min"});
        m.barotropic.emplace(build_pressure(detail::block(j, path, "pressure")), build_force(detail::find(j, "force")),
                             detail::number(j, path, "rho_min", 1e-10));
        m.sys = m.barotropic->system();
        m.description = {{"kind", kind}, {"pressure", m.barotropic->pressure().describe()}};
        if (const json* f = detail::find(j, "force")) m.description["force"] = *f;
        return m;
    }
    if (kind == "user") {
        detail::only_keys(j, path, {"kind", "variables", "matrix", "source", "admissible"});
        const std::vector<std::string> vars = detail::strings(detail::block(j, path, "variables"), "model.variables");
        const std::size_t n = vars.size();
        if (n == 0) throw ConfigError("'model.variables' must not be empty");
        const json& mat = detail::block(j, path, "matrix");
        if (!mat.is_array() || mat.size() != n) throw ConfigError("'model.matrix' must have one row per variable");
        std::vector<Expression> entries;
        for (std::size_t r = 0; r < n; ++r) {
            auto row = detail::exprs(mat[r], vars, "model.matrix");
            if (row.size() != n) throw ConfigError("'model.matrix' must be square");
            for (auto& e : row) entries.push_back(std::move(e));
        }
        m.sys.n = n;
        m.sys.names = vars;
        m.sys.matrix = [entries, n](const FieldVector& u) {
            Matrix a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
            const std::span<const double> v(u.data(), n);
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < n; ++c)
                    a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = entries[r * n + c](v);
            return a;
        };
        if (const json* src = detail::find(j, "source")) {
            auto es = detail::exprs(*src, vars, "model.source");
            if (es.size() != n) throw ConfigError("'model.source' must have one entry per variable");
            m.sys.source = detail::vector_fn(std::move(es));
        }
        if (const json* adm = detail::find(j, "admissible")) {
            const auto texts = detail::strings(*adm, "model.admissible");
            auto es = detail::exprs(*adm, vars, "model.admissible");
            m.sys.admissible = [es](const FieldVector& u) {
                const std::span<const double> v(u.data(), static_cast<std::size_t>(u.size()));
                for (const auto& e : es)
                    if (!(e(v) > 0)) return false;
                return true;
            };
            std::string d;
            for (const auto& t : texts) d += (d.empty() ? "" : " and ") + t + " > 0";
            m.sys.admissible_description = d;
        }
        m.description = j;
        return m;
    }
    throw ConfigError("'model.kind' must be barotropic or user");
}

/** Frame plus the closed-form solution when the config describes the barotropic family. */
struct Frame {
    TravellingFrame frame;
    std::optional<models::GtwClosedForm> closed_form;
    std::optional<FieldVector> anchor;
    double x0 = 0.0;
    std::string kind;
};

inline Frame build_frame(const json& j, const Model& m) {
    const std::string path = "frame";
    detail::only_keys(j, path, {"s", "F", "k1", "a0", "rho0", "anchor", "x0"});
    Frame out;
    const models::ForceSpec* force = m.barotropic ? &m.barotropic->force() : nullptr;
    const bool family = force && force->kind == models::ForceSpec::Kind::gtw_family;
    const double s = detail::number(j, path, "s", family ? std::optional<double>(force->s) : std::nullopt);
    out.x0 = detail::number(j, path, "x0", 0.0);
    const json* fj = detail::find(j, "F");
    out.kind = "zero";
    out.frame = TravellingFrame::classical(s);
    if (fj && fj->is_string()) {
        out.kind = fj->get<std::string>();
        if (out.kind == "gtw_family") {
            const double k1 = detail::number(j, path, "k1", family ? std::optional<double>(force->k1) : std::nullopt);
            out.frame.F = [k1, s](const FieldVector& u) {
                FieldVector f = FieldVector::Zero(u.size());
                f[u.size() - 1] = k1 * (u[u.size() - 1] - s);
                return f;
            };
            out.frame.F_jacobian = [k1](const FieldVector& u) {
                Matrix jac = Matrix::Zero(u.size(), u.size());
                jac(u.size() - 1, u.size() - 1) = k1;
                return jac;
            };
            if (family && k1 == force->k1 && s == force->s && detail::find(j, "a0") && detail::find(j, "rho0")) {
                models::GtwParameters p{k1, s, detail::number(j, path, "a0"), detail::number(j, path, "rho0")};
                out.closed_form.emplace(p, m.barotropic->pressure(), force->beta);
            }
        } else if (out.kind == "source") {
            const HyperbolicSystem sys = m.sys;
            out.frame.F = [sys](const FieldVector& u) { return source_or_zero(sys, u); };
        } else if (out.kind != "zero") {
            throw ConfigError("'frame.F' must be zero, gtw_family, source or an array of expressions");
        }
    } else if (fj) {
        auto es = detail::exprs(*fj, m.sys.names, "frame.F");
        if (es.size() != m.sys.n) throw ConfigError("'frame.F' must have one entry per variable");
        out.kind = "user";
        out.frame.F = detail::vector_fn(std::move(es));
    }
    if (const json* a = detail::find(j, "anchor")) {
        const auto v = detail::numbers(*a, "frame.anchor");
        if (v.size() != m.sys.n) throw ConfigError("'frame.anchor' must have one entry per variable");
        out.anchor = detail::vec(v);
    } else if (out.closed_form) {
        out.anchor = out.closed_form->state(out.x0, 0.0);
    }
    return out;
}

inline GtwWindow build_window(const json& j) {
    const std::string path = "window";
    detail::only_keys(j, path, {"x_min", "x_max", "t_max", "nx", "nt"});
    GtwWindow w;
    w.x_min = detail::number(j, path, "x_min");
    w.x_max = detail::number(j, path, "x_max");
    w.t_max = detail::number(j, path, "t_max");
    w.nx = detail::count(j, path, "nx", 101);
    w.nt = detail::count(j, path, "nt", 51);
    if (!(w.x_max > w.x_min) || !(w.t_max > 0) || w.nx < 3 || w.nt < 3)
        throw ConfigError("'window' needs x_max > x_min, t_max > 0 and at least 3 nodes per axis");
    return w;
}

/** Seeds on t = 0 for characteristic constructions: {"min", "max", "count"}. */
struct SeedSpec {
    double min = -1.0, max = 1.0;
    std::size_t count = 101;

    std::vector<double> nodes() const { return linspace(min, max, count); }
};

inline SeedSpec build_seeds(const json& j, const std::string& path) {
    detail::only_keys(j, path, {"min", "max", "count"});
    SeedSpec s{detail::number(j, path, "min"), detail::number(j, path, "max"), detail::count(j, path, "count", 101)};
    if (!(s.max > s.min) || s.count < 5) throw ConfigError("'" + path + "' needs max > min and at least 5 seeds");
    return s;
}

/** Chart block shared by simple-wave, case-i and case-ii. */
inline RiemannChart build_chart(const json& j, const std::string& path, const Model& m, FieldVector& seed_state) {
    const std::size_t family = detail::count(j, path, "family", m.sys.n - 1);
    if (family >= m.sys.n) throw ConfigError("'" + path + ".family' out of range");
    ChartOptions co;
    co.reference = detail::number(j, path, "reference", 1.0);
    if (detail::find(j, "retained")) co.retained = detail::count(j, path, "retained");
    if (const json* s = detail::find(j, "chart_seed")) {
        const auto v = detail::numbers(*s, path + ".chart_seed");
        if (v.size() != m.sys.n) throw ConfigError("'" + path + ".chart_seed' must have one entry per variable");
        seed_state = detail::vec(v);
    } else {
        seed_state = FieldVector::Zero(static_cast<Eigen::Index>(m.sys.n));
        seed_state[0] = 1.0;
    }
    return riemann_chart(m.sys, family, seed_state, co);
}

struct ExperimentConfig {
    json root;
    std::string source;
    Model model;
    Tolerances tol;
    std::string prefix;

    bool has(const char* key) const { return root.contains(key); }
    const json& at(const char* key) const { return detail::block(root, "", key); }

    Frame frame() const {
        if (!has("frame")) throw ConfigError("missing required block 'frame'");
        return build_frame(root["frame"], model);
    }

    GtwWindow window() const { return build_window(at("window")); }
};

inline ExperimentConfig parse(const json& root, std::string source = "<memory>") {
    detail::only_keys(root, "", {"description", "model", "frame", "window", "tolerances", "output", "states",
                                 "fv", "convergence", "simple_wave", "case_i", "case_ii"});
    ExperimentConfig c;
    c.root = root;
    c.source = std::move(source);
    c.model = build_model(detail::block(root, "", "model"));
    if (const json* t = detail::find(root, "tolerances")) {
        if (!t->is_object()) throw ConfigError("'tolerances' must be an object");
        c.tol.load(*t);
    }
    c.prefix = "";
    if (const json* o = detail::find(root, "output")) {
        detail::only_keys(*o, "output", {"prefix"});
        c.prefix = detail::text(*o, "output", "prefix", "");
    }
    if (const json* w = detail::find(root, "window")) build_window(*w);
    if (const json* f = detail::find(root, "frame")) build_frame(*f, c.model);
    return c;
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

inline ExperimentConfig load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string text = ss.str();
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(line_of(text, e.byte == 0 ? 0 : e.byte - 1), std::string("config is not valid JSON: ") + e.what());
    }
    return parse(root, path);
}

}  // namespace gtw::config
