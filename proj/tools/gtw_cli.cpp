// gtw: command-line driver for travelling-wave constructions and their checks.
//
//   gtw <verb> --config run.json [--out DIR] [--tol-override K=V]... [--fixed-step] [--seed-count N]
//
// Exit codes: 0 ok, 2 config/parse, 3 hyperbolicity/admissibility, 4 sub-shock,
// 5 compatibility/structural, 6 anything else.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gtw/gtw.hpp"

namespace fs = std::filesystem;
using namespace gtw;

namespace {

struct Globals {
    std::string config_path;
    std::string out_dir = ".";
    std::vector<std::string> overrides;
    bool fixed_step = false;
    std::size_t seed_count = 0;
    std::vector<std::string> files;
};

int exit_code(ErrorCode c) {
    switch (c) {
        case ErrorCode::config: return 2;
        case ErrorCode::inadmissible:
        case ErrorCode::complex_eigenvalues:
        case ErrorCode::degenerate_speeds: return 3;
        case ErrorCode::sub_shock: return 4;
        case ErrorCode::compatibility: return 5;
        default: return 6;
    }
}

const char* code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::config: return "config";
        case ErrorCode::inadmissible: return "inadmissible";
        case ErrorCode::complex_eigenvalues: return "complex_eigenvalues";
        case ErrorCode::degenerate_speeds: return "degenerate_speeds";
        case ErrorCode::sub_shock: return "sub_shock";
        case ErrorCode::compatibility: return "compatibility";
        case ErrorCode::integration: return "integration";
        case ErrorCode::crossing: return "crossing";
        case ErrorCode::domain: return "domain";
        case ErrorCode::cfl: return "cfl";
    }
    return "error";
}

std::vector<double> to_std(const FieldVector& v) { return {v.begin(), v.end()}; }

class Run {
public:
    explicit Run(const Globals& g) : g_(g) {
        if (g_.config_path.empty()) throw ConfigError("--config is required for this command");
        cfg_ = config::load(g_.config_path);
        for (const auto& kv : g_.overrides) cfg_.tol.apply_override(kv);
        if (g_.fixed_step) cfg_.tol.fixed_step = true;
        fs::create_directories(g_.out_dir);
    }

    const config::ExperimentConfig& cfg() const { return cfg_; }

    std::string path(const std::string& verb, const std::string& ext) const {
        return (fs::path(g_.out_dir) / (cfg_.prefix + verb + ext)).string();
    }

    json metadata(const std::string& verb) const {
        json m;
        m["command"] = verb;
        m["code_version"] = gtw::version;
        m["config"] = cfg_.source;
        m["model"] = cfg_.model.description;
        if (cfg_.has("frame")) m["frame"] = cfg_.root["frame"];
        m["tolerances"] = cfg_.tol.to_json();
        if (g_.seed_count) m["seed_count_override"] = g_.seed_count;
        return m;
    }

    std::size_t seeds(std::size_t configured) const { return g_.seed_count ? g_.seed_count : configured; }

private:
    const Globals& g_;
    config::ExperimentConfig cfg_;
};

void write_field(const Run& run, const std::string& verb, GridField g) {
    json meta = run.metadata(verb);
    for (const auto& [k, v] : g.metadata.items()) meta[k] = v;
    g.metadata = meta;
    const std::string p = run.path(verb, "_field.gtwf");
    io::write_field(p, g);
    std::cout << "field: " << p << "\n";
}

void write_report(const Run& run, const std::string& verb, json report) {
    report["metadata"] = run.metadata(verb);
    const std::string p = run.path(verb, "_report.json");
    io::write_json(p, report);
    std::cout << "report: " << p << "\n";
}

// ---------------------------------------------------------------- decompose

int cmd_decompose(const Globals& g) {
    Run run(g);
    const auto& cfg = run.cfg();
    const HyperbolicSystem& sys = cfg.model.sys;
    std::vector<std::vector<double>> states;
    if (cfg.has("states")) {
        const json& s = cfg.root["states"];
        if (!s.is_array()) throw ConfigError("'states' must be an array of states");
        for (const auto& e : s) {
            auto v = config::detail::numbers(e, "states");
            if (v.size() != sys.n) throw ConfigError("every entry of 'states' needs one value per variable");
            states.push_back(v);
        }
    }
    std::vector<std::string> header = sys.names;
    for (std::size_t i = 0; i < sys.n; ++i) {
        header.push_back("lambda" + std::to_string(i));
        for (std::size_t k = 0; k < sys.n; ++k) header.push_back("l" + std::to_string(i) + "_" + std::to_string(k));
        for (std::size_t k = 0; k < sys.n; ++k) header.push_back("d" + std::to_string(i) + "_" + std::to_string(k));
    }
    header.push_back("biorthonormality_defect");
    io::CsvWriter csv(header);
    for (const auto& s : states) {
        const FieldVector u = config::detail::vec(s);
        const SpectralDecomposition sd = decompose(sys, u);
        std::vector<double> row = s;
        for (std::size_t i = 0; i < sys.n; ++i) {
            row.push_back(sd.lambda(i));
            for (double v : to_std(sd.l(i))) row.push_back(v);
            for (double v : to_std(sd.d(i))) row.push_back(v);
        }
        row.push_back(sd.biorthonormality_defect());
        csv.row(row);
        std::cout << "U = (" << u.transpose() << ")  lambda = (" << sd.lambdas.transpose() << ")\n";
    }
    const std::string p = run.path("decompose", ".csv");
    csv.write(p);
    std::cout << "table: " << p << " (" << csv.size() << " states)\n";
    return 0;
}

// ---------------------------------------------------------------- gtw

/** Cell-center reference run on the window, compared with the constructed field at its final time. */
json fv_cross_check(const Run& run, const GtwSolution& sol, const config::Frame& fr) {
    const auto& cfg = run.cfg();
    const json& j = cfg.at("fv");
    const std::string path = "fv";
    config::detail::only_keys(j, path, {"scheme", "cells", "cfl", "t_end", "boundary"});
    const GtwWindow win = cfg.window();
    fv::GridSpec spec;
    spec.x_min = win.x_min;
    spec.x_max = win.x_max;
    spec.cells = config::detail::count(j, path, "cells", 512);
    spec.cfl = config::detail::number(j, path, "cfl", 0.45);
    spec.t_end = config::detail::number(j, path, "t_end", win.t_max);
    if (spec.t_end > win.t_max) throw ConfigError("'fv.t_end' lies beyond the window");
    const fv::Scheme scheme = fv::parse_scheme(config::detail::text(j, path, "scheme", "b"));
    const std::string boundary = config::detail::text(j, path, "boundary", fr.closed_form ? "exact" : "extrapolation");
    if (boundary == "exact") {
        if (!fr.closed_form) throw ConfigError("'fv.boundary' = exact needs a closed-form frame");
        const models::GtwClosedForm cf = *fr.closed_form;
        spec.boundary = fv::Boundary::exact_dirichlet;
        spec.exact = [cf](double x, double t) { return cf.state(x, t); };
    } else if (boundary != "extrapolation") {
        throw ConfigError("'fv.boundary' must be exact or extrapolation");
    }
    const GridField& grid = sol.grid;
    const fv::ReferenceRun ref =
        fv::advance(cfg.model.sys, fv::sample_cells(spec, [&grid](double x, double) { return grid(x, 0.0); }, 0.0),
                    spec, scheme);
    double sq = 0.0, mx = 0.0;
    for (std::size_t i = 0; i < ref.x.size(); ++i) {
        const double e = (ref.state[i] - grid(ref.x[i], ref.t)).norm();
        sq += e * e;
        mx = std::max(mx, e);
    }
    json r;
    r["scheme"] = fv::scheme_name(scheme);
    r["cells"] = spec.cells;
    r["t_end"] = ref.t;
    r["steps"] = ref.steps();
    r["l2_vs_constructed"] = std::sqrt(spec.h() * sq);
    r["max_vs_constructed"] = mx;
    if (ref.l2_error >= 0) r["l2_vs_closed_form"] = ref.l2_error;
    return r;
}

int cmd_gtw(const Globals& g) {
    Run run(g);
    const auto& cfg = run.cfg();
    const config::Frame fr = cfg.frame();
    if (!fr.anchor) throw ConfigError("'frame.anchor' is required unless the frame has a closed form (a0, rho0)");
    const GtwWindow win = cfg.window();
    const HyperbolicSystem& sys = cfg.model.sys;
    const GtwOptions opt = cfg.tol.gtw();

    GtwSolution sol = integrate_gtw(sys, fr.frame, *fr.anchor, fr.x0, win, opt);
    json rep;
    rep["s"] = sol.s;
    rep["exact_tw"] = sol.exact_tw;
    rep["anchor"] = to_std(sol.anchor);
    rep["x0"] = sol.x0;
    rep["path_defect"] = sol.path_defect;
    rep["max_compat_residual"] = sol.max_compat_residual;
    rep["max_identity_defect"] = sol.max_identity_defect;
    bool pass = true;

    // PDE residual with U_x = sum pi_j d^j and U_t = F - s U_x at every node
    ResidualReport constructed;
    for (std::size_t j = 0; j < sol.grid.nt(); ++j)
        for (std::size_t i = 0; i < sol.grid.nx(); ++i) {
            const FieldVector u = sol.grid.at(i, j);
            const FieldVector ux = pi_coefficients(sys, fr.frame, u, opt).ux;
            const FieldVector ut = fr.frame.source(u) - fr.frame.s * ux;
            constructed.add(pde_residual(sys, u, ux, ut), sol.grid.x[i], sol.grid.t[j]);
        }
    rep["pde_residual_constructed"] = constructed.to_json();
    pass = pass && constructed.max <= cfg.tol.residual_tol;
    std::vector<double> per_point;
    rep["pde_residual_fd2"] = grid_residual(sys, sol.grid, &per_point).to_json();
    sol.grid.extras["fd2_residual"] = per_point;

    if (fr.closed_form) {
        const models::GtwClosedForm cf = *fr.closed_form;
        const ResidualReport diff = field_difference(sol.grid, [&cf](double x, double t) { return cf.state(x, t); });
        rep["closed_form_error"] = diff.to_json();
        pass = pass && diff.max <= cfg.tol.residual_tol;
        rep["closed_form_residual"] =
            jet_residual(sys,
                         [&cf](double x, double t, FieldVector& u, FieldVector& ux, FieldVector& ut) {
                             const models::FieldJet jt = cf.jet(x, t);
                             u = jt.u;
                             ux = jt.ux;
                             ut = jt.ut;
                         },
                         sol.grid.x, sol.grid.t)
                .to_json();
    }
    if (sol.exact_tw) {
        double worst = 0.0;
        for (std::size_t j = 0; j < sol.grid.nt(); ++j)
            for (std::size_t i = 0; i < sol.grid.nx(); ++i) {
                const double xs = sol.grid.x[i] - sol.s * sol.grid.t[j];
                if (xs < win.x_min || xs > win.x_max) continue;
                worst = std::max(worst, (sol.grid.at(i, j) - sol.grid(xs, 0.0)).cwiseAbs().maxCoeff());
            }
        rep["shift_invariance_defect"] = worst;
        rep["shift_invariance_pass"] = worst <= 1e-6;
        pass = pass && worst <= 1e-6;
    }
    if (cfg.has("fv")) rep["fv"] = fv_cross_check(run, sol, fr);
    rep["pass"] = pass;
    write_field(run, "gtw", sol.grid);
    write_report(run, "gtw", rep);
    std::cout << "constructed residual " << constructed.max << ", path defect " << sol.path_defect
              << (fr.closed_form ? ", closed-form error " + io::format(rep["closed_form_error"]["max"].get<double>()) : "")
              << (pass ? "  [pass]" : "  [FAIL]") << "\n";
    return pass ? 0 : 6;
}

// ---------------------------------------------------------------- verify

int cmd_verify(const Globals& g) {
    if (g.files.empty() || g.files.size() > 2) throw ConfigError("verify takes one or two field files");
    std::vector<GridField> fields;
    for (const auto& f : g.files) {
        try {
            fields.push_back(io::read_field(f));
        } catch (const ParseError& e) {
            throw ParseError(e.line(), f + ": " + std::string(e.what()).substr(std::string(e.what()).find(": ") + 2));
        }
    }
    json rep;
    rep["files"] = g.files;
    std::optional<Run> run;
    if (!g.config_path.empty()) run.emplace(g);
    if (fields.size() == 2) {
        const ResidualReport d = field_difference(fields[0], fields[1]);
        rep["difference"] = d.to_json();
        std::cout << "difference max " << d.max << ", rms " << d.l2 << "\n";
    }
    if (run) {
        const auto& cfg = run->cfg();
        const HyperbolicSystem& sys = cfg.model.sys;
        for (std::size_t k = 0; k < fields.size(); ++k) {
            const GridField& f = fields[k];
            if (f.components != sys.names)
                throw ConfigError(g.files[k] + ": field components do not match the model variables");
            json fr;
            if (f.nx() >= 3 && f.nt() >= 3) {
                const ResidualReport r = grid_residual(sys, f);
                fr["pde_residual_fd2"] = r.to_json();
                std::cout << g.files[k] << ": PDE residual (O(h^2)) max " << r.max << "\n";
            }
            if (cfg.has("frame")) {
                const config::Frame frame = cfg.frame();
                if (frame.closed_form) {
                    const models::GtwClosedForm cf = *frame.closed_form;
                    const ResidualReport d = field_difference(f, [&cf](double x, double t) { return cf.state(x, t); });
                    fr["closed_form_error"] = d.to_json();
                    std::cout << g.files[k] << ": closed-form difference max " << d.max << "\n";
                }
            }
            rep["fields"].push_back(fr);
        }
        write_report(*run, "verify", rep);
    } else {
        std::cout << rep.dump(2) << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------- simulate / convergence

models::GtwClosedForm require_closed_form(const config::Frame& fr, const char* who) {
    if (!fr.closed_form) throw ConfigError(std::string(who) + " needs a closed-form frame (gtw_family with a0, rho0)");
    return *fr.closed_form;
}

SimpleWave build_simple_wave(const Run& run);

/** Exact solution named by a "target"/"initial" key. */
FieldFunction exact_target(const Run& run, const std::string& target) {
    if (target == "closed_form") {
        const models::GtwClosedForm cf = require_closed_form(run.cfg().frame(), "target closed_form");
        return [cf](double x, double t) { return cf.state(x, t); };
    }
    if (target == "simple_wave") {
        auto sw = std::make_shared<SimpleWave>(build_simple_wave(run));
        return [sw](double x, double t) { return (*sw)(x, t); };
    }
    throw ConfigError("target must be closed_form or simple_wave");
}

fv::GridSpec grid_spec(const Run& run, const json& j, const std::string& path) {
    const auto& cfg = run.cfg();
    fv::GridSpec spec;
    std::optional<GtwWindow> win;
    if (cfg.has("window")) win = cfg.window();
    spec.x_min = config::detail::number(j, path, "x_min", win ? std::optional<double>(win->x_min) : std::nullopt);
    spec.x_max = config::detail::number(j, path, "x_max", win ? std::optional<double>(win->x_max) : std::nullopt);
    spec.cells = config::detail::count(j, path, "cells", 256);
    spec.cfl = config::detail::number(j, path, "cfl", 0.45);
    spec.t_end = config::detail::number(j, path, "t_end", win ? std::optional<double>(win->t_max) : std::nullopt);
    return spec;
}

int cmd_simulate(const Globals& g) {
    Run run(g);
    const auto& cfg = run.cfg();
    const json& j = cfg.at("fv");
    const std::string path = "fv";
    config::detail::only_keys(j, path, {"scheme", "cells", "cfl", "t_end", "boundary", "x_min", "x_max", "initial"});
    fv::GridSpec spec = grid_spec(run, j, path);
    const fv::Scheme scheme = fv::parse_scheme(config::detail::text(j, path, "scheme", "b"));
    const json* init = config::detail::find(j, "initial");
    if (!init) throw ConfigError("missing required key 'fv.initial'");
    FieldFunction exact;
    std::vector<FieldVector> u0;
    if (init->is_string()) {
        exact = exact_target(run, init->get<std::string>());
        u0 = fv::sample_cells(spec, exact, 0.0);
    } else {
        auto data = config::detail::curve_fn(config::detail::exprs(*init, {"x"}, "fv.initial"));
        if (init->size() != cfg.model.sys.n) throw ConfigError("'fv.initial' must have one expression per variable");
        u0 = fv::sample_cells(spec, [&data](double x, double) { return data(x); }, 0.0);
    }
    const std::string boundary = config::detail::text(j, path, "boundary", exact ? "exact" : "extrapolation");
    if (boundary == "exact") {
        if (!exact) throw ConfigError("'fv.boundary' = exact needs a named exact solution as 'fv.initial'");
        spec.boundary = fv::Boundary::exact_dirichlet;
    } else if (boundary != "extrapolation") {
        throw ConfigError("'fv.boundary' must be exact or extrapolation");
    }
    spec.exact = exact;
    const fv::ReferenceRun ref = fv::advance(cfg.model.sys, u0, spec, scheme);
    GridField field = ref.final_field(cfg.model.sys.names);
    field.metadata["scheme"] = fv::scheme_name(scheme);
    field.metadata["steps"] = ref.steps();
    if (ref.l2_error >= 0) {
        field.metadata["l2_error"] = ref.l2_error;
        field.metadata["max_error"] = ref.max_error;
    }
    write_field(run, "simulate", field);
    io::CsvWriter steps({"step", "dt", "max_speed"});
    for (std::size_t k = 0; k < ref.steps(); ++k) steps.row({static_cast<double>(k), ref.dt[k], ref.max_speed[k]});
    steps.write(run.path("simulate", "_steps.csv"));
    std::cout << fv::scheme_name(scheme) << ": " << ref.steps() << " steps to t = " << ref.t;
    if (ref.l2_error >= 0) std::cout << ", L2 error " << ref.l2_error;
    std::cout << "\n";
    return 0;
}

int cmd_convergence(const Globals& g) {
    Run run(g);
    const auto& cfg = run.cfg();
    const json& j = cfg.at("convergence");
    const std::string path = "convergence";
    config::detail::only_keys(j, path, {"target", "scheme", "ladder", "cfl", "t_end", "x_min", "x_max", "boundary"});
    fv::GridSpec spec = grid_spec(run, j, path);
    const fv::Scheme scheme = fv::parse_scheme(config::detail::text(j, path, "scheme", "b"));
    const FieldFunction exact = exact_target(run, config::detail::text(j, path, "target", "closed_form"));
    const std::string boundary = config::detail::text(j, path, "boundary", "exact");
    if (boundary == "exact")
        spec.boundary = fv::Boundary::exact_dirichlet;
    else if (boundary == "extrapolation")
        spec.boundary = fv::Boundary::extrapolation;
    else
        throw ConfigError("'convergence.boundary' must be exact or extrapolation");
    std::vector<std::size_t> ladder = {256, 512, 1024, 2048};
    if (const json* l = config::detail::find(j, "ladder")) {
        ladder.clear();
        for (double c : config::detail::numbers(*l, "convergence.ladder")) ladder.push_back(static_cast<std::size_t>(c));
    }
    const fv::ConvergenceTable tab = fv::convergence_study(cfg.model.sys, exact, spec, ladder, scheme);
    io::CsvWriter csv({"cells", "h", "l2", "linf", "steps"});
    for (const auto& r : tab.rows)
        csv.row({static_cast<double>(r.cells), r.h, r.l2, r.linf, static_cast<double>(r.steps)});
    const std::string p = run.path("convergence", ".csv");
    csv.write(p);
    std::cout << "table: " << p << "\n";
    write_report(run, "convergence", tab.to_json());
    for (const auto& r : tab.rows) std::cout << r.cells << " cells: L2 " << r.l2 << "\n";
    if (tab.order_skipped)
        std::cout << "errors at rounding level: order fit skipped\n";
    else
        std::cout << fv::scheme_name(scheme) << " fitted order " << tab.order << "\n";
    return 0;
}

// ---------------------------------------------------------------- characteristic constructions

SimpleWave build_simple_wave(const Run& run) {
    const auto& cfg = run.cfg();
    const json& j = cfg.at("simple_wave");
    const std::string path = "simple_wave";
    config::detail::only_keys(j, path, {"family", "retained", "reference", "chart_seed", "invariants",
                                        "through_state", "profile", "xi_min", "xi_max", "seeds"});
    FieldVector seed;
    const RiemannChart chart = config::build_chart(j, path, cfg.model, seed);
    FieldVector k;
    if (const json* inv = config::detail::find(j, "invariants")) {
        k = config::detail::vec(config::detail::numbers(*inv, path + ".invariants"));
        if (static_cast<std::size_t>(k.size()) != chart.count())
            throw ConfigError("'simple_wave.invariants' needs N-1 values");
    } else if (const json* st = config::detail::find(j, "through_state")) {
        k = chart.invariants(config::detail::vec(config::detail::numbers(*st, path + ".through_state")));
    } else {
        throw ConfigError("'simple_wave' needs 'invariants' or 'through_state'");
    }
    const ScalarData v0 = config::detail::scalar_fn(
        config::detail::expr(config::detail::text(j, path, "profile"), {"xi"}, path + ".profile"));
    SimpleWaveOptions so;
    so.seeds = run.seeds(config::detail::count(j, path, "seeds", 2048));
    return SimpleWave(chart, k, v0, config::detail::number(j, path, "xi_min"), config::detail::number(j, path, "xi_max"), so);
}

int cmd_simple_wave(const Globals& g) {
    Run run(g);
    const auto& cfg = run.cfg();
    const SimpleWave sw = build_simple_wave(run);
    const GtwWindow win = cfg.window();
    const double tb = sw.breaking_time();
    std::cout << "breaking time " << tb << "\n";
    if (win.t_max >= tb) {
        std::ostringstream os;
        os << "window reaches t = " << win.t_max << " but the wave breaks at t_b = " << tb;
        throw PostBreakingQuery(tb, os.str());
    }
    GridField field = sw.field(linspace(win.x_min, win.x_max, win.nx), linspace(0.0, win.t_max, win.nt));
    FieldVector seed;
    const RiemannChart chart = config::build_chart(cfg.at("simple_wave"), "simple_wave", cfg.model, seed);
    std::vector<double> defect(field.nx() * field.nt());
    double worst = 0.0;
    for (std::size_t jt = 0; jt < field.nt(); ++jt)
        for (std::size_t i = 0; i < field.nx(); ++i) {
            const double d = (chart.invariants(field.at(i, jt)) - sw.invariants()).cwiseAbs().maxCoeff();
            defect[field.point(i, jt)] = d;
            worst = std::max(worst, d);
        }
    field.extras["invariant_defect"] = defect;
    field.metadata["invariants"] = to_std(sw.invariants());
    field.metadata["max_invariant_defect"] = worst;
    write_field(run, "simple_wave", field);
    std::cout << "invariant defect " << worst << "\n";
    return 0;
}

std::vector<FieldVector> r_grid(const json& s, const std::string& path) {
    const double lo = config::detail::number(s, path, "R_min"), hi = config::detail::number(s, path, "R_max");
    std::vector<FieldVector> out;
    for (double r : linspace(lo, hi, config::detail::count(s, path, "R_count", 17))) out.push_back(FieldVector::Constant(1, r));
    return out;
}

std::vector<double> v_grid(const json& s, const std::string& path) {
    return linspace(config::detail::number(s, path, "v_min"), config::detail::number(s, path, "v_max"),
                    config::detail::count(s, path, "v_count", 17));
}

void lattice_outputs(const Run& run, const std::string& verb, const CharacteristicLattice& lat, json extra) {
    const auto& cfg = run.cfg();
    const GtwWindow win = cfg.window();
    const ResidualReport res = lattice_residual(cfg.model.sys, lat, 4);
    GridField field = lat.resample(linspace(win.x_min, win.x_max, win.nx));
    field.metadata["lattice_residual"] = res.to_json();
    for (const auto& [k, v] : extra.items()) field.metadata[k] = v;
    write_field(run, verb, field);
    io::CsvWriter csv({"seed", "t", "x"});
    for (std::size_t jt = 0; jt < lat.nt(); ++jt)
        for (std::size_t k = 0; k < lat.ns(); ++k) csv.row({lat.seeds[k], lat.times[jt], lat.x(jt, k)});
    csv.write(run.path(verb, "_characteristics.csv"));
    std::cout << "PDE residual along characteristics (4th order) " << res.max << "\n";
}

int cmd_case_i(const Globals& g) {
    Run run(g);
    const auto& cfg = run.cfg();
    const json& j = cfg.at("case_i");
    const std::string path = "case_i";
    config::detail::only_keys(j, path, {"family", "retained", "reference", "chart_seed", "F", "R0", "profile", "seeds",
                                        "structural"});
    FieldVector seed;
    const RiemannChart chart = config::build_chart(j, path, cfg.model, seed);
    const auto rnames = config::detail::invariant_names(chart.count());

    json extra;
    std::optional<StructuralReport> srep;
    if (const json* s = config::detail::find(j, "structural")) {
        const std::string sp = path + ".structural";
        config::detail::only_keys(*s, sp, {"R_min", "R_max", "R_count", "v_min", "v_max", "v_count"});
        srep = structural_case_i(chart, r_grid(*s, sp), v_grid(*s, sp), cfg.tol.structural_tol);
        extra["structural"] = srep->to_json();
        if (!srep->holds) {
            std::ostringstream os;
            os << "sigma l.B is not a function of R alone: variation " << srep->max_variation() << " exceeds "
               << srep->tolerance;
            throw CompatibilityViolation(srep->max_variation(), os.str());
        }
    }
    InvariantField f;
    if (const json* fj = config::detail::find(j, "F")) {
        auto es = config::detail::exprs(*fj, rnames, path + ".F");
        if (es.size() != chart.count()) throw ConfigError("'case_i.F' needs N-1 expressions");
        f = config::detail::vector_fn(std::move(es));
    } else {
        if (!srep || chart.count() != 1) throw ConfigError("'case_i.F' is required unless a structural scan fits it (N = 2)");
        const interp::CubicTable tab = srep->table(0);
        f = [tab](const FieldVector& r) { return FieldVector::Constant(1, tab(r[0])); };
        extra["F_source"] = "fitted";
    }
    const FieldVector r0 = config::detail::vec(config::detail::numbers(config::detail::block(j, path, "R0"), path + ".R0"));
    if (static_cast<std::size_t>(r0.size()) != chart.count()) throw ConfigError("'case_i.R0' needs N-1 values");
    const ScalarData v0 = config::detail::scalar_fn(
        config::detail::expr(config::detail::text(j, path, "profile"), {"x"}, path + ".profile"));
    config::SeedSpec seeds = config::build_seeds(config::detail::block(j, path, "seeds"), path + ".seeds");
    seeds.count = run.seeds(seeds.count);
    const GtwWindow win = cfg.window();
    MocOptions mo = cfg.tol.moc();
    const CaseISolution sol = case_i_solve(chart, f, r0, v0, seeds.nodes(), linspace(0.0, win.t_max, win.nt), mo);
    extra["structural_deviation"] = sol.lattice.metadata["structural_deviation"];
    lattice_outputs(run, "case_i", sol.lattice, extra);
    return 0;
}

int cmd_case_ii(const Globals& g) {
    Run run(g);
    const auto& cfg = run.cfg();
    const json& j = cfg.at("case_ii");
    const std::string path = "case_ii";
    config::detail::only_keys(j, path, {"family", "retained", "reference", "chart_seed", "F", "G", "R0", "profile",
                                        "seeds", "structural"});
    FieldVector seed;
    const RiemannChart chart = config::build_chart(j, path, cfg.model, seed);
    const auto rnames = config::detail::invariant_names(chart.count());
    auto fes = config::detail::exprs(config::detail::block(j, path, "F"), rnames, path + ".F");
    auto ges = config::detail::exprs(config::detail::block(j, path, "G"), rnames, path + ".G");
    if (fes.size() != chart.count() || ges.size() != chart.count())
        throw ConfigError("'case_ii.F' and 'case_ii.G' need N-1 expressions each");
    const InvariantField f = config::detail::vector_fn(std::move(fes));
    const InvariantField gf = config::detail::vector_fn(std::move(ges));
    json extra;
    if (const json* s = config::detail::find(j, "structural")) {
        const std::string sp = path + ".structural";
        config::detail::only_keys(*s, sp, {"R_min", "R_max", "R_count", "v_min", "v_max", "v_count"});
        const StructuralReport rep = structural_case_ii(chart, f, gf, r_grid(*s, sp), v_grid(*s, sp), cfg.tol.structural_tol);
        extra["structural"] = rep.to_json();
        if (!rep.holds) {
            std::ostringstream os;
            os << "case ii structure fails: residual " << rep.max_residual << " exceeds " << rep.tolerance;
            throw CompatibilityViolation(rep.max_residual, os.str());
        }
    }
    auto r0es = config::detail::exprs(config::detail::block(j, path, "R0"), {"x"}, path + ".R0");
    if (r0es.size() != chart.count()) throw ConfigError("'case_ii.R0' needs N-1 expressions");
    const InitialData r0 = config::detail::curve_fn(std::move(r0es));
    const ScalarData v0 = config::detail::scalar_fn(
        config::detail::expr(config::detail::text(j, path, "profile"), {"x"}, path + ".profile"));
    config::SeedSpec seeds = config::build_seeds(config::detail::block(j, path, "seeds"), path + ".seeds");
    seeds.count = run.seeds(seeds.count);
    const GtwWindow win = cfg.window();
    const CharacteristicLattice lat =
        case_ii_solve(chart, f, gf, r0, v0, seeds.nodes(), linspace(0.0, win.t_max, win.nt), cfg.tol.moc());
    lattice_outputs(run, "case_ii", lat, extra);
    return 0;
}

void report_error(const Error& e) {
    json j;
    j["error"] = code_name(e.code());
    j["message"] = e.what();
    if (const auto* s = dynamic_cast<const SubShockSingularity*>(&e)) {
        j["family"] = s->family;
        j["state"] = to_std(s->state);
        if (s->located) j["locus"] = {{"x", s->x}, {"t", s->t}};
    } else if (const auto* c = dynamic_cast<const CompatibilityViolation*>(&e)) {
        j["magnitude"] = c->residual;
    } else if (const auto* d = dynamic_cast<const InitialDataViolatesConstraints*>(&e)) {
        j["magnitude"] = d->residual;
        j["x"] = d->x;
    } else if (const auto* p = dynamic_cast<const ParseError*>(&e)) {
        j["line"] = p->line();
    } else if (const auto* b = dynamic_cast<const PostBreakingQuery*>(&e)) {
        j["breaking_time"] = b->breaking_time;
    }
    std::cerr << "error: " << e.what() << "\n" << j.dump(-1, ' ', false, json::error_handler_t::replace) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generalized travelling waves of quasilinear hyperbolic systems"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "experiment config (JSON)");
    app.add_option("--out", g.out_dir, "output directory");
    app.add_option("--tol-override", g.overrides, "tolerance override K=V (repeatable)");
    app.add_flag("--fixed-step", g.fixed_step, "fixed-step ODE integration");
    app.add_option("--seed-count", g.seed_count, "number of characteristic seeds");

    struct Verb {
        const char* name;
        const char* help;
        int (*fn)(const Globals&);
    };
    const Verb verbs[] = {
        {"decompose", "characteristic decomposition at the configured states", cmd_decompose},
        {"gtw", "construct a generalized travelling wave and verify it", cmd_gtw},
        {"verify", "residuals and differences of stored field files", cmd_verify},
        {"simulate", "reference finite-volume run", cmd_simulate},
        {"simple-wave", "simple wave and its breaking time", cmd_simple_wave},
        {"case-i", "decoupled invariant ODE plus scalar law", cmd_case_i},
        {"case-ii", "decoupled invariant PDE with lambda depending on R only", cmd_case_ii},
        {"convergence", "refinement study of a reference scheme", cmd_convergence},
    };
    int (*chosen)(const Globals&) = nullptr;
    for (const Verb& v : verbs) {
        CLI::App* sub = app.add_subcommand(v.name, v.help);
        sub->fallthrough();
        if (std::string(v.name) == "verify") sub->add_option("files", g.files, "field file(s)");
        sub->callback([&chosen, fn = v.fn] { chosen = fn; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    try {
        return chosen(g);
    } catch (const Error& e) {
        report_error(e);
        return exit_code(e.code());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 6;
    }
}
