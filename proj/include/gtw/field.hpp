#pragma once
/**
 * Solution fields on regular (x, t) grids, characteristic lattices, and the
 * residual / difference reports computed on them.
 */

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gtw/interpolation.hpp"
#include "gtw/system.hpp"

namespace gtw {

using json = nlohmann::json;

inline std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = a;
        return v;
    }
    for (std::size_t i = 0; i < n; ++i)
        v[i] = (i + 1 == n) ? b : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

/** Values of an N-component field on the tensor grid x (fastest) by t. */
struct GridField {
    std::vector<double> x, t;
    std::vector<std::string> components;
    std::vector<double> values;                          ///< ((j * nx + i) * ncomp + k)
    std::map<std::string, std::vector<double>> extras;   ///< optional per-point scalar columns
    json metadata = json::object();

    GridField() = default;
    GridField(std::vector<double> xs, std::vector<double> ts, std::vector<std::string> names)
        : x(std::move(xs)), t(std::move(ts)), components(std::move(names)),
          values(x.size() * t.size() * components.size(), 0.0) {}

    std::size_t nx() const { return x.size(); }
    std::size_t nt() const { return t.size(); }
    std::size_t ncomp() const { return components.size(); }
    std::size_t point(std::size_t i, std::size_t j) const { return j * nx() + i; }

    FieldVector at(std::size_t i, std::size_t j) const {
        FieldVector v(static_cast<Eigen::Index>(ncomp()));
        for (std::size_t k = 0; k < ncomp(); ++k) v[static_cast<Eigen::Index>(k)] = values[point(i, j) * ncomp() + k];
        return v;
    }

    void set(std::size_t i, std::size_t j, const FieldVector& v) {
        for (std::size_t k = 0; k < ncomp(); ++k) values[point(i, j) * ncomp() + k] = v[static_cast<Eigen::Index>(k)];
    }

    /// Throws DomainError when the shape invariants do not hold.
    void validate() const {
        if (x.empty() || t.empty() || components.empty()) throw DomainError("field grid is empty");
        if (!interp::strictly_increasing(x)) throw DomainError("field x grid is not strictly increasing");
        if (!interp::strictly_increasing(t)) throw DomainError("field t grid is not strictly increasing");
        if (values.size() != nx() * nt() * ncomp()) throw DomainError("field value array has the wrong size");
        for (const auto& [name, col] : extras)
            if (col.size() != nx() * nt()) throw DomainError("extra column '" + name + "' has the wrong size");
    }

    /// Tensor-product cubic Lagrange interpolation.
    FieldVector operator()(double xq, double tq) const {
        const double span_x = x.back() - x.front(), span_t = t.back() - t.front();
        if (xq < x.front() - 1e-12 * (1 + span_x) || xq > x.back() + 1e-12 * (1 + span_x) ||
            tq < t.front() - 1e-12 * (1 + span_t) || tq > t.back() + 1e-12 * (1 + span_t))
            throw DomainError("field evaluated outside its grid");
        double wx[4], wt[4];
        std::size_t cx = 0, ct = 0;
        const std::size_t ix = interp::lagrange_stencil(x, xq, wx, cx);
        const std::size_t it = interp::lagrange_stencil(t, tq, wt, ct);
        FieldVector out = FieldVector::Zero(static_cast<Eigen::Index>(ncomp()));
        for (std::size_t b = 0; b < ct; ++b)
            for (std::size_t a = 0; a < cx; ++a) out += wt[b] * wx[a] * at(ix + a, it + b);
        return out;
    }
};

using FieldFunction = std::function<FieldVector(double, double)>;

inline GridField sample(const FieldFunction& fn, const std::vector<double>& xs, const std::vector<double>& ts,
                        std::vector<std::string> names) {
    GridField g(xs, ts, std::move(names));
    for (std::size_t j = 0; j < ts.size(); ++j)
        for (std::size_t i = 0; i < xs.size(); ++i) g.set(i, j, fn(xs[i], ts[j]));
    return g;
}

/** Max / RMS summary of a pointwise norm, with the location of the maximum. */
struct ResidualReport {
    double max = 0.0;
    double l2 = 0.0;  ///< root-mean-square over the evaluated points
    double x_at_max = std::numeric_limits<double>::quiet_NaN();
    double t_at_max = std::numeric_limits<double>::quiet_NaN();
    FieldVector component_max;
    std::size_t points = 0;

    void add(const FieldVector& r, double x, double t) {
        if (component_max.size() == 0) component_max = FieldVector::Zero(r.size());
        component_max = component_max.cwiseMax(r.cwiseAbs());
        const double nrm = r.cwiseAbs().maxCoeff();
        sumsq_ += nrm * nrm;
        if (points == 0 || nrm > max) {
            max = nrm;
            x_at_max = x;
            t_at_max = t;
        }
        ++points;
        l2 = std::sqrt(sumsq_ / static_cast<double>(points));
    }

    json to_json() const {
        json j;
        j["max"] = max;
        j["l2"] = l2;
        j["points"] = points;
        j["x_at_max"] = std::isfinite(x_at_max) ? json(x_at_max) : json(nullptr);
        j["t_at_max"] = std::isfinite(t_at_max) ? json(t_at_max) : json(nullptr);
        std::vector<double> cm(component_max.begin(), component_max.end());
        j["component_max"] = cm;
        return j;
    }

private:
    double sumsq_ = 0.0;
};

/** PDE residual from closed-form value and first derivatives on a grid. */
inline ResidualReport jet_residual(const HyperbolicSystem& sys,
                                   const std::function<void(double, double, FieldVector&, FieldVector&, FieldVector&)>& jet,
                                   const std::vector<double>& xs, const std::vector<double>& ts) {
    ResidualReport rep;
    FieldVector u, ux, ut;
    for (double t : ts)
        for (double x : xs) {
            jet(x, t, u, ux, ut);
            rep.add(pde_residual(sys, u, ux, ut), x, t);
        }
    return rep;
}

/** PDE residual of a gridded field with second-order central differences at interior points. */
inline ResidualReport grid_residual(const HyperbolicSystem& sys, const GridField& g,
                                    std::vector<double>* per_point = nullptr) {
    g.validate();
    if (g.ncomp() != sys.n) throw ConfigError("field has " + std::to_string(g.ncomp()) +
                                              " components, model expects " + std::to_string(sys.n));
    if (g.nx() < 3 || g.nt() < 3) throw DomainError("residual needs at least 3x3 grid points");
    ResidualReport rep;
    if (per_point) per_point->assign(g.nx() * g.nt(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t j = 1; j + 1 < g.nt(); ++j)
        for (std::size_t i = 1; i + 1 < g.nx(); ++i) {
            const FieldVector u = g.at(i, j);
            FieldVector ux(u.size()), ut(u.size());
            const FieldVector um = g.at(i - 1, j), up = g.at(i + 1, j);
            const FieldVector vm = g.at(i, j - 1), vp = g.at(i, j + 1);
            for (Eigen::Index k = 0; k < u.size(); ++k) {
                ux[k] = interp::central_derivative(g.x[i - 1], g.x[i], g.x[i + 1], um[k], u[k], up[k]);
                ut[k] = interp::central_derivative(g.t[j - 1], g.t[j], g.t[j + 1], vm[k], u[k], vp[k]);
            }
            const FieldVector r = pde_residual(sys, u, ux, ut);
            rep.add(r, g.x[i], g.t[j]);
            if (per_point) (*per_point)[g.point(i, j)] = r.cwiseAbs().maxCoeff();
        }
    return rep;
}

/** Pointwise difference between two fields on identical grids. */
inline ResidualReport field_difference(const GridField& a, const GridField& b) {
    a.validate();
    b.validate();
    if (a.x != b.x || a.t != b.t || a.components != b.components)
        throw ConfigError("fields are defined on different grids or components");
    ResidualReport rep;
    for (std::size_t j = 0; j < a.nt(); ++j)
        for (std::size_t i = 0; i < a.nx(); ++i) rep.add(a.at(i, j) - b.at(i, j), a.x[i], a.t[j]);
    return rep;
}

inline ResidualReport field_difference(const GridField& a, const FieldFunction& exact) {
    a.validate();
    ResidualReport rep;
    for (std::size_t j = 0; j < a.nt(); ++j)
        for (std::size_t i = 0; i < a.nx(); ++i) rep.add(a.at(i, j) - exact(a.x[i], a.t[j]), a.x[i], a.t[j]);
    return rep;
}

/**
 * Solution sampled along characteristics: x(t_j; xi_k) and U(t_j; xi_k) for
 * seeds xi_k (ascending) and output times t_j.
 */
struct CharacteristicLattice {
    std::vector<std::string> components;
    std::vector<double> seeds, times;
    std::vector<double> xs;           ///< (j * nseeds + k)
    std::vector<FieldVector> states;  ///< (j * nseeds + k)
    double first_crossing = std::numeric_limits<double>::infinity();
    json metadata = json::object();

    std::size_t ns() const { return seeds.size(); }
    std::size_t nt() const { return times.size(); }
    double x(std::size_t j, std::size_t k) const { return xs[j * ns() + k]; }
    const FieldVector& u(std::size_t j, std::size_t k) const { return states[j * ns() + k]; }

    /// Earliest output time at which neighbouring characteristics are out of order.
    double detect_crossing() const {
        for (std::size_t j = 0; j < nt(); ++j)
            for (std::size_t k = 0; k + 1 < ns(); ++k)
                if (!(x(j, k + 1) > x(j, k))) return times[j];
        return std::numeric_limits<double>::infinity();
    }

    /// x-interval covered by the lattice at every output time.
    std::pair<double, double> common_range() const {
        double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < nt(); ++j) {
            lo = std::max(lo, x(j, 0));
            hi = std::min(hi, x(j, ns() - 1));
        }
        return {lo, hi};
    }

    /// Resamples each time level onto `grid_x` with monotone cubic interpolation in x.
    GridField resample(const std::vector<double>& grid_x) const {
        GridField g(grid_x, times, components);
        g.metadata = metadata;
        const std::size_t n = components.size();
        for (std::size_t j = 0; j < nt(); ++j) {
            std::vector<double> xj(ns());
            for (std::size_t k = 0; k < ns(); ++k) xj[k] = x(j, k);
            if (!interp::strictly_increasing(xj))
                throw CharacteristicCrossing(times[j], "characteristics cross before t=" + std::to_string(times[j]));
            const double tol = 1e-12 * (1 + std::abs(xj.back() - xj.front()));
            for (double q : grid_x)
                if (q < xj.front() - tol || q > xj.back() + tol)
                    throw DomainError("resampling point x=" + std::to_string(q) + " not covered at t=" +
                                      std::to_string(times[j]));
            for (std::size_t c = 0; c < n; ++c) {
                std::vector<double> yj(ns());
                for (std::size_t k = 0; k < ns(); ++k) yj[k] = u(j, k)[static_cast<Eigen::Index>(c)];
                const interp::Pchip p(xj, yj);
                for (std::size_t i = 0; i < grid_x.size(); ++i)
                    g.values[g.point(i, j) * n + c] = p(grid_x[i]);
            }
        }
        return g;
    }
};

/**
 * Partial derivatives of the lattice field at interior node (j, k) by
 * second-order differences in characteristic coordinates:
 * U_x = U_xi / X_xi and U_t = U_tau - X_tau U_x.
 */
inline void lattice_derivatives(const CharacteristicLattice& lat, std::size_t j, std::size_t k, FieldVector& ux,
                                FieldVector& ut) {
    const double t0 = lat.times[j - 1], t1 = lat.times[j], t2 = lat.times[j + 1];
    const double s0 = lat.seeds[k - 1], s1 = lat.seeds[k], s2 = lat.seeds[k + 1];
    const double x_tau = interp::central_derivative(t0, t1, t2, lat.x(j - 1, k), lat.x(j, k), lat.x(j + 1, k));
    const double x_xi = interp::central_derivative(s0, s1, s2, lat.x(j, k - 1), lat.x(j, k), lat.x(j, k + 1));
    const FieldVector& u = lat.u(j, k);
    ux.resize(u.size());
    ut.resize(u.size());
    for (Eigen::Index c = 0; c < u.size(); ++c) {
        const double u_tau = interp::central_derivative(t0, t1, t2, lat.u(j - 1, k)[c], u[c], lat.u(j + 1, k)[c]);
        const double u_xi = interp::central_derivative(s0, s1, s2, lat.u(j, k - 1)[c], u[c], lat.u(j, k + 1)[c]);
        ux[c] = u_xi / x_xi;
        ut[c] = u_tau - x_tau * ux[c];
    }
}

/** Fourth-order variant on 5-point stencils; node (j, k) needs two neighbours each way. */
inline void lattice_derivatives4(const CharacteristicLattice& lat, std::size_t j, std::size_t k, FieldVector& ux,
                                 FieldVector& ut) {
    double wt[5], ws[5];
    interp::derivative_weights(std::span<const double>(lat.times).subspan(j - 2, 5), lat.times[j], wt);
    interp::derivative_weights(std::span<const double>(lat.seeds).subspan(k - 2, 5), lat.seeds[k], ws);
    const FieldVector& u = lat.u(j, k);
    double x_tau = 0.0, x_xi = 0.0;
    FieldVector u_tau = FieldVector::Zero(u.size()), u_xi = FieldVector::Zero(u.size());
    for (std::size_t a = 0; a < 5; ++a) {
        x_tau += wt[a] * lat.x(j - 2 + a, k);
        x_xi += ws[a] * lat.x(j, k - 2 + a);
        u_tau += wt[a] * lat.u(j - 2 + a, k);
        u_xi += ws[a] * lat.u(j, k - 2 + a);
    }
    ux = u_xi / x_xi;
    ut = u_tau - x_tau * ux;
}

/** PDE residual of a characteristic lattice at its interior nodes (order 2 or 4). */
inline ResidualReport lattice_residual(const HyperbolicSystem& sys, const CharacteristicLattice& lat, int order = 2) {
    ResidualReport rep;
    const std::size_t m = order == 4 ? 2 : 1;
    if (lat.nt() < 2 * m + 1 || lat.ns() < 2 * m + 1) return rep;
    FieldVector ux, ut;
    for (std::size_t j = m; j + m < lat.nt(); ++j)
        for (std::size_t k = m; k + m < lat.ns(); ++k) {
            if (order == 4)
                lattice_derivatives4(lat, j, k, ux, ut);
            else
                lattice_derivatives(lat, j, k, ux, ut);
            rep.add(pde_residual(sys, lat.u(j, k), ux, ut), lat.x(j, k), lat.times[j]);
        }
    return rep;
}

}  // namespace gtw
