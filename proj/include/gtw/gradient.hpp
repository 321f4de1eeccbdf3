#pragma once
/**
 * The state-space gradient operator (d/dU) used by every residual evaluator,
 * plus first derivatives of the characteristic decomposition.
 */

#include <cmath>
#include <functional>
#include <vector>

#include "gtw/system.hpp"

namespace gtw {

struct GradientOperator {
    enum class Mode { analytic, central_difference };

    Mode mode = Mode::central_difference;
    double relative_step = 1e-6;  ///< h_i = relative_step * max(1, |u_i|)
    int order = 2;                ///< 2 (3-point) or 4 (5-point) central stencil

    double step(double ui) const { return relative_step * std::max(1.0, std::abs(ui)); }

    static GradientOperator analytic() { return {Mode::analytic, 1e-6, 2}; }
    static GradientOperator central(double rel = 1e-6, int ord = 2) {
        return {Mode::central_difference, rel, ord};
    }
};

using AdmissibleSet = std::function<bool(const FieldVector&)>;

namespace detail {

inline void check_point(const AdmissibleSet& adm, const FieldVector& p) {
    if (adm && !adm(p)) {
        std::ostringstream os;
        os << "gradient stencil point (" << p.transpose() << ") lies outside the admissible set";
        throw InadmissibleState(os.str());
    }
}

/// Generic stencil: returns d/du_i of a vector-valued function as columns.
template <class F>
Matrix stencil_jacobian(F&& g, const FieldVector& u, const GradientOperator& op,
                        const AdmissibleSet& adm) {
    const Eigen::Index n = u.size();
    Matrix jac;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double h = op.step(u[i]);
        FieldVector p = u, m = u;
        p[i] += h;
        m[i] -= h;
        check_point(adm, p);
        check_point(adm, m);
        FieldVector col;
        if (op.order == 4) {
            FieldVector p2 = u, m2 = u;
            p2[i] += 2 * h;
            m2[i] -= 2 * h;
            check_point(adm, p2);
            check_point(adm, m2);
            col = (8.0 * (g(p) - g(m)) - (g(p2) - g(m2))) / (12.0 * h);
        } else {
            col = (g(p) - g(m)) / (2.0 * h);
        }
        if (jac.size() == 0) jac.resize(col.size(), n);
        jac.col(i) = col;
    }
    return jac;
}

}  // namespace detail

/** Gradient (covector) of a scalar function of the state. */
inline FieldVector grad_scalar(const std::function<double(const FieldVector&)>& f, const FieldVector& u,
                               const GradientOperator& op = {}, const AdmissibleSet& adm = {}) {
    auto wrapped = [&](const FieldVector& p) { return FieldVector::Constant(1, f(p)); };
    return detail::stencil_jacobian(wrapped, u, op, adm).row(0).transpose();
}

/**
 * Jacobian of a vector field, entry (k, i) = dg_k/du_i. In analytic mode the
 * supplied closed-form Jacobian is used when present.
 */
inline Matrix grad_vector(const std::function<FieldVector(const FieldVector&)>& g, const FieldVector& u,
                          const GradientOperator& op = {}, const AdmissibleSet& adm = {},
                          const std::function<Matrix(const FieldVector&)>& analytic = {}) {
    if (op.mode == GradientOperator::Mode::analytic && analytic) return analytic(u);
    return detail::stencil_jacobian(g, u, op, adm);
}

/** dB/dU for a system, honoring a model-provided Jacobian in analytic mode. */
inline Matrix source_jacobian(const HyperbolicSystem& sys, const FieldVector& u, const GradientOperator& op) {
    if (!sys.source) return Matrix::Zero(static_cast<Eigen::Index>(sys.n), static_cast<Eigen::Index>(sys.n));
    if (sys.source_jacobian && op.mode == GradientOperator::Mode::analytic) return sys.source_jacobian(u);
    const GradientOperator numeric{GradientOperator::Mode::central_difference, op.relative_step, op.order};
    return grad_vector(sys.source, u, numeric, [&sys](const FieldVector& p) { return sys.is_admissible(p); });
}

/**
 * Decomposition at U together with its first state derivatives:
 * dright[k](r, i) = d(d^k_r)/du_i,  dlambda(k, i) = d(lambda^k)/du_i.
 */
struct SpectralJet {
    SpectralDecomposition at;
    std::vector<Matrix> dright;
    Matrix dlambda;

    /// (grad d^k) V : directional derivative of d^k along V
    FieldVector dd_along(std::size_t k, const FieldVector& v) const { return dright[k] * v; }
};

inline SpectralJet spectral_jet(const HyperbolicSystem& sys, const FieldVector& u,
                                const GradientOperator& op = {}) {
    SpectralJet jet;
    jet.at = decompose(sys, u);
    const auto n = static_cast<Eigen::Index>(sys.n);
    // Pack lambdas and right eigenvectors into one vector so a single stencil serves both.
    auto pack = [&](const FieldVector& p) {
        const SpectralDecomposition sd = decompose(sys, p);
        FieldVector out(n + n * n);
        out.head(n) = sd.lambdas;
        for (Eigen::Index k = 0; k < n; ++k) out.segment(n + k * n, n) = sd.right.col(k);
        return out;
    };
    const GradientOperator numeric{GradientOperator::Mode::central_difference, op.relative_step, op.order};
    const Matrix jac = detail::stencil_jacobian(pack, u, numeric,
                                                [&sys](const FieldVector& p) { return sys.is_admissible(p); });
    jet.dlambda = jac.topRows(n);
    jet.dright.resize(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) jet.dright[static_cast<std::size_t>(k)] = jac.middleRows(n + k * n, n);
    return jet;
}

}  // namespace gtw
