#pragma once
/**
 * Quasilinear hyperbolic systems  U_t + A(U) U_x = B(U)  and their
 * characteristic (spectral) decomposition.
 */

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gtw/errors.hpp"

namespace gtw {

using FieldVector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/** Eigenvalues in ascending order; right eigenvectors d^i are the columns of
 *  `right`, left eigenvectors l^i the rows of `left`, with l^i . d^j = delta_ij. */
struct SpectralDecomposition {
    FieldVector lambdas;
    Matrix right;
    Matrix left;

    std::size_t size() const { return static_cast<std::size_t>(lambdas.size()); }
    double lambda(std::size_t i) const { return lambdas[static_cast<Eigen::Index>(i)]; }
    FieldVector d(std::size_t i) const { return right.col(static_cast<Eigen::Index>(i)); }
    FieldVector l(std::size_t i) const { return left.row(static_cast<Eigen::Index>(i)).transpose(); }

    /// max |l^i . d^j - delta_ij|
    double biorthonormality_defect() const {
        const Matrix p = left * right;
        return (p - Matrix::Identity(p.rows(), p.cols())).cwiseAbs().maxCoeff();
    }

    /// max_i ||A d^i - lambda^i d^i||
    double eigen_residual(const Matrix& a) const {
        double worst = 0.0;
        for (Eigen::Index i = 0; i < lambdas.size(); ++i)
            worst = std::max(worst, (a * right.col(i) - lambdas[i] * right.col(i)).norm());
        return worst;
    }
};

/**
 * A first-order quasilinear system. Only `n`, `matrix` and `source` are
 * mandatory; the remaining hooks let a model supply closed-form data.
 */
struct HyperbolicSystem {
    std::size_t n = 0;
    std::vector<std::string> names;
    std::function<Matrix(const FieldVector&)> matrix;
    std::function<FieldVector(const FieldVector&)> source;
    /// optional dB/dU, entry (k, i) = dB_k/du_i
    std::function<Matrix(const FieldVector&)> source_jacobian;
    /// optional closed-form eigenstructure; overrides the numeric route when present
    std::function<SpectralDecomposition(const FieldVector&)> eigenstructure;
    std::function<bool(const FieldVector&)> admissible;
    std::string admissible_description = "finite state";
    double hyperbolicity_tol = 1e-8;  ///< relative to max(1, max |lambda|)

    bool is_admissible(const FieldVector& u) const {
        if (static_cast<std::size_t>(u.size()) != n || !u.allFinite()) return false;
        return !admissible || admissible(u);
    }

    void require_admissible(const FieldVector& u) const {
        if (!is_admissible(u)) {
            std::ostringstream os;
            os << "state (" << u.transpose() << ") violates admissibility predicate '"
               << admissible_description << "'";
            throw InadmissibleState(os.str());
        }
    }
};

enum class DecomposeMode { automatic, numeric };

namespace detail {

inline double first_significant(const FieldVector& v) {
    for (Eigen::Index k = 0; k < v.size(); ++k)
        if (std::abs(v[k]) > 1e-12) return v[k];
    return 0.0;
}

inline void check_strict(const FieldVector& lam, double rel_tol) {
    const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i + 1 < lam.size(); ++i) {
        const double gap = lam[i + 1] - lam[i];
        if (gap <= rel_tol * scale)
            throw DegenerateSpeeds(static_cast<std::size_t>(i), static_cast<std::size_t>(i + 1), gap);
    }
}

/// Sorts by eigenvalue, fixes the sign of each d^i and rescales l^i to l^i.d^i = 1.
inline SpectralDecomposition normalize(SpectralDecomposition sd) {
    const Eigen::Index n = sd.lambdas.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return sd.lambdas[a] < sd.lambdas[b]; });
    SpectralDecomposition out;
    out.lambdas.resize(n);
    out.right.resize(n, n);
    out.left.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index src = order[static_cast<std::size_t>(k)];
        out.lambdas[k] = sd.lambdas[src];
        FieldVector d = sd.right.col(src);
        FieldVector l = sd.left.row(src).transpose();
        if (first_significant(d) < 0) {
            d = -d;
            l = -l;
        }
        const double dot = l.dot(d);
        if (dot != 0.0) l /= dot;
        out.right.col(k) = d;
        out.left.row(k) = l.transpose();
    }
    return out;
}

}  // namespace detail

/** Eigenvalues of A(U) computed by the dense general eigensolver. */
inline SpectralDecomposition numeric_eigenstructure(const Matrix& a) {
    const Eigen::Index n = a.rows();
    SpectralDecomposition sd;
    if (n == 1) {
        sd.lambdas = FieldVector::Constant(1, a(0, 0));
        sd.right = Matrix::Ones(1, 1);
        sd.left = Matrix::Ones(1, 1);
        return sd;
    }
    Eigen::EigenSolver<Matrix> es(a, true);
    if (es.info() != Eigen::Success) throw ComplexEigenvalues("eigensolver did not converge");
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    const auto& ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(ev[i].imag()) > 1e-10 * scale) {
            std::ostringstream os;
            os << "complex characteristic speed " << ev[i].real() << (ev[i].imag() < 0 ? "" : "+")
               << ev[i].imag() << "i: system is not hyperbolic at this state";
            throw ComplexEigenvalues(os.str());
        }
    }
    sd.lambdas = ev.real();
    sd.right = es.eigenvectors().real();
    for (Eigen::Index i = 0; i < n; ++i) sd.right.col(i).normalize();
    Eigen::FullPivLU<Matrix> lu(sd.right);
    if (!lu.isInvertible()) throw DegenerateSpeeds(0, 1, 0.0);
    sd.left = lu.inverse();
    return sd;
}

/**
 * Characteristic decomposition at U. The result is sorted ascending, each d^i
 * has its first significant component positive and l^i.d^j = delta_ij.
 */
inline SpectralDecomposition decompose(const HyperbolicSystem& sys, const FieldVector& u,
                                       DecomposeMode mode = DecomposeMode::automatic) {
    sys.require_admissible(u);
    SpectralDecomposition sd;
    if (mode == DecomposeMode::automatic && sys.eigenstructure) {
        sd = sys.eigenstructure(u);
        if (!sd.lambdas.allFinite())
            throw ComplexEigenvalues("closed-form eigenstructure returned non-finite speeds");
    } else {
        sd = numeric_eigenstructure(sys.matrix(u));
    }
    sd = detail::normalize(std::move(sd));
    detail::check_strict(sd.lambdas, sys.hyperbolicity_tol);
    return sd;
}

/** Characteristic speeds only (no eigenvectors). */
inline FieldVector characteristic_speeds(const HyperbolicSystem& sys, const FieldVector& u) {
    if (sys.eigenstructure) return decompose(sys, u).lambdas;
    sys.require_admissible(u);
    const Matrix a = sys.matrix(u);
    if (a.rows() == 1) return FieldVector::Constant(1, a(0, 0));
    Eigen::EigenSolver<Matrix> es(a, false);
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    FieldVector lam(a.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        if (std::abs(es.eigenvalues()[i].imag()) > 1e-10 * scale)
            throw ComplexEigenvalues("complex characteristic speed: system is not hyperbolic");
        lam[i] = es.eigenvalues()[i].real();
    }
    std::sort(lam.begin(), lam.end());
    return lam;
}

/** Rescales each d^i so its first significant component is exactly 1 (and l^i
 *  reciprocally). Used to compare decompositions that differ only by scaling. */
inline SpectralDecomposition canonical_scaling(SpectralDecomposition sd) {
    for (Eigen::Index i = 0; i < sd.lambdas.size(); ++i) {
        const double lead = detail::first_significant(sd.right.col(i));
        if (lead == 0.0) continue;
        sd.right.col(i) /= lead;
        sd.left.row(i) *= lead;
    }
    return sd;
}

inline FieldVector source_or_zero(const HyperbolicSystem& sys, const FieldVector& u) {
    return sys.source ? sys.source(u) : FieldVector::Zero(static_cast<Eigen::Index>(sys.n));
}

/** Pointwise residual of the governing system given U and its partial derivatives. */
inline FieldVector pde_residual(const HyperbolicSystem& sys, const FieldVector& u,
                                const FieldVector& ux, const FieldVector& ut) {
    return ut + sys.matrix(u) * ux - source_or_zero(sys, u);
}

}  // namespace gtw
