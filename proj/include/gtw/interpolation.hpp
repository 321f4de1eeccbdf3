#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "gtw/errors.hpp"

namespace gtw::interp {

/// Index i with nodes[i] <= x <= nodes[i+1] (clamped to valid cells).
inline std::size_t locate(std::span<const double> nodes, double x) {
    if (nodes.size() < 2) return 0;
    auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
    std::size_t i = static_cast<std::size_t>(std::distance(nodes.begin(), it));
    if (i == 0) return 0;
    return std::min(i - 1, nodes.size() - 2);
}

inline bool strictly_increasing(std::span<const double> v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] > v[i - 1])) return false;
    return true;
}

/// Second-order derivative of samples at interior node i on a nonuniform grid.
inline double central_derivative(double xm, double x0, double xp, double fm, double f0, double fp) {
    const double h1 = x0 - xm, h2 = xp - x0;
    return -h2 / (h1 * (h1 + h2)) * fm + (h2 - h1) / (h1 * h2) * f0 + h1 / (h2 * (h1 + h2)) * fp;
}

/// Weights w with f'(at) ~ sum w_a f(nodes_a): derivative of the Lagrange interpolant.
inline void derivative_weights(std::span<const double> nodes, double at, std::span<double> w) {
    const std::size_t n = nodes.size();
    for (std::size_t a = 0; a < n; ++a) {
        double sum = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            if (m == a) continue;
            double term = 1.0 / (nodes[a] - nodes[m]);
            for (std::size_t l = 0; l < n; ++l)
                if (l != a && l != m) term *= (at - nodes[l]) / (nodes[a] - nodes[l]);
            sum += term;
        }
        w[a] = sum;
    }
}

/// Lagrange weights of the (up to) 4-point stencil around x. Returns first index.
inline std::size_t lagrange_stencil(std::span<const double> nodes, double x, double w[4], std::size_t& count) {
    const std::size_t n = nodes.size();
    if (n == 1) {
        w[0] = 1.0;
        count = 1;
        return 0;
    }
    count = std::min<std::size_t>(4, n);
    const std::size_t cell = locate(nodes, x);
    std::size_t first = cell >= 1 ? cell - 1 : 0;
    if (first + count > n) first = n - count;
    for (std::size_t a = 0; a < count; ++a) {
        double wa = 1.0;
        for (std::size_t b = 0; b < count; ++b)
            if (b != a) wa *= (x - nodes[first + b]) / (nodes[first + a] - nodes[first + b]);
        w[a] = wa;
    }
    return first;
}

/**
 * Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes) on
 * strictly increasing nodes.
 */
class Pchip {
public:
    Pchip() = default;
    Pchip(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n != y_.size() || n < 2) throw DomainError("pchip needs >= 2 matching nodes");
        if (!strictly_increasing(x_)) throw DomainError("pchip nodes are not strictly increasing");
        m_.assign(n, 0.0);
        std::vector<double> h(n - 1), delta(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            h[i] = x_[i + 1] - x_[i];
            delta[i] = (y_[i + 1] - y_[i]) / h[i];
        }
        if (n == 2) {
            m_[0] = m_[1] = delta[0];
            return;
        }
        for (std::size_t i = 1; i + 1 < n; ++i) {
            if (delta[i - 1] * delta[i] <= 0) {
                m_[i] = 0.0;
            } else {
                const double w1 = 2 * h[i] + h[i - 1], w2 = h[i] + 2 * h[i - 1];
                m_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        m_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
        m_[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    }

    double operator()(double x) const {
        const std::size_t i = locate(x_, x);
        const double h = x_[i + 1] - x_[i];
        const double t = (x - x_[i]) / h;
        const double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * m_[i] + (-2 * t3 + 3 * t2) * y_[i + 1] +
               (t3 - t2) * h * m_[i + 1];
    }

private:
    static double end_slope(double h0, double h1, double d0, double d1) {
        double m = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (m * d0 <= 0) m = 0.0;
        else if (d0 * d1 <= 0 && std::abs(m) > std::abs(3 * d0)) m = 3 * d0;
        return m;
    }

    std::vector<double> x_, y_, m_;
};

/** Cubic Hermite interpolant with three-point slopes; smooth tabulated data. */
class CubicTable {
public:
    CubicTable() = default;
    CubicTable(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n != y_.size() || n < 2) throw DomainError("table needs >= 2 matching nodes");
        if (!strictly_increasing(x_)) throw DomainError("table nodes are not strictly increasing");
        m_.assign(n, 0.0);
        if (n == 2) {
            m_[0] = m_[1] = (y_[1] - y_[0]) / (x_[1] - x_[0]);
            return;
        }
        for (std::size_t i = 1; i + 1 < n; ++i)
            m_[i] = central_derivative(x_[i - 1], x_[i], x_[i + 1], y_[i - 1], y_[i], y_[i + 1]);
        // one-sided second-order end slopes
        auto one_sided = [](double x0, double x1, double x2, double y0, double y1, double y2) {
            const double h1 = x1 - x0, h2 = x2 - x0;
            return (-(h1 + h2) / (h1 * h2)) * y0 + (h2 / (h1 * (h2 - h1))) * y1 - (h1 / (h2 * (h2 - h1))) * y2;
        };
        m_[0] = one_sided(x_[0], x_[1], x_[2], y_[0], y_[1], y_[2]);
        m_[n - 1] = one_sided(x_[n - 1], x_[n - 2], x_[n - 3], y_[n - 1], y_[n - 2], y_[n - 3]);
    }

    double lo() const { return x_.front(); }
    double hi() const { return x_.back(); }

    double operator()(double x) const {
        const std::size_t i = locate(x_, x);
        const double h = x_[i + 1] - x_[i];
        const double t = (x - x_[i]) / h;
        const double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * m_[i] + (-2 * t3 + 3 * t2) * y_[i + 1] +
               (t3 - t2) * h * m_[i + 1];
    }

private:
    std::vector<double> x_, y_, m_;
};

}  // namespace gtw::interp
