#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dpe/error.hpp"

namespace dpe {

enum class QuadratureRule { trapezoid, midpoint };

inline const char* to_string(QuadratureRule r) { return r == QuadratureRule::trapezoid ? "trapezoid" : "midpoint"; }

/// Uniform lattice tau_j = s + j * dt, j = 0..M, on [s, t_end].
///
/// t_end == s is accepted as the degenerate zero-length grid (M = 0).
class TimeGrid {
public:
    TimeGrid(double s, double t_end, double dt, QuadratureRule rule = QuadratureRule::trapezoid)
        : s_(s), t_end_(t_end), dt_(dt), rule_(rule) {
        if (!(s >= 0.0) || !std::isfinite(s)) throw PreconditionError("time grid start must satisfy s >= 0");
        if (!(dt > 0.0) || !std::isfinite(dt)) throw PreconditionError("time step must be positive");
        if (!(t_end >= s) || !std::isfinite(t_end)) throw PreconditionError("time grid needs t_end >= s");
        const double span = t_end - s;
        const double steps = span / dt;
        const double rounded = std::round(steps);
        // Rounding error in span/dt scales with the number of steps.
        const double tol = std::max(1e-12, 8.0 * std::numeric_limits<double>::epsilon() * rounded);
        if (std::abs(steps - rounded) > tol)
            throw PreconditionError("(t_end - s) / dt = " + std::to_string(steps) + " is not an integer");
        steps_ = static_cast<std::size_t>(rounded);
    }

    double start() const noexcept { return s_; }
    double end() const noexcept { return t_end_; }
    double step() const noexcept { return dt_; }
    QuadratureRule rule() const noexcept { return rule_; }
    /// Number of steps M; there are M + 1 nodes.
    std::size_t steps() const noexcept { return steps_; }
    bool degenerate() const noexcept { return steps_ == 0; }

    /// Node j; the last node is exactly t_end.
    double node(std::size_t j) const noexcept {
        return j == steps_ ? t_end_ : s_ + static_cast<double>(j) * dt_;
    }
    double midpoint(std::size_t j) const noexcept { return 0.5 * (node(j) + node(j + 1)); }

    /// Index of t on the lattice, or throws when t is not a node.
    std::size_t index_of(double t) const {
        const double x = (t - s_) / dt_;
        const double r = std::round(x);
        if (r < 0.0 || r > static_cast<double>(steps_) || std::abs(x - r) > 1e-9)
            throw PreconditionError("time " + std::to_string(t) + " is not a node of the time grid");
        return static_cast<std::size_t>(r);
    }

    /// Time grid on [s, t] with the same step and rule (t must be a node).
    TimeGrid prefix(std::size_t j) const { return TimeGrid(s_, node(j), dt_, rule_); }

private:
    double s_;
    double t_end_;
    double dt_;
    QuadratureRule rule_;
    std::size_t steps_ = 0;
};

/// Composite trapezoid weights on nodes 0..j of a uniform lattice.
inline double trapezoid_weight(std::size_t k, std::size_t j, double dt) noexcept {
    if (j == 0) return 0.0;
    return (k == 0 || k == j) ? 0.5 * dt : dt;
}

/// Trapezoid integral of nodal values f_0..f_j over [tau_0, tau_j].
inline double trapezoid(std::span<const double> f, double dt) {
    if (f.size() < 2) return 0.0;
    double sum = 0.5 * (f.front() + f.back());
    for (std::size_t k = 1; k + 1 < f.size(); ++k) sum += f[k];
    return sum * dt;
}

} // namespace dpe
