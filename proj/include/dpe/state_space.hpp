#pragma once

// Discretized L^1 state spaces.
//
// A Grid carries quadrature nodes and strictly positive weights; a StateVector
// holds one coefficient per node. The norm is sum_i w_i |c_i|, the mass
// functional is sum_i w_i c_i, and the two coincide on the positive cone.
// Every u splits exactly as u_plus - u_minus with
// |u_plus| + |u_minus| = |u|, so the non-flatness constant of the cone is 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpe/error.hpp"
#include "dpe/io.hpp"

namespace dpe {

enum class GridKind { velocity, mass, abstract };

inline const char* to_string(GridKind k) {
    switch (k) {
    case GridKind::velocity: return "velocity";
    case GridKind::mass: return "mass";
    case GridKind::abstract: return "abstract";
    }
    return "?";
}

class Grid;
using GridPtr = std::shared_ptr<const Grid>;

class Grid {
public:
    /// `spacing` is the uniform cell width when the grid came from a uniform
    /// constructor (0 otherwise). `lower`/`upper` bound the represented domain.
    Grid(std::vector<double> nodes, std::vector<double> weights, GridKind kind, double spacing = 0.0,
         double lower = 0.0, double upper = 0.0)
        : nodes_(std::move(nodes)), weights_(std::move(weights)), kind_(kind), spacing_(spacing),
          lower_(lower), upper_(upper) {
        if (nodes_.empty()) throw StructuralError("grid must have at least one node");
        if (nodes_.size() != weights_.size())
            throw StructuralError("grid has " + std::to_string(nodes_.size()) + " nodes but " +
                                  std::to_string(weights_.size()) + " weights");
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i]))
                throw StructuralError("grid weight " + std::to_string(i) + " is not strictly positive");
            if (!std::isfinite(nodes_[i])) throw StructuralError("grid node " + std::to_string(i) + " is not finite");
        }
        if (kind_ != GridKind::abstract) {
            for (std::size_t i = 1; i < nodes_.size(); ++i)
                if (!(nodes_[i] > nodes_[i - 1]))
                    throw StructuralError("grid nodes must be strictly increasing (node " + std::to_string(i) + ")");
        }
        if (kind_ == GridKind::mass && !(nodes_.front() > 0.0))
            throw StructuralError("mass grid nodes must be positive");
        if (lower_ == 0.0 && upper_ == 0.0) {
            lower_ = nodes_.front();
            upper_ = nodes_.back();
        }
    }

    /// Midpoint grid on [a, b] with weights equal to the cell width.
    static GridPtr uniform_velocity(double a, double b, std::size_t n) {
        check_interval(a, b, n);
        const double h = (b - a) / static_cast<double>(n);
        std::vector<double> x(n), w(n, h);
        for (std::size_t i = 0; i < n; ++i) x[i] = a + (static_cast<double>(i) + 0.5) * h;
        return std::make_shared<const Grid>(std::move(x), std::move(w), GridKind::velocity, h, a, b);
    }

    /// Midpoint grid on [a, b] (a >= 0) with weights x_i * dx, i.e. the measure x dx.
    static GridPtr uniform_mass(double a, double b, std::size_t n) {
        check_interval(a, b, n);
        if (a < 0.0) throw StructuralError("mass grid must live on [a, b] with a >= 0");
        const double h = (b - a) / static_cast<double>(n);
        std::vector<double> x(n), w(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = a + (static_cast<double>(i) + 0.5) * h;
            w[i] = x[i] * h;
        }
        return std::make_shared<const Grid>(std::move(x), std::move(w), GridKind::mass, h, a, b);
    }

    /// Atomic measure with the given weights; nodes are 0, 1, 2, ...
    static GridPtr abstract(std::vector<double> weights) {
        std::vector<double> x(weights.size());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
        return std::make_shared<const Grid>(std::move(x), std::move(weights), GridKind::abstract);
    }

    std::size_t size() const noexcept { return nodes_.size(); }
    std::span<const double> nodes() const noexcept { return nodes_; }
    std::span<const double> weights() const noexcept { return weights_; }
    double node(std::size_t i) const { return nodes_.at(i); }
    double weight(std::size_t i) const { return weights_.at(i); }
    GridKind kind() const noexcept { return kind_; }
    double spacing() const noexcept { return spacing_; }
    double lower() const noexcept { return lower_; }
    double upper() const noexcept { return upper_; }

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.kind_ == b.kind_ && a.nodes_ == b.nodes_ && a.weights_ == b.weights_;
    }

private:
    static void check_interval(double a, double b, std::size_t n) {
        if (n == 0) throw StructuralError("grid needs n >= 1");
        if (!(b > a)) throw StructuralError("grid interval must satisfy a < b");
    }

    std::vector<double> nodes_;
    std::vector<double> weights_;
    GridKind kind_;
    double spacing_;
    double lower_;
    double upper_;
};

enum class Summation { plain, compensated };

namespace detail {
// Ascending index order; Neumaier compensation on request.
template <class F>
double accumulate(std::size_t n, F&& term, Summation mode) {
    double sum = 0.0;
    if (mode == Summation::plain) {
        for (std::size_t i = 0; i < n; ++i) sum += term(i);
        return sum;
    }
    double comp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = term(i);
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }
    return sum + comp;
}
} // namespace detail

/// Weighted l1 norm on raw coefficients.
inline double l1_norm(std::span<const double> coeffs, std::span<const double> weights,
                      Summation mode = Summation::plain) {
    if (coeffs.size() != weights.size())
        throw StructuralError("coefficient/weight length mismatch (" + std::to_string(coeffs.size()) + " vs " +
                              std::to_string(weights.size()) + ")");
    return detail::accumulate(coeffs.size(), [&](std::size_t i) { return weights[i] * std::abs(coeffs[i]); }, mode);
}

inline double mass(std::span<const double> coeffs, std::span<const double> weights,
                   Summation mode = Summation::plain) {
    if (coeffs.size() != weights.size()) throw StructuralError("coefficient/weight length mismatch");
    return detail::accumulate(coeffs.size(), [&](std::size_t i) { return weights[i] * coeffs[i]; }, mode);
}

/// Coefficients on a shared, immutable grid.
class StateVector {
public:
    explicit StateVector(GridPtr grid) : grid_(std::move(grid)) {
        if (!grid_) throw StructuralError("state vector needs a grid");
        coeffs_.assign(grid_->size(), 0.0);
    }

    StateVector(GridPtr grid, std::vector<double> coeffs) : grid_(std::move(grid)), coeffs_(std::move(coeffs)) {
        if (!grid_) throw StructuralError("state vector needs a grid");
        if (coeffs_.size() != grid_->size())
            throw StructuralError("state vector has " + std::to_string(coeffs_.size()) + " coefficients on a grid of " +
                                  std::to_string(grid_->size()) + " nodes");
    }

    const GridPtr& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return coeffs_.size(); }
    std::span<const double> coeffs() const noexcept { return coeffs_; }
    std::span<double> coeffs() noexcept { return coeffs_; }
    const std::vector<double>& values() const noexcept { return coeffs_; }
    double operator[](std::size_t i) const { return coeffs_[i]; }
    double& operator[](std::size_t i) { return coeffs_[i]; }

    /// All coefficients >= -tol.
    bool is_nonnegative(double tol = 0.0) const {
        return std::all_of(coeffs_.begin(), coeffs_.end(), [tol](double c) { return c >= -tol; });
    }

    StateVector& operator+=(const StateVector& o) {
        check_same_grid(o);
        for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
        return *this;
    }
    StateVector& operator-=(const StateVector& o) {
        check_same_grid(o);
        for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
        return *this;
    }
    StateVector& operator*=(double a) {
        for (auto& c : coeffs_) c *= a;
        return *this;
    }
    /// this += a * x
    StateVector& axpy(double a, const StateVector& x) {
        check_same_grid(x);
        for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += a * x.coeffs_[i];
        return *this;
    }

    friend StateVector operator+(StateVector a, const StateVector& b) { return a += b; }
    friend StateVector operator-(StateVector a, const StateVector& b) { return a -= b; }
    friend StateVector operator*(double s, StateVector a) { return a *= s; }

    bool same_grid(const StateVector& o) const { return grid_ == o.grid_ || *grid_ == *o.grid_; }

private:
    void check_same_grid(const StateVector& o) const {
        if (!same_grid(o)) throw StructuralError("state vectors live on different grids");
    }

    GridPtr grid_;
    std::vector<double> coeffs_;
};

inline double l1_norm(const StateVector& u, Summation mode = Summation::plain) {
    return l1_norm(u.coeffs(), u.grid()->weights(), mode);
}

/// The mass functional: sum_i w_i c_i. Equals l1_norm(u) for u >= 0.
inline double mass(const StateVector& u, Summation mode = Summation::plain) {
    return mass(u.coeffs(), u.grid()->weights(), mode);
}

struct ConeSplit {
    StateVector plus;
    StateVector minus;
};

/// u = plus - minus with both parts nonnegative; each coefficient goes to exactly one side.
inline ConeSplit decompose(const StateVector& u) {
    ConeSplit out{StateVector(u.grid()), StateVector(u.grid())};
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i] >= 0.0)
            out.plus[i] = u[i];
        else
            out.minus[i] = -u[i];
    }
    return out;
}

inline void write_grid_csv(std::ostream& os, const Grid& g) {
    io::CsvWriter w(os);
    w.header({"node", "weight"});
    for (std::size_t i = 0; i < g.size(); ++i) w.row(g.node(i), g.weight(i));
}

/// Reads a "node,weight" CSV (header row mandatory).
inline GridPtr read_grid_csv(std::istream& is, GridKind kind) {
    std::string line;
    if (!std::getline(is, line) || io::trim(line) != "node,weight")
        throw StructuralError("grid CSV must start with the header 'node,weight'");
    std::vector<double> x, w;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (io::trim(line).empty()) continue;
        const auto f = io::split(line);
        if (f.size() != 2) throw StructuralError("grid CSV line " + std::to_string(lineno) + " needs 2 fields");
        x.push_back(io::parse_double(f[0], "node"));
        w.push_back(io::parse_double(f[1], "weight"));
    }
    return std::make_shared<const Grid>(std::move(x), std::move(w), kind);
}

} // namespace dpe
