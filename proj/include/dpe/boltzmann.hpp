#pragma once

// Spatially homogeneous linear Boltzmann model on a velocity grid.
//
//   d/dt phi(t, v) = -Sigma(t, v) phi(t, v) + int b(t, v, v') phi(t, v') dmu(v')
//
// U_h is multiplication by exp(-int_s^t Sigma), B_h is the kernel quadrature
// (B phi)_i = sum_j w_j b(t, v_i, v_j) phi_j. Both coefficients are separable:
// Sigma = k(t) m(v) and b = k_b(t) K(v, v').

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "dpe/error.hpp"
#include "dpe/profiles.hpp"
#include "dpe/state_space.hpp"
#include "dpe/time_grid.hpp"

namespace dpe {

struct CollisionFrequency {
    TimeProfile time = TimeProfile::constant(1.0);
    SpaceProfile space = SpaceProfile::constant(1.0);
};

/// Spatial part of the kernel.
struct KernelShape {
    enum class Kind { constant, outgoing, product, gaussian, table, redistribute };
    Kind kind = Kind::constant;
    double c = 1.0;
    /// outgoing: m(v); product: m(v) n(v'); redistribute: p(v)
    SpaceProfile first = SpaceProfile::constant(1.0);
    SpaceProfile second = SpaceProfile::constant(1.0);
    /// gaussian width
    double width = 1.0;
    /// table, row-major d x d: entry (i, j) is b(v_i, v_j)
    std::vector<double> values;
    /// redistribute: fraction theta of the loss that is re-emitted
    double theta = 1.0;
};

struct CollisionKernel {
    /// Ignored by `redistribute`, which follows the collision frequency in time.
    TimeProfile time = TimeProfile::constant(1.0);
    KernelShape shape;
};

enum class SubcriticalMode { strict, lenient };

struct CollisionOptions {
    SubcriticalMode mode = SubcriticalMode::strict;
    /// Times at which subcriticality and conservativity are validated.
    std::vector<double> sample_times{0.0, 0.5, 1.0};
    /// Gauss-Legendre step for collision frequencies without antiderivative.
    double quad_step = 1.0 / 64.0;
    /// Largest excess sigma - Sigma that strict mode repairs by rescaling.
    double repair_limit = 1e-6;
};

class CollisionModel {
public:
    CollisionModel(GridPtr grid, CollisionFrequency sigma, CollisionKernel kernel, CollisionOptions opt = {})
        : grid_(std::move(grid)), sigma_(std::move(sigma)), kernel_(std::move(kernel)), opt_(std::move(opt)) {
        if (!grid_) throw StructuralError("collision model needs a grid");
        m_ = sigma_.space.on(*grid_);
        for (std::size_t i = 0; i < m_.size(); ++i)
            if (!(m_[i] >= 0.0) || !std::isfinite(m_[i]))
                throw ContractViolation("collision frequency is negative or not finite at node " + std::to_string(i));
        build_shape();
        validate();
    }

    const GridPtr& grid() const noexcept { return grid_; }
    const CollisionOptions& options() const noexcept { return opt_; }
    SubcriticalMode mode() const noexcept { return opt_.mode; }

    double sigma_big(double t, std::size_t i) const { return sigma_.time(t) * m_.at(i); }
    double loss_rate(double t, std::size_t i) const { return sigma_big(t, i); }

    /// Raw kernel b(t, v_i, v_j), before any strict-mode repair.
    double raw_kernel(double t, std::size_t i, std::size_t j) const {
        return kernel_time(t) * K_[i * dim() + j];
    }

    /// Kernel as used by B, including the strict-mode column rescaling.
    double kernel(double t, std::size_t i, std::size_t j) const { return raw_kernel(t, i, j) * column_scale(t, j); }

    /// sigma(t, v_j) = sum_i w_i b(t, v_i, v_j) of the raw kernel.
    double sigma_small(double t, std::size_t j) const { return kernel_time(t) * colsum_.at(j); }

    /// Largest sigma - Sigma over the validation samples (lenient mode keeps the model anyway).
    double max_excess() const noexcept { return max_excess_; }
    /// sigma = Sigma on every sample, relative 1e-12.
    bool conservative() const noexcept { return conservative_; }
    bool formally_conservative() const noexcept { return conservative_; }

    void apply_U(double t, double s, std::span<const double> in, std::span<double> out) const {
        if (t < s) throw PreconditionError("U(t, s) needs t >= s");
        const double integral = sigma_.time.integral(s, t, opt_.quad_step);
        if (!(integral >= 0.0) || sigma_.time(t) < 0.0 || sigma_.time(s) < 0.0)
            throw ContractViolation(describe("collision frequency became negative", t, s));
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * std::exp(-m_[i] * integral);
    }

    void apply_B(double t, std::span<const double> in, std::span<double> out) const {
        const std::size_t d = dim();
        const double kt = kernel_time(t);
        if (!std::isfinite(kt) || kt < 0.0) {
            std::ostringstream os;
            os << "kernel time factor is " << kt << " at t=" << t << " (i=0, j=0)";
            throw ContractViolation(os.str());
        }
        scratch_.resize(d);
        const auto w = grid_->weights();
        for (std::size_t j = 0; j < d; ++j) scratch_[j] = w[j] * column_scale(t, j) * in[j];
        for (std::size_t i = 0; i < d; ++i) {
            const double* row = K_.data() + i * d;
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) acc += row[j] * scratch_[j];
            out[i] = kt * acc;
        }
    }

    std::size_t dim() const noexcept { return grid_->size(); }

private:
    double kernel_time(double t) const {
        return kernel_.shape.kind == KernelShape::Kind::redistribute ? sigma_.time(t) : kernel_.time(t);
    }

    // Strict mode repairs quadrature-sized excess by min(1, Sigma / sigma).
    double column_scale(double t, std::size_t j) const {
        if (opt_.mode != SubcriticalMode::strict) return 1.0;
        const double sig = sigma_small(t, j);
        const double Sig = sigma_big(t, j);
        if (sig <= Sig) return 1.0;
        if (sig - Sig > opt_.repair_limit) {
            std::ostringstream os;
            os << "kernel is supercritical at t=" << t << ", v=" << grid_->node(j) << " (node " << j << "): sigma=" << sig
               << " > Sigma=" << Sig;
            throw ContractViolation(os.str());
        }
        return Sig / sig;
    }

    void build_shape() {
        const std::size_t d = dim();
        const auto& sh = kernel_.shape;
        const auto nodes = grid_->nodes();
        K_.assign(d * d, 0.0);
        switch (sh.kind) {
        case KernelShape::Kind::constant:
            std::fill(K_.begin(), K_.end(), sh.c);
            break;
        case KernelShape::Kind::outgoing: {
            const auto m = sh.first.on(*grid_);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) K_[i * d + j] = sh.c * m[i];
            break;
        }
        case KernelShape::Kind::product: {
            const auto m = sh.first.on(*grid_);
            const auto n = sh.second.on(*grid_);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) K_[i * d + j] = sh.c * m[i] * n[j];
            break;
        }
        case KernelShape::Kind::gaussian:
            if (!(sh.width > 0.0)) throw StructuralError("gaussian kernel needs a positive width");
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) {
                    const double z = (nodes[i] - nodes[j]) / sh.width;
                    K_[i * d + j] = sh.c * std::exp(-0.5 * z * z);
                }
            break;
        case KernelShape::Kind::table:
            if (sh.values.size() != d * d)
                throw StructuralError("kernel table has " + std::to_string(sh.values.size()) + " entries, expected " +
                                      std::to_string(d * d));
            K_ = sh.values;
            break;
        case KernelShape::Kind::redistribute: {
            // b(t, v, v') = theta Sigma(t, v') p(v) / int p, so sigma = theta Sigma.
            const auto p = sh.first.on(*grid_);
            double total = 0.0;
            for (std::size_t i = 0; i < d; ++i) total += grid_->weight(i) * p[i];
            if (!(total > 0.0)) throw StructuralError("redistribution profile has no mass");
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) K_[i * d + j] = sh.theta * m_[j] * p[i] / total;
            break;
        }
        }
        for (std::size_t x = 0; x < K_.size(); ++x)
            if (!(K_[x] >= 0.0) || !std::isfinite(K_[x]))
                throw ContractViolation("kernel is negative or not finite at (i=" + std::to_string(x / d) +
                                        ", j=" + std::to_string(x % d) + ")");
        colsum_.assign(d, 0.0);
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t i = 0; i < d; ++i) colsum_[j] += grid_->weight(i) * K_[i * d + j];
    }

    void validate() {
        conservative_ = true;
        max_excess_ = -std::numeric_limits<double>::infinity();
        for (double t : opt_.sample_times) {
            const double kt = kernel_time(t), st = sigma_.time(t);
            if (!(kt >= 0.0) || !(st >= 0.0))
                throw ContractViolation(describe("negative time factor in the collision model", t, t));
            for (std::size_t j = 0; j < dim(); ++j) {
                const double sig = sigma_small(t, j), Sig = sigma_big(t, j);
                max_excess_ = std::max(max_excess_, sig - Sig);
                if (std::abs(sig - Sig) > 1e-12 * std::max(1.0, Sig)) conservative_ = false;
                if (opt_.mode == SubcriticalMode::strict && sig - Sig > opt_.repair_limit) {
                    std::ostringstream os;
                    os << "kernel is supercritical at t=" << t << ", v=" << grid_->node(j) << " (node " << j
                       << "): sigma=" << sig << " exceeds Sigma=" << Sig << " by more than " << opt_.repair_limit;
                    throw ContractViolation(os.str());
                }
            }
        }
        if (opt_.sample_times.empty()) max_excess_ = 0.0;
    }

    static std::string describe(const std::string& what, double t, double s) {
        std::ostringstream os;
        os << what << " (t=" << t << ", s=" << s << ")";
        return os.str();
    }

    GridPtr grid_;
    CollisionFrequency sigma_;
    CollisionKernel kernel_;
    CollisionOptions opt_;
    std::vector<double> m_;
    std::vector<double> K_;
    std::vector<double> colsum_;
    double max_excess_ = 0.0;
    bool conservative_ = false;
    mutable std::vector<double> scratch_;
};

/// Sample times for validation: the lattice nodes and the cell midpoints.
inline std::vector<double> validation_times(const TimeGrid& tg) {
    std::vector<double> out;
    for (std::size_t j = 0; j <= tg.steps(); ++j) {
        out.push_back(tg.node(j));
        if (j < tg.steps()) out.push_back(tg.midpoint(j));
    }
    return out;
}

struct SmoothingIdentity {
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
};

/// lhs = int_s^t |B U(tau, s) phi| dtau (trapezoid), rhs = |phi| - |U(t, s) phi|.
/// lhs <= rhs up to quadrature, with equality when sigma = Sigma.
inline SmoothingIdentity smoothing_mass_identity(const CollisionModel& model, const TimeGrid& tg, const StateVector& phi) {
    if (!phi.is_nonnegative()) throw PreconditionError("smoothing identity needs phi >= 0");
    const std::size_t M = tg.steps();
    const auto w = model.grid()->weights();
    std::vector<double> norms(M + 1);
    std::vector<double> u(phi.size()), bu(phi.size());
    for (std::size_t j = 0; j <= M; ++j) {
        model.apply_U(tg.node(j), tg.start(), phi.coeffs(), u);
        model.apply_B(tg.node(j), u, bu);
        norms[j] = l1_norm(std::span<const double>(bu), w);
    }
    model.apply_U(tg.end(), tg.start(), phi.coeffs(), u);
    SmoothingIdentity out;
    out.lhs = tg.degenerate() ? 0.0 : trapezoid(norms, tg.step());
    out.rhs = l1_norm(phi) - l1_norm(std::span<const double>(u), w);
    out.residual = out.lhs - out.rhs;
    return out;
}

} // namespace dpe
