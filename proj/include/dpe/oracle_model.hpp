#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dpe/error.hpp"
#include "dpe/state_space.hpp"

namespace dpe {

/// U(t,s) = exp(-rate (t-s)) I and a constant nonnegative matrix B.
///
/// U and B commute, so the iterates are V_n(t,s) = exp(-rate(t-s)) (t-s)^n / n! B^n
/// and the whole family is exp((B - rate) (t-s)). Used as the closed-form
/// reference model throughout the test suites.
class ConstantMatrixModel {
public:
    /// `b` is row-major d x d with d = grid->size().
    ConstantMatrixModel(GridPtr grid, double rate, std::vector<double> b)
        : grid_(std::move(grid)), rate_(rate), b_(std::move(b)) {
        const auto d = grid_->size();
        if (b_.size() != d * d) throw StructuralError("perturbation matrix must be d x d");
        if (!(rate_ >= 0.0)) throw ContractViolation("decay rate must be nonnegative");
        for (double x : b_)
            if (!(x >= 0.0)) throw ContractViolation("perturbation matrix must be entrywise nonnegative");
        // Subcriticality: the weighted column sums of B may not exceed the decay rate.
        const auto w = grid_->weights();
        max_column_excess_ = -rate_;
        for (std::size_t j = 0; j < d; ++j) {
            double col = 0.0;
            for (std::size_t i = 0; i < d; ++i) col += w[i] * b_[i * d + j];
            col /= w[j];
            max_column_excess_ = std::max(max_column_excess_, col - rate_);
            min_column_gap_ = std::min(min_column_gap_, rate_ - col);
        }
        if (max_column_excess_ > 1e-12)
            throw ContractViolation("perturbation matrix is supercritical (gain exceeds decay rate by " +
                                    std::to_string(max_column_excess_) + ")");
    }

    /// Weights (1,1), rate 1, B = coordinate swap.
    static ConstantMatrixModel two_state_swap() {
        return ConstantMatrixModel(Grid::abstract({1.0, 1.0}), 1.0, {0.0, 1.0, 1.0, 0.0});
    }

    /// Same U, B == 0.
    static ConstantMatrixModel two_state_unperturbed() {
        return ConstantMatrixModel(Grid::abstract({1.0, 1.0}), 1.0, {0.0, 0.0, 0.0, 0.0});
    }

    const GridPtr& grid() const noexcept { return grid_; }
    double rate() const noexcept { return rate_; }
    std::span<const double> matrix() const noexcept { return b_; }

    /// Equality in the dissipativity bound (gain == loss column by column).
    bool formally_conservative(double tol = 1e-12) const {
        return std::abs(max_column_excess_) <= tol && std::abs(min_column_gap_) <= tol;
    }

    void apply_U(double t, double s, std::span<const double> in, std::span<double> out) const {
        const double f = std::exp(-rate_ * (t - s));
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = f * in[i];
    }

    void apply_B(double, std::span<const double> in, std::span<double> out) const {
        const auto d = grid_->size();
        for (std::size_t i = 0; i < d; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) acc += b_[i * d + j] * in[j];
            out[i] = acc;
        }
    }

    double loss_rate(double, std::size_t) const noexcept { return rate_; }

private:
    GridPtr grid_;
    double rate_;
    std::vector<double> b_;
    double max_column_excess_ = 0.0;
    double min_column_gap_ = 1e300;
};

} // namespace dpe
