#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dpe/fragmentation.hpp"
#include "dpe/honesty.hpp"
#include "support/models.hpp"
#include "support/mol.hpp"

using namespace dpe;

namespace {

FragmentationOptions lenient() {
    FragmentationOptions o;
    o.mode = KernelMode::lenient;
    return o;
}

StateVector decaying(const GridPtr& g) {
    StateVector u(g);
    for (std::size_t i = 0; i < g->size(); ++i) u[i] = std::exp(-2.0 * g->node(i));
    u *= 1.0 / l1_norm(u);
    return u;
}

} // namespace

TEST(KernelMassCheck, BinaryUniformWithinGridBound) {
    const auto model = refmodel::fragmentation_64();
    const auto& g = *model.grid();
    for (std::size_t j = 0; j < g.size(); ++j)
        EXPECT_LE(model.kernel_mass_check(0.0, j), 2.0 * model.dx() / g.node(j)) << "node " << j;
    // refinement shrinks the residual at a fixed y
    const FragmentationModel fine(Grid::uniform_mass(1.0 / 256.0, 1.0, 255), FragmentationRate::linear(1.0),
                                  DaughterKernel::binary_uniform());
    EXPECT_LT(fine.kernel_mass_check(0.0, 254), model.kernel_mass_check(0.0, 63));
}

TEST(KernelMassCheck, PowerLawAndViolatingKernel) {
    auto g = Grid::uniform_mass(1.0 / 64.0, 1.0, 64);
    const FragmentationModel pl(g, FragmentationRate::constant(1.0), DaughterKernel::powerlaw(1.0));
    EXPECT_LT(pl.kernel_mass_check(0.0, 63), 0.05);

    const auto half = DaughterKernel::custom([](double, double, double y) { return 1.0 / y; });
    EXPECT_THROW(FragmentationModel(g, FragmentationRate::constant(1.0), half), ContractViolation);
    const FragmentationModel kept(g, FragmentationRate::constant(1.0), half, lenient());
    EXPECT_NEAR(kept.kernel_mass_check(0.0, 63), 0.5, 0.02);
}

TEST(KernelMassCheck, StrictModeRenormalizesColumns) {
    const auto model = refmodel::fragmentation_64();
    const auto& g = *model.grid();
    for (std::size_t j = 1; j < g.size(); ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < j; ++i) acc += model.dx() * g.node(i) * model.daughter(0.0, i, j);
        EXPECT_NEAR(acc, g.node(j), 1e-14);
    }
}

TEST(FragmentationU, ClosedFormFactors) {
    auto g = Grid::uniform_mass(0.1, 1.0, 9);
    StateVector u(g, std::vector<double>(9, 1.0));
    const FragmentationModel none(g, FragmentationRate::constant(0.0), DaughterKernel::binary_uniform());
    EXPECT_EQ(apply_U(none, 2.0, 0.0, u).values(), u.values());

    const FragmentationModel lin(g, FragmentationRate::linear(1.0), DaughterKernel::binary_uniform());
    const auto v = apply_U(lin, 1.5, 0.5, u);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(v[i], std::exp(-g->node(i)));

    const FragmentationModel tx(g, FragmentationRate::product_t(TimeProfile::affine(0.0, 1.0), 1.0, 1.0),
                                DaughterKernel::binary_uniform());
    const auto w = apply_U(tx, 1.0, 0.0, u);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(w[i], std::exp(-g->node(i) / 2.0), 1e-15);
}

TEST(FragmentationB, HandExampleOnFiveNodes) {
    auto g = Grid::uniform_mass(0.1, 1.1, 5); // nodes 0.2, 0.4, ..., 1.0, dx = 0.2
    const FragmentationModel model(g, FragmentationRate::constant(1.0), DaughterKernel::binary_uniform(), lenient());
    StateVector u(g);
    u[3] = 2.0; // parent at y0 = 0.8
    const auto out = apply_B(model, 0.0, u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(out[i], 2.0 * 2.0 * 0.2 / 0.8);
    EXPECT_EQ(out[3], 0.0);
    EXPECT_EQ(out[4], 0.0);

    StateVector bottom(g);
    bottom[0] = 5.0;
    EXPECT_EQ(l1_norm(apply_B(model, 0.0, bottom)), 0.0);
}

TEST(FragmentationB, UpperTriangularAndMassBalance) {
    const auto model = refmodel::fragmentation_64();
    const auto g = model.grid();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U01(0.0, 1.0);
    StateVector u(g), v(g);
    for (std::size_t i = 0; i < g->size(); ++i) u[i] = v[i] = U01(rng);
    const std::size_t k = 20;
    for (std::size_t i = 0; i <= k; ++i) v[i] += 3.0; // perturb entries at or below node k
    const auto bu = apply_B(model, 0.3, u), bv = apply_B(model, 0.3, v);
    for (std::size_t i = k; i < g->size(); ++i) EXPECT_EQ(bu[i], bv[i]);

    // exactly normalized kernel: mass(Bu) = sum_{j >= 1} w_j a_j u_j
    double lost = 0.0;
    for (std::size_t j = 1; j < g->size(); ++j) lost += g->weight(j) * model.rate(0.3, j) * u[j];
    EXPECT_NEAR(mass(bu), lost, 1e-13 * lost);
}

TEST(VnIdentity, ZeroRateAndSecondOrder) {
    auto g = Grid::uniform_mass(1.0 / 32.0, 1.0, 31);
    const FragmentationModel none(g, FragmentationRate::constant(0.0), DaughterKernel::binary_uniform());
    const auto u = decaying(g);
    const auto t0 = iterate_right(none, TimeGrid(0.0, 1.0, 0.1), u, 3);
    for (std::size_t n = 0; n <= 3; ++n) EXPECT_EQ(vn_identity_residual(none, t0, n), 0.0);

    const FragmentationModel lin(g, FragmentationRate::product_t(TimeProfile::affine(1.0, 1.0), 1.0, 1.0),
                                 DaughterKernel::binary_uniform());
    for (std::size_t n : {0u, 3u}) {
        std::vector<double> r;
        for (double dt : {0.02, 0.01}) r.push_back(vn_identity_residual(lin, iterate_right(lin, TimeGrid(0.0, 1.0, dt), u, 6), n));
        EXPECT_LT(r[0], 1e-3);
        EXPECT_NEAR(r[1] / r[0], 0.25, 0.1) << "n=" << n;
    }
}

TEST(FragmentationEngine, MatchesMethodOfLinesReference) {
    const auto model = refmodel::fragmentation_64();
    const auto u = decaying(model.grid());
    const double dt = 1.0 / 64.0;
    const auto table = iterate_right(model, TimeGrid(0.0, 1.0, dt), u, 40);
    const auto sum = series_sum(table);
    ASSERT_TRUE(sum.converged);
    const auto ref = mol::rk4(model, u, 0.0, 1.0, 512);
    EXPECT_LE(l1_norm(sum.value - ref) / l1_norm(ref), 1e-3);
}

TEST(FragmentationEngine, LeakageEqualsLedgerResidual) {
    const auto model = refmodel::fragmentation_64();
    const auto u = decaying(model.grid());
    const double dt = 1.0 / 128.0;
    const auto table = iterate_right(model, TimeGrid(0.0, 1.0, dt), u, 30);
    const auto rows = mass_ledger(table);
    for (std::size_t n : {0u, 5u, 30u}) {
        const double flux = leakage_flux_estimate(model, table, n);
        EXPECT_GE(rows[n].residual, -10 * dt * dt);
        EXPECT_NEAR(rows[n].residual, flux, 10 * dt * dt) << "n=" << n;
    }
    EXPECT_GT(rows.back().residual, 0.0);
    const auto series = honesty_verdict(table);
    EXPECT_EQ(series.verdict, Verdict::honest);
    for (std::size_t n = 0; n + 1 < series.values.size(); ++n)
        EXPECT_LE(series.values[n + 1], series.values[n] + 10 * dt * dt);
}

TEST(Shattering, BoundedRateIsHonestOnEveryGrid) {
    ShatteringSetup s;
    s.alpha = 0.0;
    s.levels = {3, 4, 5};
    const auto rep = shattering_experiment(s);
    ASSERT_EQ(rep.rows.size(), 3u);
    for (const auto& row : rep.rows) {
        EXPECT_EQ(row.verdict, Verdict::honest);
        EXPECT_GE(row.leakage, -10 * s.dt * s.dt);
    }
    EXPECT_DOUBLE_EQ(rep.rows[2].x_min, 1.0 / 32.0);
    EXPECT_EQ(rep.rows[2].nodes, 31u);
}

TEST(Shattering, SingularRateReportIsPopulated) {
    ShatteringSetup s;
    s.alpha = 1.0;
    s.levels = {3, 4, 5, 6};
    const auto rep = shattering_experiment(s);
    ASSERT_EQ(rep.rows.size(), 4u);
    EXPECT_FALSE(rep.defect_trend.empty());
    EXPECT_FALSE(rep.leakage_trend.empty());
    for (const auto& row : rep.rows) {
        EXPECT_TRUE(std::isfinite(row.final_defect));
        EXPECT_GE(row.mass_end, 0.0);
        EXPECT_LE(row.mass_end, 1.0 + 10 * s.dt * s.dt);
    }
    EXPECT_THROW(shattering_experiment(ShatteringSetup{.alpha = -1.0}), PreconditionError);
}

TEST(Trend, Classification) {
    EXPECT_EQ(trend_of({1, 2, 3}), "increasing");
    EXPECT_EQ(trend_of({3, 2, 1}), "decreasing");
    EXPECT_EQ(trend_of({1, 1}), "constant");
    EXPECT_EQ(trend_of({1, 3, 2}), "mixed");
}
