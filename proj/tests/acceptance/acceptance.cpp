// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
// Usage: acceptance <configs-dir>
// The configs directory is used by the determinism criterion, which runs every
// shipped configuration twice and compares the produced files byte for byte.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "dpe/boltzmann.hpp"
#include "dpe/dyson_phillips.hpp"
#include "dpe/fragmentation.hpp"
#include "dpe/honesty.hpp"
#include "dpe/lifted.hpp"
#include "dpe/oracle_model.hpp"
#include "dpe/runner/runner.hpp"
#include "support/models.hpp"
#include "support/mol.hpp"
#include "support/oracles.hpp"

using namespace dpe;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [violated]");
    }
};

// Halving ratios that start at rounding level carry no information; both
// values below the floor count as converged.
bool improves(double coarse, double fine, double factor, double floor = 1e-12) {
    if (coarse <= floor && fine <= floor) return true;
    return fine * factor <= coarse;
}

StateVector oracle_u0(const ConstantMatrixModel& m) { return StateVector(m.grid(), {1.0, 0.0}); }

StateVector decaying(const GridPtr& g) {
    StateVector u(g);
    for (std::size_t i = 0; i < g->size(); ++i) u[i] = std::exp(-2.0 * g->node(i));
    u *= 1.0 / l1_norm(u);
    return u;
}

CollisionModel symmetric_gaussian() {
    auto g = Grid::uniform_velocity(-1.0, 1.0, 8);
    KernelShape shape;
    shape.kind = KernelShape::Kind::gaussian;
    shape.width = 0.7;
    shape.c = 0.5;
    return CollisionModel(g, {TimeProfile::constant(1.0), SpaceProfile::constant(1.0)},
                          {TimeProfile::constant(1.0), shape});
}

// ---------------------------------------------------------------------------

Outcome criterion_1() {
    Outcome o;
    const auto t0 = Clock::now();
    const auto model = ConstantMatrixModel::two_state_swap();
    const auto table = iterate_right(model, TimeGrid(0.0, 1.0, 1e-3), oracle_u0(model), 20);
    const auto sum = series_sum(table);
    const double secs = seconds_since(t0);
    const auto ref = oracle::family(1.0);
    const StateVector exact(model.grid(), {ref[0], ref[1]});
    const double rel = l1_norm(sum.value - exact) / l1_norm(exact);
    o.require(rel <= 1e-6, "relative error " + fmt(rel) + " <= 1e-6");
    o.require(secs < 1.0, "runtime " + fmt(secs) + " s < 1 s");
    return o;
}

Outcome criterion_2() {
    Outcome o;
    const auto model = ConstantMatrixModel::two_state_swap();
    const auto table = iterate_right(model, TimeGrid(0.0, 1.0, 1e-3), oracle_u0(model), 20);
    const double e0 = std::abs(defect(table, 0) - (1.0 - std::exp(-1.0)));
    const double e1 = std::abs(defect(table, 1) - (1.0 - 2.0 * std::exp(-1.0)));
    o.require(e0 <= 1e-6, "|D0 - (1 - 1/e)| = " + fmt(e0));
    o.require(e1 <= 1e-6, "|D1 - (1 - 2/e)| = " + fmt(e1));
    return o;
}

double worst_ledger(const DysonPhillipsTable& t) {
    double w = 0.0;
    for (const auto& r : mass_ledger(t)) w = std::max(w, std::abs(r.residual));
    return w / l1_norm(t.u0());
}

Outcome criterion_3() {
    Outcome o;
    const TimeGrid tg(0.0, 1.0, 1e-3);
    const auto oracle_model = ConstantMatrixModel::two_state_swap();
    const double lo = worst_ledger(iterate_right(oracle_model, tg, oracle_u0(oracle_model), 20));
    o.require(lo <= 1e-6, "oracle ledger " + fmt(lo));
    const auto boltz = refmodel::boltzmann_8(1.0);
    o.require(boltz.conservative(), std::string("8-node model conservative=") + (boltz.conservative() ? "yes" : "no"));
    const double lb = worst_ledger(iterate_right(boltz, tg, refmodel::smooth_datum(boltz.grid()), 20));
    o.require(lb <= 1e-6, "8-node collision ledger " + fmt(lb));
    return o;
}

template <class M>
void monotone_and_honest(Outcome& o, const std::string& name, const M& model, const StateVector& u, double dt,
                         bool bounded) {
    const auto table = iterate_right(model, TimeGrid(0.0, 1.0, dt), u, 20);
    const auto series = honesty_verdict(table);
    double worst = -1.0;
    for (std::size_t n = 0; n + 1 < series.values.size(); ++n)
        worst = std::max(worst, series.values[n + 1] - series.values[n]);
    o.require(worst <= 10.0 * dt * dt, name + " max increase " + fmt(worst));
    if (bounded) {
        const double d20 = series.values[20] / l1_norm(u);
        o.require(series.verdict == Verdict::honest && d20 < 1e-8,
                  name + " " + to_string(series.verdict) + " D20/|u|=" + fmt(d20));
    }
}

Outcome criterion_4() {
    Outcome o;
    const auto oracle_model = ConstantMatrixModel::two_state_swap();
    monotone_and_honest(o, "oracle", oracle_model, oracle_u0(oracle_model), 1e-3, true);
    const auto b1 = refmodel::boltzmann_8(1.0), b05 = refmodel::boltzmann_8(0.5);
    monotone_and_honest(o, "collision(theta=1)", b1, refmodel::smooth_datum(b1.grid()), 1e-2, true);
    monotone_and_honest(o, "collision(theta=0.5)", b05, refmodel::smooth_datum(b05.grid()), 1e-2, true);
    const auto gauss = symmetric_gaussian();
    monotone_and_honest(o, "gaussian kernel", gauss, refmodel::smooth_datum(gauss.grid()), 1e-2, true);
    const auto frag = refmodel::fragmentation_64();
    monotone_and_honest(o, "fragmentation", frag, decaying(frag.grid()), 1.0 / 64.0, true);
    // Singular rate: monotonicity only, no honesty claim.
    const FragmentationModel shat(Grid::uniform_mass(1.0 / 32.0, 1.0, 31), FragmentationRate::power(1.0, -1.0),
                                  DaughterKernel::binary_uniform());
    monotone_and_honest(o, "singular fragmentation", shat, decaying(shat.grid()), 1.0 / 64.0, false);
    return o;
}

template <class M>
void left_right(Outcome& o, const std::string& name, const M& model, const StateVector& u) {
    const double coarse = table_discrepancy(iterate_right(model, TimeGrid(0.0, 1.0, 1.0 / 32), u, 20),
                                            iterate_left(model, TimeGrid(0.0, 1.0, 1.0 / 32), u, 20));
    const double fine = table_discrepancy(iterate_right(model, TimeGrid(0.0, 1.0, 1.0 / 64), u, 20),
                                          iterate_left(model, TimeGrid(0.0, 1.0, 1.0 / 64), u, 20));
    o.require(coarse <= 1e-4, name + " M=32 gap " + fmt(coarse));
    o.require(improves(coarse, fine, 3.0), name + " M=64 gap " + fmt(fine) + " (ratio " +
                                               fmt(coarse > 0 ? coarse / fine : 0.0) + ")");
}

Outcome criterion_5() {
    Outcome o;
    const auto oracle_model = ConstantMatrixModel::two_state_swap();
    left_right(o, "oracle", oracle_model, oracle_u0(oracle_model));
    const auto b = refmodel::boltzmann_8(0.5);
    left_right(o, "collision Sigma=1+t", b, refmodel::smooth_datum(b.grid()));
    return o;
}

Outcome criterion_6() {
    Outcome o;
    const auto model = refmodel::boltzmann_8(0.5);
    const auto u = refmodel::smooth_datum(model.grid());
    double duh[2], coc[2];
    for (int k = 0; k < 2; ++k) {
        const double dt = k == 0 ? 1e-2 : 5e-3;
        const TimeGrid tg(0.0, 1.0, dt);
        duh[k] = duhamel_residual(model, tg, u, iterate_right(model, tg, u, 40));
        const PerturbedFamily fam(model, dt, 40, 1e-14);
        coc[k] = cocycle_residual(fam, 1.0, 0.5, 0.0, u);
    }
    const double rd = duh[1] / duh[0];
    o.require(duh[0] <= 1e-3, "duhamel " + fmt(duh[0]));
    o.require(std::abs(rd - 0.25) <= 0.1, "duhamel ratio " + fmt(rd));
    o.require(coc[0] <= 1e-3, "cocycle " + fmt(coc[0]));
    // The lattice recursion is a one-step scheme, so the cocycle holds to
    // rounding and the ratio has no content once both sit at that level.
    const bool ratio_ok = (coc[0] <= 1e-12 && coc[1] <= 1e-12) || std::abs(coc[1] / coc[0] - 0.25) <= 0.1;
    o.require(ratio_ok, "cocycle at dt/2 " + fmt(coc[1]) + (coc[0] <= 1e-12 ? " (rounding level)" : ""));
    return o;
}

Outcome criterion_7() {
    Outcome o;
    const auto model = symmetric_gaussian();
    const StateVector M0(model.grid(), std::vector<double>(8, 1.0));
    const auto cert = detailed_balance_certificate(model, M0, 1.0, {0.0, 0.25, 0.5, 0.75, 1.0}, 1e-3);
    o.require(cert.accepted(), "symmetric kernel symmetry residual " + fmt(cert.symmetry_residual));
    const auto sweep = honesty_sweep(model, TimeGrid(0.0, 1.0, 0.01), 40);
    o.require(sweep.verdict == Verdict::honest, "sweep verdict " + to_string(sweep.verdict));

    auto g = Grid::uniform_velocity(0.0, 3.0, 3);
    KernelShape shape;
    shape.kind = KernelShape::Kind::outgoing;
    shape.first = SpaceProfile::linear(1.0, 1.0);
    const CollisionModel skew(g, {TimeProfile::constant(1.0), SpaceProfile::constant(20.0)},
                              {TimeProfile::constant(1.0), shape});
    const auto bad = detailed_balance_certificate(skew, StateVector(g, {1.0, 1.0, 1.0}), 1.0, {0.0, 1.0}, 1e-3);
    o.require(bad.symmetry_residual > 1e-3 && !bad.accepted(),
              "asymmetric kernel residual " + fmt(bad.symmetry_residual) + " rejected");
    return o;
}

Outcome criterion_8() {
    Outcome o;
    const auto model = refmodel::fragmentation_64();
    const auto u = decaying(model.grid());
    const double dt = 1.0 / 64.0;
    const auto sum = series_sum(iterate_right(model, TimeGrid(0.0, 1.0, dt), u, 40));
    const auto ref = mol::rk4(model, u, 0.0, 1.0, 512);
    const double rel = l1_norm(sum.value - ref) / l1_norm(ref);
    o.require(sum.converged && rel <= 1e-3, "series vs RK4 (dt/8) relative L1 " + fmt(rel));
    double worst = 0.0;
    const auto& g = *model.grid();
    for (std::size_t j = 0; j < g.size(); ++j)
        worst = std::max(worst, model.kernel_mass_check(0.0, j) / (2.0 * model.dx() / g.node(j)));
    o.require(worst <= 1.0, "max kernel residual / (2 dx / y) = " + fmt(worst));

    // Spatial reference on 512 cells, restricted to the 64-cell grid by mass.
    const FragmentationModel fine(Grid::uniform_mass(1.0 / 64.0, 1.0, 512), FragmentationRate::linear(1.0),
                                  DaughterKernel::binary_uniform());
    StateVector uf(fine.grid());
    for (std::size_t i = 0; i < uf.size(); ++i) uf[i] = std::exp(-2.0 * fine.grid()->node(i));
    uf *= 1.0 / l1_norm(uf);
    const auto rf = mol::rk4(fine, uf, 0.0, 1.0, 512);
    StateVector restricted(model.grid());
    for (std::size_t i = 0; i < restricted.size(); ++i) {
        double m = 0.0;
        for (std::size_t k = 8 * i; k < 8 * i + 8; ++k) m += fine.grid()->weight(k) * rf[k];
        restricted[i] = m / g.weight(i);
    }
    const double spatial = l1_norm(sum.value - restricted) / l1_norm(restricted);
    o.detail += "; info: 512-cell reference differs by " + fmt(spatial) + " (spatial discretization, not assessed)";
    return o;
}

LiftedVector bump(const LiftedAxis& ax, const GridPtr& g) {
    return make_lifted(ax, g, [&](double t) {
        StateVector v(g, {1.0, 0.5});
        v *= t <= 1.0 ? std::pow(std::sin(std::numbers::pi * t), 2) : 0.0;
        return v;
    });
}

Outcome criterion_9() {
    Outcome o;
    const auto t0 = Clock::now();
    const auto model = ConstantMatrixModel::two_state_swap();
    const double lambda = 4.0 * perturbation_norm(model, std::vector<double>{0.0, 1.0});
    std::vector<std::vector<LiftedCheck>> runs;
    std::vector<double> fnorm;
    for (double h : {1.0 / 64.0, 1.0 / 128.0}) {
        const LiftedAxis ax(h, 6.0);
        const auto f = bump(ax, model.grid());
        fnorm.push_back(f.norm());
        std::vector<LiftedCheck> cs{identity_lgBl_check(model, lambda, f), resolvent_series_check(model, lambda, f, 12)};
        for (std::size_t n = 0; n <= 3; ++n) cs.push_back(laplace_Tn_check(model, lambda, n, f));
        runs.push_back(std::move(cs));
    }
    const double secs = seconds_since(t0);
    double worst_rel = 0.0, worst_halving = 0.0;
    for (const auto& c : runs[0]) worst_rel = std::max(worst_rel, c.residual / fnorm[0]);
    for (std::size_t k = 0; k < runs[0].size(); ++k) {
        if (runs[0][k].name == "resolvent_series") continue; // exact algebra on the lattice, h independent
        worst_halving = std::max(worst_halving, runs[1][k].residual / runs[0][k].residual);
    }
    const double ratio = worst_series_ratio(runs[0][1], 1e-14 * fnorm[0]);
    o.require(worst_rel <= 0.1, "max residual/|f| at h=1/64 " + fmt(worst_rel));
    o.require(ratio <= 0.3, "series ratio " + fmt(ratio) + " at lambda=" + fmt(lambda));
    o.require(worst_halving <= 0.6, "worst h-halving ratio " + fmt(worst_halving));
    o.require(secs < 10.0, "runtime " + fmt(secs) + " s");
    return o;
}

Outcome criterion_10(const std::filesystem::path& dir) {
    Outcome o;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.path().extension() == ".ini") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::size_t compared = 0, rejected = 0;
    bool all_same = !files.empty();
    for (const auto& p : files) {
        const auto cfg = runner::read_config_file(p.string());
        // Returns the produced files, or the violation message when the model
        // is rejected on purpose; either way two runs must agree exactly.
        auto once = [&](bool sweep_mode) -> std::map<std::string, std::string> {
            try {
                return (sweep_mode ? runner::sweep(cfg) : runner::run(cfg)).files;
            } catch (const ContractViolation& e) {
                return {{"contract_violation", e.what()}};
            }
        };
        std::vector<bool> modes{false};
        if (cfg.has("sweep", "values")) modes.push_back(true);
        for (bool mode : modes) {
            const auto a = once(mode), b = once(mode);
            all_same = all_same && a == b;
            rejected += a.count("contract_violation");
            ++compared;
        }
    }
    o.require(all_same, std::to_string(files.size()) + " configs, " + std::to_string(compared) +
                            " run/sweep pairs byte-identical (" + std::to_string(rejected) +
                            " rejected identically)");
    return o;
}

} // namespace

int main(int argc, char** argv) {
    const std::filesystem::path configs = argc > 1 ? argv[1] : "configs";
    struct Item {
        int id;
        const char* title;
        std::function<Outcome()> fn;
    };
    const std::vector<Item> items{
        {1, "oracle equivalence", criterion_1},
        {2, "analytic defects", criterion_2},
        {3, "mass ledger equality", criterion_3},
        {4, "defect monotonicity and honesty", criterion_4},
        {5, "left/right iterate equality", criterion_5},
        {6, "Duhamel and cocycle residuals", criterion_6},
        {7, "detailed-balance certificate", criterion_7},
        {8, "fragmentation reference", criterion_8},
        {9, "lifted-space identities", criterion_9},
        {10, "determinism", [&] { return criterion_10(configs); }},
    };
    int failed = 0;
    for (const auto& it : items) {
        Outcome o;
        try {
            o = it.fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", it.id, it.title, o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(items.size()) - failed, items.size());
    return failed == 0 ? 0 : 1;
}
