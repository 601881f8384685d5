#include <gtest/gtest.h>

#include <random>

#include <bsq/hj_solver.hpp>

#include "oracles/newton_krylov.hpp"
#include "support.hpp"

using namespace bsq;

namespace {

const cd I{0.0, 1.0};
const Lattice big = make_lattice(two_pi, two_pi * I);

Nonlinearity xi1_squared(const Lattice& l, int n) {
    return polynomial_nonlinearity({PolyTerm{2, 0, TorusField::constant(l, n, 1.0)}});
}

// Quadratic family: F = xi1^2, r = (eps/2) exp(i <e1*, x>), eps = et^2 unless given.
SymbolModel quadratic_model(double et, int n = 64, double eps = -1.0) {
    if (eps < 0.0) eps = et * et;
    return simple_model(big, n, TorusField::mode(big, n, 1, 0, eps / 2.0), xi1_squared(big, n), eps, et);
}

oracle::HJSystem quadratic_system(const SymbolModel& m, cd a) {
    oracle::HJSystem sys;
    sys.lattice = m.lattice;
    sys.n = m.resolution();
    sys.et = m.epsilon_tilde;
    sys.a = a;
    sys.r_coeffs = m.r.coeffs();
    sys.F = [](cd x1, cd) { return x1 * x1; };
    return sys;
}

}  // namespace

TEST(SymbolModel, RejectsLinearNonlinearity) {
    const auto lin = polynomial_nonlinearity({PolyTerm{2, 0, TorusField::constant(big, 16, 1.0)}});
    Nonlinearity bad;
    bad.eval = [](const TorusField& x1, const TorusField&) { return x1; };
    const TorusField zero = TorusField::zero(big, 16);
    EXPECT_THROW(simple_model(big, 16, zero, bad, 0.0, 0.1), Error);
    EXPECT_THROW(polynomial_nonlinearity({PolyTerm{1, 0, zero}}), Error);
    const SymbolModel m = simple_model(big, 16, zero, lin, 0.0, 0.1);
    EXPECT_NEAR(m.F_constant, 1.0, 1e-12);
}

TEST(SymbolModel, EnforcesRegime) {
    const TorusField zero = TorusField::zero(big, 16);
    EXPECT_THROW(simple_model(big, 16, zero, Nonlinearity{}, 0.02, 0.1), Error);
    EXPECT_THROW(simple_model(big, 16, zero, Nonlinearity{}, 0.0, 1.5), Error);
    EXPECT_NO_THROW(simple_model(big, 16, zero, Nonlinearity{}, 0.01, 0.1));
    EXPECT_NEAR(default_epsilon_tilde(0.01), 0.1, 1e-15);
    const TorusField vanishing = TorusField::mode(big, 16, 1, 0);
    EXPECT_THROW(make_symbol_model(big, vanishing - vanishing, zero, zero, zero, Nonlinearity{}, 0.0, 0.1), Error);
}

TEST(SolveHJ, TrivialModel) {
    const SymbolModel m = simple_model(big, 32, TorusField::zero(big, 32), Nonlinearity{}, 0.0, 0.1);
    const HJSolution s = solve_hj(m, cd(0.2, -0.1), 1e-13);
    EXPECT_EQ(s.b, cd(0.0));
    EXPECT_EQ(s.u_per.sup_norm(), 0.0);
    EXPECT_LE(s.residual, 1e-14);
    EXPECT_LE(std::abs(s.phi.a - 0.1 * cd(0.2, -0.1)), 1e-16);
}

TEST(SolveHJ, ConstantForcing) {
    const double et = 0.1;
    const cd c{0.3, -0.2};
    const SymbolModel m = simple_model(big, 32, TorusField::constant(big, 32, et * c), Nonlinearity{}, 0.01, et);
    const HJSolution s = solve_hj(m, cd(0.1, 0.1), 1e-13);
    EXPECT_LE(std::abs(s.b - c), 1e-14);
    EXPECT_LE(s.u_per.sup_norm(), 1e-15);
    EXPECT_LE(s.residual, 1e-14);
    EXPECT_LE(std::abs(s.phi.b - et * c), 1e-15);
}

TEST(SolveHJ, QuadraticMatchesNewtonKrylov) {
    const SymbolModel m = quadratic_model(0.1, 64, 1e-3);
    const cd a{0.15, 0.05};
    const HJSolution s = solve_hj(m, a, 1e-12);
    EXPECT_LE(s.iterations, 30);
    EXPECT_LE(s.residual, 1e-10);
    const oracle::NKResult nk = oracle::solve_newton_krylov(quadratic_system(m, a));
    EXPECT_LE(nk.residual, 1e-11);
    EXPECT_LE(std::abs(nk.b - s.b), 1e-8);
    EXPECT_LE(test::max_abs_diff(nk.u, s.u_per.coeffs()), 1e-8);
}

TEST(SolveHJ, ContractionRateIsOrderEpsilonTilde) {
    for (double et : {0.05, 0.1, 0.2}) {
        const HJSolution s = solve_hj(quadratic_model(et), cd(0.1, 0.1), 1e-12);
        for (double ratio : contraction_ratios(s)) EXPECT_LE(ratio, 3.0 * et) << et;
        EXPECT_LE(s.residual, 1e-10);
        EXPECT_GT(s.size_constant, 0.0);
        EXPECT_LT(s.size_constant, 10.0);
    }
}

TEST(SolveHJ, UniqueFromDifferentStarts) {
    const SymbolModel m = quadratic_model(0.1);
    std::mt19937_64 rng(44);
    HJOptions opt;
    opt.initial_u = test::random_field(big, 64, 4, rng, 0.05);
    opt.initial_b = cd(0.02, -0.01);
    const double tol = 1e-12;
    const HJSolution s0 = solve_hj(m, 0.1, tol);
    const HJSolution s1 = solve_hj(m, 0.1, tol, opt);
    EXPECT_LE(std::abs(s0.b - s1.b), 10 * tol);
    EXPECT_LE(test::max_abs_diff(s0.u_per.coeffs(), s1.u_per.coeffs()), 10 * tol);
}

TEST(SolveHJ, ResidualThroughUnnormalizedSymbol) {
    const int n = 64;
    const double et = 0.1;
    const TorusField A = TorusField::constant(big, n, cd(1.0, 0.5)) + TorusField::mode(big, n, 0, 1, 0.2);
    const TorusField g1 = TorusField::mode(big, n, -1, 1, 0.002);
    const TorusField g2 = TorusField::mode(big, n, 1, 0, cd(0.0, 0.001));
    const SymbolModel m = make_symbol_model(big, A, g1, g2, TorusField::mode(big, n, 0, 1, 0.004),
                                            polynomial_nonlinearity({PolyTerm{1, 1, A * cd(0.5)}}), 0.01, et);
    const HJSolution s = solve_hj(m, cd(0.0, 0.2), 1e-12);
    EXPECT_LE(s.residual, 1e-10);
    EXPECT_LE(std::abs(s.u_per.mean()), 1e-12);
}

TEST(SolveHJ, OutsideRegimeIsReported) {
    // Large forcing with a strong nonlinearity: the iteration cannot contract.
    const int n = 32;
    const double et = 0.9;
    const auto F = polynomial_nonlinearity({PolyTerm{2, 0, TorusField::constant(big, n, 4.0)}});
    const SymbolModel m = simple_model(big, n, TorusField::mode(big, n, 1, 0, 0.8), F, 0.81, et);
    try {
        solve_hj(m, 0.0, 1e-12);
        FAIL();
    } catch (const Error& e) {
        EXPECT_TRUE(e.kind() == ErrorKind::NoContraction || e.kind() == ErrorKind::MaxIterations) << e.what();
    }
    EXPECT_THROW(solve_hj(quadratic_model(0.1, 16), 1.0, 1e-12), Error);
}

TEST(FamilyScan, TrivialCircle) {
    const SymbolModel m = simple_model(big, 16, TorusField::zero(big, 16), Nonlinearity{}, 0.0, 0.1);
    const auto scan = family_scan(m, circle_samples(0.0, 0.2, 16), 1e-13);
    ASSERT_EQ(scan.size(), 16u);
    for (const ScanEntry& e : scan) {
        ASSERT_TRUE(e.solution);
        EXPECT_EQ(e.solution->b, cd(0.0));
        EXPECT_LE(std::abs(e.solution->phi.a - 0.1 * e.a), 1e-17);
    }
}

TEST(FamilyScan, QuadraticCircleIsSmooth) {
    const SymbolModel m = quadratic_model(0.1);
    const auto scan = family_scan(m, circle_samples(0.0, 0.2, 16), 1e-12);
    for (std::size_t k = 0; k < scan.size(); ++k) {
        ASSERT_TRUE(scan[k].solution) << (scan[k].error ? scan[k].error->what() : "");
        const cd b0 = scan[k].solution->b;
        const cd b1 = scan[(k + 1) % scan.size()].solution->b;
        // |db/da| is O(et), neighbours are 0.2 * 2 pi / 16 apart
        EXPECT_LE(std::abs(b1 - b0), 0.1 * 0.08);
    }
}

TEST(FamilyScan, ReportsOutOfRangePerSample) {
    const SymbolModel m = quadratic_model(0.1, 16);
    const auto scan = family_scan(m, {cd(0.1), cd(0.7)}, 1e-12);
    EXPECT_TRUE(scan[0].solution);
    ASSERT_TRUE(scan[1].error);
    EXPECT_EQ(scan[1].error->kind(), ErrorKind::OutOfRange);
}

TEST(FamilyScan, ResolutionConvergence) {
    const auto a = circle_samples(0.0, 0.2, 16);
    const auto s32 = family_scan(quadratic_model(0.1, 32), a, 1e-12);
    const auto s64 = family_scan(quadratic_model(0.1, 64), a, 1e-12);
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_LE(std::abs(s32[k].solution->b - s64[k].solution->b), 1e-8);
    }
}

namespace {
std::vector<HJSolution> circle_solutions(const SymbolModel& m, cd a0, double rho, int count) {
    std::vector<HJSolution> out;
    for (const ScanEntry& e : family_scan(m, circle_samples(a0, rho, count), 1e-12)) out.push_back(*e.solution);
    return out;
}
}  // namespace

TEST(HolomorphyDefect, TrivialAndConstantModels) {
    const SymbolModel triv = simple_model(big, 16, TorusField::zero(big, 16), Nonlinearity{}, 0.0, 0.1);
    EXPECT_EQ(holomorphy_defect(circle_solutions(triv, 0.0, 0.2, 16), 0.0), 0.0);
    const SymbolModel cst =
        simple_model(big, 16, TorusField::constant(big, 16, cd(0.01, 0.02)), Nonlinearity{}, 0.01, 0.1);
    EXPECT_LE(holomorphy_defect(circle_solutions(cst, 0.0, 0.2, 16), 0.0), 1e-12);
}

TEST(HolomorphyDefect, QuadraticModel) {
    const auto sols = circle_solutions(quadratic_model(0.1), 0.0, 0.2, 16);
    EXPECT_LE(holomorphy_defect(sols, 0.0), 1e-8);
    // the data are far from constant, so the test is not vacuous
    EXPECT_GT(std::abs(sols[0].b - sols[8].b), 1e-4);
}

TEST(HolomorphyDefect, DetectsAntiholomorphicData) {
    auto sols = circle_solutions(quadratic_model(0.1, 16), 0.0, 0.2, 16);
    for (HJSolution& s : sols) s.b += 0.01 * std::conj(s.a);
    EXPECT_NEAR(holomorphy_defect(sols, 0.0), 0.002, 1e-8);
    sols.resize(8);
    EXPECT_THROW(holomorphy_defect(sols, 0.0), Error);
}
