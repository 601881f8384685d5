#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace bsq;
using bsq::test::max_abs;
using bsq::test::max_abs_diff;
using bsq::test::random_field;

namespace {

const cd I{0.0, 1.0};

// Trig-polynomial derivative summed term by term, independent of the library's
// multiplier code: d/dxbar exp(i<k,x>) = (i/2) k exp(i<k,x>).
cd direct_dbar(const std::vector<std::tuple<cd, cd>>& terms, cd x) {
    cd acc = 0.0;
    for (const auto& [c, k] : terms) acc += c * 0.5 * I * k * std::exp(I * std::real(std::conj(k) * x));
    return acc;
}

}  // namespace

TEST(Lattice, UnitSquareDual) {
    const Lattice l = make_lattice(1.0, I);
    EXPECT_NEAR(std::abs(l.e1_dual - cd(two_pi, 0)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(l.e2_dual - cd(0, two_pi)), 0.0, 1e-14);
    EXPECT_LE(pairing_defect(l), 1e-12);
}

TEST(Lattice, ScaledSquareDual) {
    const Lattice l = make_lattice(two_pi, two_pi * I);
    EXPECT_NEAR(std::abs(l.e1_dual - 1.0), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(l.e2_dual - I), 0.0, 1e-14);
}

TEST(Lattice, CollinearPeriodsRejected) {
    try {
        make_lattice(1.0, 1.0);
        FAIL() << "expected DegenerateLattice";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DegenerateLattice);
    }
}

TEST(Lattice, PairingExactForRandomLattices) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int t = 0; t < 200; ++t) {
        const cd e1{u(rng), u(rng)};
        const cd e2{u(rng), u(rng)};
        if (std::abs(std::imag(std::conj(e1) * e2)) < 1e-3) continue;
        const Lattice l = make_lattice(e1, e2);
        EXPECT_LE(pairing_defect(l), 1e-12 * std::max(1.0, std::abs(e1) * std::abs(l.e1_dual)));
    }
}

TEST(FloquetShift, ReducedToMinimalRepresentative) {
    const Lattice l = make_lattice(two_pi, two_pi * I);
    EXPECT_NEAR(std::abs(reduce_shift(l, cd(2.3, -1.8)) - cd(0.3, 0.2)), 0.0, 1e-14);
    EXPECT_EQ(reduce_shift(l, cd(3.0, -2.0)), cd(0.0));
    // Half-period tie goes toward the nonnegative side.
    EXPECT_NEAR(std::abs(reduce_shift(l, cd(-0.5, 0.0)) - cd(0.5, 0.0)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(reduce_shift(l, cd(0.5, -0.5)) - cd(0.5, 0.5)), 0.0, 1e-14);
}

TEST(TorusField, RoundTripSamplesCoeffs) {
    std::mt19937_64 rng(5);
    const Lattice l = make_lattice(cd(1.0, 0.2), cd(0.3, 1.1));
    const TorusField f = random_field(l, 32, 10, rng, 1.0, false, cd(0.7, -0.4));
    const TorusField g = TorusField::from_samples(l, 32, f.samples(), f.shift());
    EXPECT_LE(max_abs_diff(f.coeffs(), g.coeffs()), 1e-12 * max_abs(f.coeffs()));
}

TEST(TorusField, SingleModeCoefficients) {
    const Lattice l = make_lattice(1.0, I);
    const TorusField f = TorusField::from_function(l, 16, [&](cd x) { return std::exp(I * pairing(l.e1_dual, x)); });
    EXPECT_NEAR(std::abs(f.coeff(1, 0) - 1.0), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(f.mean()), 0.0, 1e-14);
}

TEST(TorusField, Parseval) {
    std::mt19937_64 rng(9);
    const Lattice l = make_lattice(two_pi, two_pi * I);
    for (int t = 0; t < 10; ++t) {
        const TorusField f = random_field(l, 64, 20, rng, 1.0, false, cd(0.1 * t, 0.05 * t));
        double s = 0.0, c = 0.0;
        for (const cd& v : f.samples()) s += std::norm(v);
        for (const cd& v : f.coeffs()) c += std::norm(v);
        s /= 64.0 * 64.0;
        EXPECT_NEAR(s, c, 1e-12 * c);
    }
}

TEST(TorusField, FloquetQuasiPeriodicity) {
    std::mt19937_64 rng(21);
    const Lattice l = make_lattice(cd(1.0, 0.0), cd(0.4, 0.9));
    const cd theta = 0.37 * l.e1_dual - 0.21 * l.e2_dual;
    const TorusField f = random_field(l, 16, 5, rng, 1.0, false, theta);
    for (cd x : {cd(0.13, 0.4), cd(-0.3, 0.77)}) {
        for (cd e : {l.e1, l.e2}) {
            // u(x - e) = exp(i <e, theta>) u(x)
            const cd lhs = f.evaluate(x - e);
            const cd rhs = std::exp(I * pairing(e, f.shift())) * f.evaluate(x);
            EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::abs(rhs));
        }
    }
}

TEST(TorusField, ShiftedSamplesMatchEvaluation) {
    std::mt19937_64 rng(22);
    const Lattice l = make_lattice(1.0, I);
    const TorusField f = random_field(l, 16, 5, rng, 1.0, false, cd(1.3, -2.2));
    for (int j = 0; j < 16; j += 5) {
        for (int k = 0; k < 16; k += 3) {
            EXPECT_LE(std::abs(f.evaluate(f.point(j, k)) - f.sample(j, k)), 1e-12);
        }
    }
}

TEST(TorusField, ConjugateNegatesShift) {
    std::mt19937_64 rng(3);
    const Lattice l = make_lattice(1.0, I);
    const TorusField f = random_field(l, 16, 4, rng, 1.0, false, cd(1.0, 2.0));
    const TorusField g = conj(f);
    const cd x{0.31, 0.62};
    EXPECT_LE(std::abs(g.evaluate(x) - std::conj(f.evaluate(x))), 1e-12);
    const TorusField p = f * g;
    EXPECT_EQ(p.shift(), cd(0.0));
}

TEST(DbarApply, ConstantIsAnnihilated) {
    const Lattice l = make_lattice(1.0, I);
    EXPECT_LE(dbar_apply(TorusField::constant(l, 16, cd(2.0, -1.0))).sup_norm(), 1e-15);
}

TEST(DbarApply, SingleMode) {
    const Lattice l = make_lattice(1.0, I);
    const TorusField f = TorusField::mode(l, 16, 1, 0);
    const TorusField d = dbar_apply(f);
    EXPECT_LE(std::abs(d.coeff(1, 0) - 0.5 * I * l.e1_dual), 1e-13);
}

TEST(DbarApply, MatchesTermwiseDerivative) {
    const Lattice l = make_lattice(cd(1.2, 0.1), cd(-0.2, 0.8));
    const cd theta = 0.3 * l.e2_dual;
    std::vector<std::tuple<cd, cd>> terms = {{cd(0.5, 0.1), l.dual_point(1, 2) - theta},
                                             {cd(-0.2, 0.3), l.dual_point(-3, 1) - theta},
                                             {cd(0.1, 0.0), l.dual_point(0, -2) - theta}};
    const TorusField f = TorusField::from_function(l, 32, [&](cd x) {
        cd acc = 0.0;
        for (const auto& [c, k] : terms) acc += c * std::exp(I * pairing(k, x));
        return acc;
    }, theta);
    const TorusField d = dbar_apply(f);
    for (int j = 0; j < 32; j += 7) {
        for (int k = 0; k < 32; k += 5) {
            EXPECT_LE(std::abs(d.sample(j, k) - direct_dbar(terms, d.point(j, k))), 1e-11);
        }
    }
}

TEST(DbarApply, RealPartialsCombine) {
    std::mt19937_64 rng(8);
    const Lattice l = make_lattice(1.0, cd(0.3, 1.0));
    const TorusField f = random_field(l, 32, 8, rng);
    const TorusField lhs = dbar_apply(f);
    const TorusField rhs = 0.5 * (partial_1(f) + I * partial_2(f));
    EXPECT_LE(max_abs_diff(lhs.samples(), rhs.samples()), 1e-11 * lhs.sup_norm());
    const TorusField lhs2 = d_apply(f);
    const TorusField rhs2 = 0.5 * (partial_1(f) - I * partial_2(f));
    EXPECT_LE(max_abs_diff(lhs2.samples(), rhs2.samples()), 1e-11 * lhs2.sup_norm());
}

TEST(DbarSolve, SingleMode) {
    const Lattice l = make_lattice(1.0, I);
    const TorusField f = TorusField::mode(l, 16, 1, 0);
    const TorusField u = dbar_solve(f);
    EXPECT_LE(std::abs(u.coeff(1, 0) - 2.0 / (I * l.e1_dual)), 1e-15);
}

TEST(DbarSolve, ZeroGivesZero) {
    const Lattice l = make_lattice(1.0, I);
    EXPECT_EQ(dbar_solve(TorusField::zero(l, 16)).sup_norm(), 0.0);
}

TEST(DbarSolve, InvertsDifferentiation) {
    std::mt19937_64 rng(17);
    const Lattice l = make_lattice(cd(1.0, 0.1), cd(0.2, 1.3));
    for (int t = 0; t < 20; ++t) {
        const TorusField g = random_field(l, 64, 20, rng, 1.0, false);
        const TorusField u = dbar_solve(dbar_apply(g));
        const TorusField expect = g - g.mean();
        EXPECT_LE(max_abs_diff(u.coeffs(), expect.coeffs()), 1e-11 * max_abs(expect.coeffs()));
    }
}

TEST(DbarSolve, NonzeroMeanIsNotSolvable) {
    const Lattice l = make_lattice(1.0, I);
    try {
        dbar_solve(TorusField::constant(l, 16, 1.0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonSolvable);
    }
}

TEST(DbarSolve, ShiftedSpaceIsAlwaysSolvable) {
    std::mt19937_64 rng(4);
    const Lattice l = make_lattice(1.0, I);
    const TorusField f = random_field(l, 32, 8, rng, 1.0, false, 0.25 * l.e1_dual + 0.1 * l.e2_dual);
    const TorusField back = dbar_apply(dbar_solve(f));
    EXPECT_LE(max_abs_diff(back.coeffs(), f.coeffs()), 1e-11 * max_abs(f.coeffs()));
}

TEST(DbarSolve, CorruptedShiftHitsSmallDivisor) {
    const Lattice l = make_lattice(1.0, I);
    const TorusField f = TorusField::constant(l, 16, 1.0) * TorusField::mode(l, 16, 0, 0, 1.0, cd(1e-11, 0.0));
    try {
        dbar_solve(f);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SmallDivisor);
    }
}

TEST(WeightedNorm, Basics) {
    const Lattice l = make_lattice(1.0, I);
    EXPECT_EQ(weighted_norm(TorusField::zero(l, 16), 2.5), 0.0);
    const TorusField f = TorusField::mode(l, 16, 0, 1);
    EXPECT_NEAR(weighted_norm(f, 2.5), std::pow(1.0 + two_pi, 2.5), 1e-9);
}

TEST(WeightedNorm, TriangleInequality) {
    std::mt19937_64 rng(99);
    const Lattice l = make_lattice(1.0, cd(0.5, 1.0));
    for (int t = 0; t < 50; ++t) {
        const TorusField a = random_field(l, 32, 10, rng);
        const TorusField b = random_field(l, 32, 10, rng);
        EXPECT_LE(weighted_norm(a + b), weighted_norm(a) + weighted_norm(b) + 1e-12);
    }
}

TEST(Dealias, KeepsLowerTwoThirds) {
    const Lattice l = make_lattice(1.0, I);
    const TorusField a = TorusField::mode(l, 64, 15, 0);
    const TorusField p = multiply(a, a);
    EXPECT_EQ(std::abs(p.coeff(30, 0)), 0.0);
    const TorusField b = TorusField::mode(l, 64, 10, 0);
    EXPECT_NEAR(std::abs(multiply(b, b).coeff(20, 0)), 1.0, 1e-13);
    EXPECT_NEAR(std::abs((a * a).coeff(30, 0)), 1.0, 1e-13);
}

TEST(GradPeriodic, GradientIsSingleValued) {
    std::mt19937_64 rng(2);
    const Lattice l = make_lattice(1.0, cd(0.2, 1.0));
    GradPeriodicFunction u{random_field(l, 16, 4, rng), cd(0.3, 0.1), cd(-0.2, 0.4)};
    EXPECT_LE(std::abs(u.periodic.mean()), 1e-12);
    const TorusField gx = u.dx();
    // gradient sampled at x and at x + e_j agree (evaluation through coefficients)
    for (cd x : {cd(0.1, 0.2), cd(0.7, 0.3)}) {
        EXPECT_LE(std::abs(gx.evaluate(x) - gx.evaluate(x + l.e1)), 1e-10);
        EXPECT_LE(std::abs(gx.evaluate(x) - gx.evaluate(x + l.e2)), 1e-10);
    }
    // the function itself jumps by a e_j + b conj(e_j)
    const cd x{0.4, 0.1};
    EXPECT_LE(std::abs(u.evaluate(x + l.e1) - u.evaluate(x) - (u.a * l.e1 + u.b * std::conj(l.e1))), 1e-10);
}
