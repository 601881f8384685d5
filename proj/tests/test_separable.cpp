#include <gtest/gtest.h>

#include <random>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <bsq/pipeline.hpp>
#include <bsq/separable.hpp>

using namespace bsq;

namespace {

const double pi = std::numbers::pi;

PlanarHamiltonian harmonic(double lo = 0.1, double hi = 2.0) {
    return make_planar_hamiltonian([](double x, double xi) { return 0.5 * (x * x + xi * xi); }, nullptr, lo, hi,
                                   Rect{-3, 3, -3, 3});
}

PlanarHamiltonian quartic() {
    return make_planar_hamiltonian([](double x, double xi) { return 0.5 * (x * x + xi * xi) + 0.1 * x * x * x * x; },
                                   nullptr, 0.1, 1.0, Rect{-2.5, 2.5, -2.5, 2.5});
}

// 2 * integral of xi(x) over the turning-point interval.
double quartic_area(double E) {
    const double u = (-0.5 + std::sqrt(0.25 + 0.4 * E)) / 0.2;  // x^2 at the turning point
    const double xt = std::sqrt(u);
    boost::math::quadrature::tanh_sinh<double> q;
    auto f = [E](double x) { return std::sqrt(std::max(0.0, 2.0 * (E - 0.5 * x * x - 0.1 * x * x * x * x))); };
    return 2.0 * q.integrate(f, -xt, xt);
}

double oscillator_area(double c, double kappa, double E) {
    const double s = kappa == 0.0 ? E : (-1.0 + std::sqrt(1.0 + 4.0 * kappa * E)) / (2.0 * kappa);
    return 2.0 * pi * (c + s);
}

}  // namespace

TEST(Action1D, HarmonicAreas) {
    const auto h = harmonic();
    for (auto backend : {ActionBackend::Region, ActionBackend::Contour}) {
        EXPECT_NEAR(action_1d(h, 1.0, backend) / (2.0 * pi), 1.0, 1e-8);
        EXPECT_NEAR(action_1d(h, 0.35, backend) / (0.7 * pi), 1.0, 1e-8);
    }
    EXPECT_NEAR(h.action(1.0), 2.0 * pi, 1e-12);
}

TEST(Action1D, QuarticBackendsAgree) {
    const auto h = quartic();
    const double region = action_1d(h, 0.5, ActionBackend::Region);
    const double contour = action_1d(h, 0.5, ActionBackend::Contour);
    EXPECT_NEAR(region, contour, 1e-7 * region);
    EXPECT_NEAR(region, quartic_area(0.5), 1e-10 * region);
}

TEST(Action1D, Errors) {
    const auto h = harmonic();
    EXPECT_THROW(action_1d(h, 2.5), Error);
    PlanarHamiltonian small = h;
    small.box = Rect{-1, 1, -1, 1};
    try {
        action_1d(small, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::OpenLevelSet);
    }
    try {
        action_1d(small, 1.0, ActionBackend::Contour);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::OpenLevelSet);
    }
    // A double well has a critical point on the level range.
    EXPECT_THROW(make_planar_hamiltonian([](double x, double xi) { return 0.5 * xi * xi + (x * x - 1) * (x * x - 1); },
                                         nullptr, 0.5, 1.5, Rect{-3, 3, -3, 3}),
                 Error);
}

TEST(Action1D, InterpolantMonotoneAndDifferentiable) {
    const auto h = quartic();
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.15, 0.95);
    for (int k = 0; k < 10; ++k) {
        const double E = u(rng);
        EXPECT_NEAR(h.action(E), action_1d(h, E), 1e-10);
        const double d = 1e-4;
        const double fd = (action_1d(h, E + d) - action_1d(h, E - d)) / (2.0 * d);
        EXPECT_NEAR(h.action_prime(E), fd, 1e-6);
        EXPECT_GT(h.action_prime(E), 0.0);
    }
    EXPECT_LT(h.interpolant_tail, 1e-8);
    EXPECT_GT(h.gradient_floor, 0.1);
}

TEST(Action1D, OscillatorClosedForm) {
    for (double kappa : {0.0, 0.3, -0.2}) {
        const auto h = oscillator_hamiltonian(1.0, kappa);
        for (double E : {-0.4, 0.0, 0.25}) {
            EXPECT_NEAR(action_1d(h, E), oscillator_area(1.0, kappa, E), 1e-10);
            EXPECT_NEAR(h.action(E), oscillator_area(1.0, kappa, E), 1e-10);
        }
    }
}

TEST(SeparableActions, HarmonicRealDiagonal) {
    const auto m = oscillator_model({1.0, 1.0}, {0.0, 0.0});
    for (double w : {-0.2, 0.0, 0.3}) {
        const auto [I1, I2] = separable_actions(m, w, w);
        EXPECT_LE(std::abs(I1 - 2.0 * pi * (1.0 + w)), 1e-12);
        EXPECT_LE(std::abs(I2 - 2.0 * pi), 1e-12);
    }
    EXPECT_THROW(separable_actions(m, 0.0, 2.0), Error);
}

TEST(SeparableActions, RealitySelection) {
    const auto m = oscillator_model({1.0, 0.9}, {0.2, -0.15});
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (int k = 0; k < 10; ++k) {
        const cd z(u(rng), u(rng));
        const auto r = separable_real(m, z);
        EXPECT_LE(std::abs(r.w - z.real()), 1e-13);
        const auto moved = separable_real(m, z, 1e-14, 50, z.real() + cd(0.05, 0.1));
        EXPECT_GT(moved.iterations, 1);
        EXPECT_LE(std::abs(moved.w - z.real()), 1e-13);
        EXPECT_NEAR(r.I[0], oscillator_area(1.0, 0.2, z.real()), 1e-10);
        EXPECT_NEAR(r.I[1], oscillator_area(0.9, -0.15, z.imag()), 1e-10);
    }
}

TEST(SeparableActions, AgreesWithTorusPipeline) {
    const Vec2 c{1.0, 0.9}, kappa{0.2, -0.15};
    const auto m = oscillator_model(c, kappa);
    const auto fam = separable_torus_family(c, kappa, 0.25, 16);
    RealityOptions opt;
    opt.corrections = fam.corrections;
    for (cd z : {cd(0.0, 0.0), cd(0.03, -0.02), cd(-0.05, 0.04)}) {
        const auto r = find_real_actions(fam.family.at(z), 1e-12, opt);
        const auto s = separable_real(m, z);
        EXPECT_NEAR(r.actions.I1.real(), s.I[0], 1e-10);
        EXPECT_NEAR(r.actions.I2.real(), s.I[1], 1e-10);
    }
}

TEST(SeparableActions, JacobianAndTwist) {
    const auto m = oscillator_model({1.0, 0.9}, {0.2, -0.15});
    const auto map = separable_action_map(m, Rect{-0.4, 0.4, -0.4, 0.4}, {0.0, 0.0});
    for (cd z : {cd(0.1, -0.1), cd(-0.2, 0.05)}) {
        const double d = 1e-5;
        const Vec2 px = map(z + d), mx = map(z - d), py = map(z + cd(0, d)), my = map(z - cd(0, d));
        const double j00 = (px[0] - mx[0]) / (2 * d), j01 = (py[0] - my[0]) / (2 * d);
        const double j10 = (px[1] - mx[1]) / (2 * d), j11 = (py[1] - my[1]) / (2 * d);
        const double det = separable_jacobian_det(m, z);
        EXPECT_NEAR(j00 * j11 - j01 * j10, det, 1e-8 * std::abs(det));
        // d_w I1 = A1', d_w I2 = i A2'
        const cd dw1 = m.p1.action_prime(z.real());
        const cd dw2 = cd(0.0, 1.0) * m.p2.action_prime(z.imag());
        EXPECT_GT(std::abs((dw1 * std::conj(dw2)).imag()), 1.0);
    }
}

TEST(SeparableBS, HarmonicLadder) {
    const auto m = oscillator_model({1.0, 1.0}, {0.0, 0.0});
    const double h = 0.01;
    const Rect window{-0.05, 0.05, -0.05, 0.05};
    const auto l = separable_bs(m, h, window, {-0.5, -0.5});
    ASSERT_EQ(l.entries.size(), 100u);
    for (const auto& e : l.entries) {
        EXPECT_NEAR(e.z.real(), -1.0 + h * (-0.5 - e.k[0]), 1e-12);
        EXPECT_NEAR(e.z.imag(), -1.0 + h * (-0.5 - e.k[1]), 1e-12);
        EXPECT_LE(e.newton_residual, 1e-10);
    }
    EXPECT_NEAR(l.meta.separation, 1.0, 1e-9);
    const auto half = separable_bs(m, h / 2, window, {-0.5, -0.5});
    EXPECT_EQ(half.entries.size(), 400u);
}

TEST(SeparableBS, CountScaling) {
    const auto m = oscillator_model({1.0, 0.9}, {0.2, -0.15});
    const Rect window{-0.1, 0.1, -0.07, 0.07};
    const auto a = separable_bs(m, 0.01, window, {-0.5, -0.5});
    const auto b = separable_bs(m, 0.005, window, {-0.5, -0.5});
    // Each axis count n -> 2n or 2n +- 1.
    const double ratio = static_cast<double>(b.entries.size()) / a.entries.size();
    EXPECT_GT(ratio, 3.4);
    EXPECT_LT(ratio, 4.6);
}

TEST(SeparableBS, MatchesBSSolve) {
    const auto m = oscillator_model({1.0, 0.9}, {0.2, -0.15});
    const Rect window{-0.08, 0.08, -0.08, 0.08};
    const Vec2 theta0{-0.5, -0.5};
    const auto oracle = separable_bs(m, 0.01, window, theta0);
    const auto map = separable_action_map(m, Rect{-0.3, 0.3, -0.3, 0.3}, theta0);
    const auto bs = bs_solve(map, 0.01, window, {.certify = true});
    ASSERT_EQ(bs.entries.size(), oracle.entries.size());
    for (std::size_t i = 0; i < bs.entries.size(); ++i) {
        bool matched = false;
        for (const auto& o : oracle.entries) {
            if (o.k == bs.entries[i].k) {
                EXPECT_LE(std::abs(o.z - bs.entries[i].z), 1e-9);
                matched = true;
            }
        }
        EXPECT_TRUE(matched);
        EXPECT_EQ(bs.entries[i].multiplicity, 1);
    }
}

TEST(SeparableBS, AnharmonicPipeline) {
    const Vec2 c{1.0, 0.9}, kappa{0.2, -0.15};
    const auto m = oscillator_model(c, kappa);
    const auto fam = separable_torus_family(c, kappa, 0.25, 16);
    const Rect window{-0.04, 0.04, -0.04, 0.04};
    const Vec2 theta0{-0.5, -0.5};
    const auto tab = tabulate_actions(fam.family, fam.corrections, Rect{-0.06, 0.06, -0.06, 0.06}, theta0, 1e-12);
    EXPECT_LE(tab.max_imag, 1e-10);
    for (double h : {0.02, 0.01}) {
        const auto oracle = separable_bs(m, h, window, theta0);
        const auto bs = bs_solve(tab.map, h, window, {.certify = true});
        ASSERT_EQ(bs.entries.size(), oracle.entries.size());
        double worst = 0.0;
        for (const auto& e : bs.entries) {
            for (const auto& o : oracle.entries) {
                if (o.k == e.k) worst = std::max(worst, std::abs(o.z - e.z));
            }
            EXPECT_EQ(e.multiplicity, 1);
        }
        EXPECT_LE(worst, 1e-8);
    }
}
