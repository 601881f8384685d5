#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "actions.hpp"
#include "bs_lattice.hpp"
#include "chebyshev.hpp"
#include "parallel.hpp"
#include "symbol_model.hpp"

namespace bsq {

struct TabulatedActions {
    ActionMap map;
    int degree = 0;
    std::vector<cd> nodes;
    std::vector<Vec2> values;
    std::vector<cd> a_star;
    double max_imag = 0.0;  // largest |Im I_j| after reality selection
    int max_newton = 0;
    std::vector<double> hj_residuals;
};

/// Runs find_real_actions at the tensor Chebyshev nodes of `domain` and
/// interpolates z -> (I1, I2) between them.
inline TabulatedActions tabulate_actions(const ZFamily& fam, std::array<double, 2> corrections, const Rect& domain,
                                         Vec2 theta0, double tol, int degree = 12, RealityOptions opt = {},
                                         unsigned threads = 0) {
    TabulatedActions t;
    t.degree = degree;
    t.nodes = Chebyshev2D::nodes(domain.re_min, domain.re_max, domain.im_min, domain.im_max, degree);
    t.values.resize(t.nodes.size());
    t.a_star.resize(t.nodes.size());
    t.hj_residuals.resize(t.nodes.size());
    std::vector<double> imag(t.nodes.size());
    std::vector<int> iters(t.nodes.size());
    opt.corrections = corrections;
    opt.derivative_ratio = false;
    parallel_for(
        t.nodes.size(),
        [&](std::size_t i) {
            const RealityResult r = find_real_actions(fam.at(t.nodes[i]), tol, opt);
            t.values[i] = {r.actions.I1.real(), r.actions.I2.real()};
            t.a_star[i] = r.a_star;
            t.hj_residuals[i] = r.solution.residual;
            imag[i] = std::max(std::abs(r.actions.I1.imag()), std::abs(r.actions.I2.imag()));
            iters[i] = r.newton_iters;
        },
        threads);
    t.max_imag = *std::max_element(imag.begin(), imag.end());
    t.max_newton = *std::max_element(iters.begin(), iters.end());
    const Chebyshev2D interp =
        Chebyshev2D::from_values(domain.re_min, domain.re_max, domain.im_min, domain.im_max, degree, t.values);
    t.map.eval = [interp](cd z) { return interp(z); };
    t.map.domain = domain;
    t.map.theta0 = theta0;
    return t;
}

}  // namespace bsq
