#pragma once

#include "lattice.hpp"

namespace bsq {

/// Closed axis-aligned rectangle in C.
struct Rect {
    double re_min = -1.0;
    double re_max = 1.0;
    double im_min = -1.0;
    double im_max = 1.0;

    bool contains(cd z, double slack = 0.0) const {
        return z.real() >= re_min - slack && z.real() <= re_max + slack && z.imag() >= im_min - slack &&
               z.imag() <= im_max + slack;
    }
    bool contains(const Rect& o) const { return contains(cd(o.re_min, o.im_min)) && contains(cd(o.re_max, o.im_max)); }
    double width() const { return re_max - re_min; }
    double height() const { return im_max - im_min; }
    cd corner(int k) const { return {k & 1 ? re_max : re_min, k & 2 ? im_max : im_min}; }
    bool valid() const { return re_min < re_max && im_min < im_max; }
};

}  // namespace bsq
