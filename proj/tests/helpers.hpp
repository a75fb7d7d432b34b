#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "sodef/tensor.hpp"

namespace sodef::test {

// Central finite differences of a scalar function of a flat vector.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h = 1e-6) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double dn = f(x);
        x[i] = keep;
        g[i] = (up - dn) / (2.0 * h);
    }
    return g;
}

inline double rel_err(double got, double want) {
    const double denom = std::max(std::fabs(want), 1e-12);
    return std::fabs(got - want) / denom;
}

// Max relative error between a tape gradient and its finite-difference
// counterpart, with an absolute floor so near-zero entries compare sanely.
inline double max_grad_rel_err(const Tensor& got, const std::vector<double>& want,
                               double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        const double denom = std::max(std::fabs(want[i]), floor);
        worst = std::max(worst, std::fabs(got[i] - want[i]) / denom);
    }
    return worst;
}

}  // namespace sodef::test
