#pragma once

#include <cmath>

#include "gibbsctrl/grid.hpp"
#include "gibbsctrl/model.hpp"

namespace gctest {

using namespace gibbsctrl;

// benchmark: d=1, T=1, sigma=1, D=[-1,1], eps=0.1, amplitude 1, f~=0,
// g(x)=|x|, x0=-1 (fields overridable per test)
inline ProblemConfig bench() { return default_problem(); }

// coarse mesh for unit tests; acceptance uses the spec-pinned fine meshes
inline Grid coarse_grid(const ProblemConfig& cfg, int points = 285) {
    return default_grid(cfg, points);
}

inline GridField sample(const Grid& g, const std::function<double(double, double)>& f) {
    GridField out(g);
    for (int idx = 0; idx < g.size(); ++idx) {
        double x[2] = {0.0, 0.0};
        g.node(idx, x);
        out.v[static_cast<size_t>(idx)] = f(x[0], x[1]);
    }
    return out;
}

inline GridField gaussian_density_1d(const Grid& g, double mean, double var) {
    return sample(g, [&](double x, double) {
        return std::exp(-0.5 * (x - mean) * (x - mean) / var) /
               std::sqrt(2.0 * M_PI * var);
    });
}

}  // namespace gctest
