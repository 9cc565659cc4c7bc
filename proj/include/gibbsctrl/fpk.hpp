#pragma once

#include <stdexcept>
#include <vector>

#include "gibbsctrl/grid.hpp"
#include "gibbsctrl/model.hpp"

namespace gibbsctrl {

struct FpkError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Time-indexed conditioned measures mu_t together with the log-mass of the
// unnormalized linear flow. The solver advances the normalized density and
// accumulates log-mass increments, which keeps hard-killing regimes away from
// floating-point underflow.
struct GibbsFlow {
    Grid grid;
    std::vector<double> times;       // 0 = t_0 < ... < t_K = T
    std::vector<GridField> mu;       // unit-mass densities
    std::vector<double> log_mass;    // log of the unnormalized-flow mass
    bool extended = false;           // (x,a) grid: axis 0 = x, axis 1 = a

    int steps() const { return static_cast<int>(times.size()) - 1; }
    double dt() const { return times.back() / steps(); }
    const GridField& terminal() const { return mu.back(); }
};

// One operator-splitting step of the linear killed flow
//   d gamma = 1/2 sigma^2 Lap gamma - div(drift gamma) - V gamma
// explicit upwind advection, Crank-Nicolson diffusion (homogeneous Dirichlet
// at the truncation boundary), exact exponential reaction factor exp(-V dt).
// Rejects the step when max|drift| dt / dx > 0.9.
GridField step_gamma(const GridField& gamma, const VectorField& drift,
                     const GridField& potential, double dt, double sigma);

// Forward solve of the non-local FPK equation through the unnormalized linear
// flow, renormalizing every step. The control is evaluated at the left time
// endpoint of each step.
GibbsFlow solve_fpk(const ProblemConfig& config, const Control& control,
                    const Grid& grid, int steps);

// Extended-class variant on an (x,a) grid (d=1 only): adds first-order upwind
// transport at speed V(x) along the a-axis with zero inflow at a=0; diffusion
// acts in x only.
GibbsFlow solve_fpk_extended(const ProblemConfig& config, const Control& psi,
                             const Grid& grid_xa, int steps);

// x-marginal of an extended flow at a stored time (trapezoid over the a-axis)
GridField x_marginal(const GibbsFlow& flow_xa, int t_index);

// <mu_t, V> for every stored time
std::vector<double> mean_potential(const GibbsFlow& flow, const ProblemConfig& config);

}  // namespace gibbsctrl
