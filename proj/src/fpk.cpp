#include "gibbsctrl/fpk.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gibbsctrl/linalg.hpp"

namespace gibbsctrl {

namespace {

// Half-step primitives for Crank-Nicolson / Peaceman-Rachford splitting with
// homogeneous Dirichlet boundary. rhalf = D*dt/(2 h^2).

// out = (I + rhalf L_axis) f
void axis_explicit_half(GridField& f, int axis, double diff_coef, double dt) {
    const Grid& g = f.grid;
    const int np = g.n[axis];
    const double rhalf = 0.5 * diff_coef * dt / (g.spacing(axis) * g.spacing(axis));
    const int stride = (axis == 0) ? g.n[1] : 1;
    const int nt = g.size() / np;
    std::vector<double> line_old(static_cast<size_t>(np));
    for (int line = 0; line < nt; ++line) {
        int base = (axis == 0) ? line : line * g.n[1];
        auto at = [&](int p) -> double& { return f.v[static_cast<size_t>(base + p * stride)]; };
        for (int p = 0; p < np; ++p) line_old[static_cast<size_t>(p)] = at(p);
        for (int p = 1; p < np - 1; ++p)
            at(p) = line_old[static_cast<size_t>(p)] +
                    rhalf * (line_old[static_cast<size_t>(p - 1)] -
                             2.0 * line_old[static_cast<size_t>(p)] +
                             line_old[static_cast<size_t>(p + 1)]);
        at(0) = 0.0;
        at(np - 1) = 0.0;
    }
}

// solve (I - rhalf L_axis) out = f
void axis_implicit_half(GridField& f, int axis, double diff_coef, double dt) {
    const Grid& g = f.grid;
    const int np = g.n[axis];
    const double rhalf = 0.5 * diff_coef * dt / (g.spacing(axis) * g.spacing(axis));
    const int interior = np - 2;
    if (interior <= 0) return;
    std::vector<double> lower(interior, -rhalf), diag(interior, 1.0 + 2.0 * rhalf),
        upper(interior, -rhalf), rhs(interior), scratch(interior);
    const int stride = (axis == 0) ? g.n[1] : 1;
    const int nt = g.size() / np;
    for (int line = 0; line < nt; ++line) {
        int base = (axis == 0) ? line : line * g.n[1];
        auto at = [&](int p) -> double& { return f.v[static_cast<size_t>(base + p * stride)]; };
        for (int p = 1; p <= interior; ++p) rhs[p - 1] = at(p);
        solve_tridiagonal(lower.data(), diag.data(), upper.data(), rhs.data(), interior,
                          scratch.data());
        for (int p = 1; p <= interior; ++p) at(p) = rhs[p - 1];
        at(0) = 0.0;
        at(np - 1) = 0.0;
    }
}

void check_cfl(double max_speed, double dt, double h, const char* what) {
    if (max_speed * dt / h > 0.9) {
        throw FpkError(std::string(what) + " CFL violation: max speed " +
                       std::to_string(max_speed) + " with dt/dx = " +
                       std::to_string(dt / h) +
                       "; shrink dt or coarsen the advected axis");
    }
}

// conservative first-order upwind for -div(drift f) along one axis
void upwind_advect_axis(GridField& f, const GridField& drift_axis, int axis, double dt) {
    const Grid& g = f.grid;
    const int np = g.n[axis];
    const double h = g.spacing(axis);
    const int stride = (axis == 0) ? g.n[1] : 1;
    const int nt = g.size() / np;
    std::vector<double> flux(static_cast<size_t>(np) - 1);
    std::vector<double> old_line(static_cast<size_t>(np));
    for (int line = 0; line < nt; ++line) {
        int base = (axis == 0) ? line : line * g.n[1];
        auto at = [&](int p) -> double& { return f.v[static_cast<size_t>(base + p * stride)]; };
        auto vel = [&](int p) { return drift_axis.v[static_cast<size_t>(base + p * stride)]; };
        for (int p = 0; p < np; ++p) old_line[static_cast<size_t>(p)] = at(p);
        for (int p = 0; p + 1 < np; ++p) {
            double v = 0.5 * (vel(p) + vel(p + 1));
            flux[static_cast<size_t>(p)] =
                v >= 0.0 ? v * old_line[static_cast<size_t>(p)]
                         : v * old_line[static_cast<size_t>(p + 1)];
        }
        for (int p = 1; p < np - 1; ++p) {
            at(p) = old_line[static_cast<size_t>(p)] -
                    dt / h * (flux[static_cast<size_t>(p)] - flux[static_cast<size_t>(p - 1)]);
        }
        at(0) = 0.0;
        at(np - 1) = 0.0;
    }
}

// Upwind transport for -V(x) d/da, zero inflow at a=0, outflow at a_max.
// Works on the trapezoid-weighted cell masses (half cells at the a-ends) so
// the transported quantity is the same mass the quadrature sees.
void transport_a_axis(GridField& f, const std::vector<double>& speed_per_x, double dt) {
    const Grid& g = f.grid;
    const int nx = g.n[0], na = g.n[1];
    const double da = g.spacing(1);
    std::vector<double> flux(static_cast<size_t>(na));
    auto cell_weight = [&](int j) { return (j == 0 || j == na - 1) ? 0.5 : 1.0; };
    for (int i = 0; i < nx; ++i) {
        const double c = speed_per_x[static_cast<size_t>(i)];
        if (c == 0.0) continue;
        const double nu = c * dt / da;
        // upwind face flux in weighted-mass units: nu * density at the cell
        for (int j = 0; j < na; ++j) flux[static_cast<size_t>(j)] = nu * f(i, j);
        for (int j = na - 1; j >= 0; --j) {
            double mass = cell_weight(j) * f(i, j);
            double inflow = (j == 0) ? 0.0 : flux[static_cast<size_t>(j - 1)];
            f(i, j) = (mass - flux[static_cast<size_t>(j)] + inflow) / cell_weight(j);
        }
    }
}

double max_abs(const GridField& f) {
    double m = 0.0;
    for (double x : f.v) m = std::max(m, std::fabs(x));
    return m;
}

void diffuse(GridField& f, double diff_coef, double dt, bool x_axis_only) {
    if (f.grid.dim == 1 || x_axis_only) {
        // Crank-Nicolson: (I - r/2 L) out = (I + r/2 L) in
        axis_explicit_half(f, 0, diff_coef, dt);
        axis_implicit_half(f, 0, diff_coef, dt);
        return;
    }
    // Peaceman-Rachford ADI:
    //   (I - rx/2 Lx) u*  = (I + ry/2 Ly) u
    //   (I - ry/2 Ly) u** = (I + rx/2 Lx) u*
    axis_explicit_half(f, 1, diff_coef, dt);
    axis_implicit_half(f, 0, diff_coef, dt);
    axis_explicit_half(f, 0, diff_coef, dt);
    axis_implicit_half(f, 1, diff_coef, dt);
}

}  // namespace

GridField step_gamma(const GridField& gamma, const VectorField& drift,
                     const GridField& potential, double dt, double sigma) {
    if (dt <= 0.0) throw FpkError("step_gamma: dt must be > 0");
    const Grid& g = gamma.grid;
    GridField out = gamma;

    for (int axis = 0; axis < g.dim; ++axis) {
        if (!drift[axis].all_finite()) throw FpkError("step_gamma: drift not finite");
        check_cfl(max_abs(drift[axis]), dt, g.spacing(axis), "advection");
    }
    for (int axis = 0; axis < g.dim; ++axis)
        upwind_advect_axis(out, drift[axis], axis, dt);

    diffuse(out, 0.5 * sigma * sigma, dt, /*x_axis_only=*/false);

    for (int idx = 0; idx < g.size(); ++idx)
        out.v[static_cast<size_t>(idx)] *= std::exp(-potential.v[static_cast<size_t>(idx)] * dt);
    return out;
}

namespace {

GibbsFlow solve_impl(const ProblemConfig& config, const Control& control,
                     const Grid& grid, int steps, bool extended) {
    config.validate();
    if (steps < 1) throw FpkError("solve_fpk: need at least one step");
    if (extended) {
        if (config.dim != 1) throw FpkError("solve_fpk_extended: d=1 only");
        if (grid.dim != 2) throw FpkError("solve_fpk_extended: need an (x,a) grid");
    } else if (grid.dim != config.dim) {
        throw FpkError("solve_fpk: grid dimension mismatch");
    }

    const double T = config.horizon;
    const double dt = T / steps;
    const int state_dim = extended ? 1 : config.dim;

    // node-held potential and (for extended) a-transport speed per x-row
    GridField pot(grid);
    std::vector<double> exp_kill(static_cast<size_t>(grid.size()));
    for (int idx = 0; idx < grid.size(); ++idx) {
        double x[2];
        grid.node(idx, x);
        pot.v[static_cast<size_t>(idx)] = config.potential.value(x, state_dim);
        exp_kill[static_cast<size_t>(idx)] = std::exp(-pot.v[static_cast<size_t>(idx)] * dt);
    }
    std::vector<double> a_speed;
    if (extended) {
        a_speed.resize(static_cast<size_t>(grid.n[0]));
        for (int i = 0; i < grid.n[0]; ++i) {
            double x = grid.coord(0, i);
            a_speed[static_cast<size_t>(i)] = config.potential.value(&x, 1);
        }
        // the half cell at a=0 halves the admissible step of the mass-space upwind
        check_cfl(config.potential.amplitude(), dt, 0.5 * grid.spacing(1), "a-transport");
    }

    GibbsFlow flow;
    flow.grid = grid;
    flow.extended = extended;
    flow.times.resize(static_cast<size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k) flow.times[static_cast<size_t>(k)] = T * k / steps;
    flow.mu.reserve(flow.times.size());
    flow.log_mass.reserve(flow.times.size());

    // initial measure: for the extended class the a-marginal starts as the
    // delta at a=0 (all mass on the first a-plane)
    GridField density(grid);
    if (extended) {
        ProblemConfig cfg1 = config;
        Grid gx = Grid::make1d(grid.lo[0], grid.hi[0], grid.n[0]);
        GridField mx = project_initial_measure(cfg1, gx);
        for (int i = 0; i < grid.n[0]; ++i) density(i, 0) = mx(i);
        double m = integrate(density);
        for (double& v : density.v) v /= m;
    } else {
        density = project_initial_measure(config, grid);
    }
    flow.mu.push_back(density);
    flow.log_mass.push_back(0.0);

    VectorField drift;
    for (int a = 0; a < grid.dim; ++a) drift[a] = GridField(grid);

    double log_mass = 0.0;
    for (int k = 0; k < steps; ++k) {
        const double t = flow.times[static_cast<size_t>(k)];
        // drift at the left endpoint
        for (int idx = 0; idx < grid.size(); ++idx) {
            double x[2];
            grid.node(idx, x);
            double alpha[kMaxDim];
            if (extended) {
                control.eval(t, x, x[1], alpha);
                drift[0].v[static_cast<size_t>(idx)] = alpha[0];
            } else {
                control.eval(t, x, 0.0, alpha);
                for (int a = 0; a < grid.dim; ++a)
                    drift[a].v[static_cast<size_t>(idx)] = alpha[a];
            }
        }

        const int adv_axes = extended ? 1 : grid.dim;
        for (int axis = 0; axis < adv_axes; ++axis) {
            if (!drift[axis].all_finite())
                throw FpkError("solve_fpk: control evaluates non-finite on the grid");
            check_cfl(max_abs(drift[axis]), dt, grid.spacing(axis), "advection");
            upwind_advect_axis(density, drift[axis], axis, dt);
        }
        if (extended) transport_a_axis(density, a_speed, dt);

        diffuse(density, 0.5 * config.sigma * config.sigma, dt, extended);

        for (int idx = 0; idx < grid.size(); ++idx)
            density.v[static_cast<size_t>(idx)] *= exp_kill[static_cast<size_t>(idx)];

        double mass = integrate(density);
        if (!(mass > 0.0) || log_mass + std::log(mass) < std::log(1e-300)) {
            throw FpkError("solve_fpk: total mass underflow at t = " + std::to_string(t + dt) +
                           " (potential too strong for the horizon)");
        }
        log_mass += std::log(mass);
        for (double& v : density.v) v /= mass;
        if (!density.all_finite()) throw FpkError("solve_fpk: non-finite density");

        flow.mu.push_back(density);
        flow.log_mass.push_back(log_mass);
    }
    return flow;
}

}  // namespace

GibbsFlow solve_fpk(const ProblemConfig& config, const Control& control,
                    const Grid& grid, int steps) {
    return solve_impl(config, control, grid, steps, false);
}

GibbsFlow solve_fpk_extended(const ProblemConfig& config, const Control& psi,
                             const Grid& grid_xa, int steps) {
    return solve_impl(config, psi, grid_xa, steps, true);
}

GridField x_marginal(const GibbsFlow& flow_xa, int t_index) {
    if (!flow_xa.extended) throw FpkError("x_marginal: flow is not extended");
    const Grid& g = flow_xa.grid;
    Grid gx = Grid::make1d(g.lo[0], g.hi[0], g.n[0]);
    GridField out(gx);
    const GridField& mu = flow_xa.mu[static_cast<size_t>(t_index)];
    const double da = g.spacing(1);
    for (int i = 0; i < g.n[0]; ++i) {
        double s = 0.0;
        for (int j = 0; j < g.n[1]; ++j) {
            double w = (j == 0 || j == g.n[1] - 1) ? 0.5 : 1.0;
            s += w * mu(i, j);
        }
        out(i) = s * da;
    }
    return out;
}

std::vector<double> mean_potential(const GibbsFlow& flow, const ProblemConfig& config) {
    const Grid& g = flow.grid;
    const int state_dim = flow.extended ? 1 : config.dim;
    GridField pot(g);
    for (int idx = 0; idx < g.size(); ++idx) {
        double x[2];
        g.node(idx, x);
        pot.v[static_cast<size_t>(idx)] = config.potential.value(x, state_dim);
    }
    std::vector<double> out(flow.times.size());
    for (size_t k = 0; k < flow.times.size(); ++k) {
        double s = 0.0;
        for (int idx = 0; idx < g.size(); ++idx)
            s += g.quad_weight(idx) * pot.v[static_cast<size_t>(idx)] *
                 flow.mu[k].v[static_cast<size_t>(idx)];
        out[k] = s;
    }
    return out;
}

}  // namespace gibbsctrl
