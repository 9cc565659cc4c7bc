#include "gibbsctrl/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gibbsctrl {

Grid Grid::make1d(double lo, double hi, int points) {
    Grid g;
    g.dim = 1;
    g.lo = {lo, 0.0};
    g.hi = {hi, 0.0};
    g.n = {points, 1};
    g.validate();
    return g;
}

Grid Grid::make2d(double lo0, double hi0, int n0, double lo1, double hi1, int n1) {
    Grid g;
    g.dim = 2;
    g.lo = {lo0, lo1};
    g.hi = {hi0, hi1};
    g.n = {n0, n1};
    g.validate();
    return g;
}

void Grid::validate() const {
    if (dim < 1 || dim > 2) throw ConfigError("grid: dim must be 1 or 2");
    for (int a = 0; a < dim; ++a) {
        if (n[a] < 3) throw ConfigError("grid: need at least 3 points per axis");
        if (!(hi[a] > lo[a])) throw ConfigError("grid: upper bound must exceed lower");
    }
    if (dim == 1 && n[1] != 1) throw ConfigError("grid: 1-D grid must have n[1] == 1");
}

bool GridField::all_finite() const {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

GridField gradient_axis(const GridField& field, int axis) {
    const Grid& g = field.grid;
    GridField out(g);
    const double h = g.spacing(axis);
    const int n0 = g.n[0], n1 = g.n[1];
    auto stencil = [&](int i, int j, int di, int dj) {
        return field(i + di, j + dj);
    };
    for (int i = 0; i < n0; ++i) {
        for (int j = 0; j < n1; ++j) {
            int p = (axis == 0) ? i : j;
            int np = g.n[axis];
            int di = (axis == 0) ? 1 : 0, dj = 1 - di;
            double d;
            if (p == 0) {
                d = (-3.0 * stencil(i, j, 0, 0) + 4.0 * stencil(i, j, di, dj) -
                     stencil(i, j, 2 * di, 2 * dj)) /
                    (2.0 * h);
            } else if (p == np - 1) {
                d = (3.0 * stencil(i, j, 0, 0) - 4.0 * stencil(i, j, -di, -dj) +
                     stencil(i, j, -2 * di, -2 * dj)) /
                    (2.0 * h);
            } else {
                d = (stencil(i, j, di, dj) - stencil(i, j, -di, -dj)) / (2.0 * h);
            }
            out(i, j) = d;
        }
    }
    return out;
}

VectorField gradient(const GridField& field) {
    VectorField out;
    out[0] = gradient_axis(field, 0);
    if (field.grid.dim > 1) out[1] = gradient_axis(field, 1);
    return out;
}

GridField laplacian(const GridField& field) {
    const Grid& g = field.grid;
    GridField out(g);
    for (int axis = 0; axis < g.dim; ++axis) {
        const double h2 = g.spacing(axis) * g.spacing(axis);
        const int np = g.n[axis];
        int di = (axis == 0) ? 1 : 0, dj = 1 - di;
        for (int i = 0; i < g.n[0]; ++i) {
            for (int j = 0; j < g.n[1]; ++j) {
                int p = (axis == 0) ? i : j;
                double d2;
                if (p == 0) {
                    d2 = (field(i, j) - 2.0 * field(i + di, j + dj) +
                          field(i + 2 * di, j + 2 * dj)) /
                         h2;
                } else if (p == np - 1) {
                    d2 = (field(i, j) - 2.0 * field(i - di, j - dj) +
                          field(i - 2 * di, j - 2 * dj)) /
                         h2;
                } else {
                    d2 = (field(i + di, j + dj) - 2.0 * field(i, j) +
                          field(i - di, j - dj)) /
                         h2;
                }
                out(i, j) += d2;
            }
        }
    }
    return out;
}

double integrate(const GridField& field) {
    const Grid& g = field.grid;
    double s = 0.0;
    for (int idx = 0; idx < g.size(); ++idx) s += g.quad_weight(idx) * field.v[idx];
    return s;
}

double linf_norm(const GridField& field) {
    double m = 0.0;
    for (double x : field.v) m = std::max(m, std::fabs(x));
    return m;
}

double l1_distance(const GridField& a, const GridField& b) {
    if (!a.grid.same_mesh(b.grid)) throw ContractViolation("l1_distance: grid mismatch");
    double s = 0.0;
    for (int idx = 0; idx < a.grid.size(); ++idx)
        s += a.grid.quad_weight(idx) * std::fabs(a.v[idx] - b.v[idx]);
    return s;
}

double interpolate(const GridField& field, const double* x) {
    const Grid& g = field.grid;
    double f[2] = {0.0, 0.0};
    int i0[2] = {0, 0};
    for (int a = 0; a < g.dim; ++a) {
        double h = g.spacing(a);
        double s = (x[a] - g.lo[a]) / h;
        if (s <= 0.0) {
            i0[a] = 0;
            f[a] = 0.0;
        } else if (s >= g.n[a] - 1) {
            i0[a] = g.n[a] - 2;
            f[a] = 1.0;
        } else {
            i0[a] = static_cast<int>(s);
            f[a] = s - i0[a];
        }
    }
    if (g.dim == 1) {
        return (1.0 - f[0]) * field(i0[0]) + f[0] * field(i0[0] + 1);
    }
    double v00 = field(i0[0], i0[1]), v10 = field(i0[0] + 1, i0[1]);
    double v01 = field(i0[0], i0[1] + 1), v11 = field(i0[0] + 1, i0[1] + 1);
    return (1.0 - f[0]) * ((1.0 - f[1]) * v00 + f[1] * v01) +
           f[0] * ((1.0 - f[1]) * v10 + f[1] * v11);
}

std::vector<double> density_cdf_1d(const GridField& density) {
    const Grid& g = density.grid;
    if (g.dim != 1) throw ContractViolation("density_cdf_1d: 1-D only");
    const double h = g.spacing(0);
    std::vector<double> cdf(static_cast<size_t>(g.n[0]), 0.0);
    for (int i = 1; i < g.n[0]; ++i)
        cdf[i] = cdf[i - 1] + 0.5 * h * (density(i - 1) + density(i));
    return cdf;
}

namespace {

void check_density_pair(const GridField& mu, const GridField& nu) {
    if (!mu.grid.same_mesh(nu.grid))
        throw ContractViolation("wasserstein1_1d: grid mismatch");
    if (mu.grid.dim != 1) throw ContractViolation("wasserstein1_1d: 1-D only");
    for (double x : mu.v)
        if (x < 0.0) throw ContractViolation("wasserstein1_1d: negative density");
    for (double x : nu.v)
        if (x < 0.0) throw ContractViolation("wasserstein1_1d: negative density");
    double mm = integrate(mu), mn = integrate(nu);
    if (std::fabs(mm - 1.0) > 1e-6 || std::fabs(mn - 1.0) > 1e-6)
        throw ContractViolation("wasserstein1_1d: inputs must have unit mass (got " +
                                std::to_string(mm) + ", " + std::to_string(mn) + ")");
}

}  // namespace

double wasserstein1_1d(const GridField& mu, const GridField& nu) {
    check_density_pair(mu, nu);
    auto fm = density_cdf_1d(mu);
    auto fn = density_cdf_1d(nu);
    const double h = mu.grid.spacing(0);
    double w = 0.0;
    for (int i = 0; i + 1 < mu.grid.n[0]; ++i) {
        // |F - G| is piecewise linear between nodes; integrate exactly,
        // splitting at the interior sign change when there is one
        double a = fm[i] - fn[i];
        double b = fm[i + 1] - fn[i + 1];
        if (a * b >= 0.0) {
            w += 0.5 * h * (std::fabs(a) + std::fabs(b));
        } else {
            double frac = a / (a - b);  // root position in [0,1]
            w += 0.5 * h * (std::fabs(a) * frac + std::fabs(b) * (1.0 - frac));
        }
    }
    return w;
}

double wasserstein1_atoms_vs_density(std::vector<double> positions,
                                     std::vector<double> weights,
                                     const GridField& density) {
    const Grid& g = density.grid;
    if (g.dim != 1) throw ContractViolation("wasserstein1_atoms_vs_density: 1-D only");
    if (positions.size() != weights.size() || positions.empty())
        throw ContractViolation("wasserstein1_atoms_vs_density: bad sample");
    double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(wsum > 0.0)) throw ContractViolation("wasserstein1_atoms_vs_density: zero mass");

    std::vector<size_t> order(positions.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return positions[a] < positions[b]; });

    auto grid_cdf = density_cdf_1d(density);
    double grid_mass = grid_cdf.back();

    // merge atom positions and grid nodes; between breakpoints the grid CDF is
    // linear and the sample CDF constant, so the integral is exact
    double w1 = 0.0;
    size_t atom = 0;
    double sample_cdf = 0.0;
    // integration range covers both supports
    double x_left = std::min(g.lo[0], positions[order.front()]);
    double x_right = std::max(g.hi[0], positions[order.back()]);

    auto eval_grid_cdf = [&](double x) {
        if (x <= g.lo[0]) return 0.0;
        if (x >= g.hi[0]) return grid_mass;
        double s = (x - g.lo[0]) / g.spacing(0);
        int i = std::min(static_cast<int>(s), g.n[0] - 2);
        double f = s - i;
        // trapezoid CDF between nodes is quadratic; linear interpolation of the
        // node values is consistent with the density's O(h^2) resolution
        return (1.0 - f) * grid_cdf[static_cast<size_t>(i)] +
               f * grid_cdf[static_cast<size_t>(i) + 1];
    };

    // breakpoints: all grid nodes and all atoms, swept left to right
    std::vector<double> breaks;
    breaks.reserve(positions.size() + static_cast<size_t>(g.n[0]) + 2);
    breaks.push_back(x_left);
    {
        size_t ai = 0;
        int gi = 0;
        while (ai < order.size() || gi < g.n[0]) {
            double ax = ai < order.size() ? positions[order[ai]] : 1e308;
            double gx = gi < g.n[0] ? g.coord(0, gi) : 1e308;
            if (ax <= gx) {
                breaks.push_back(ax);
                ++ai;
            } else {
                breaks.push_back(gx);
                ++gi;
            }
        }
    }
    breaks.push_back(x_right);

    for (size_t b = 0; b + 1 < breaks.size(); ++b) {
        double xl = breaks[b], xr = breaks[b + 1];
        // advance the sample CDF past atoms at xl
        while (atom < order.size() && positions[order[atom]] <= xl) {
            sample_cdf += weights[order[atom]] / wsum;
            ++atom;
        }
        if (xr <= xl) continue;
        double a = eval_grid_cdf(xl) / grid_mass - sample_cdf;
        double c = eval_grid_cdf(xr) / grid_mass - sample_cdf;
        if (a * c >= 0.0) {
            w1 += 0.5 * (xr - xl) * (std::fabs(a) + std::fabs(c));
        } else {
            double frac = a / (a - c);
            w1 += 0.5 * (xr - xl) * (std::fabs(a) * frac + std::fabs(c) * (1.0 - frac));
        }
    }
    return w1;
}

std::array<double, 2> default_box_bounds(const ProblemConfig& config, int axis) {
    const Domain& d = config.potential.domain();
    double pad = 6.0 * config.sigma * std::sqrt(config.horizon) + config.potential.epsilon();
    double half = (d.kind == Domain::Kind::ball) ? d.radius : d.half_widths[axis];
    return {d.center[axis] - half - pad, d.center[axis] + half + pad};
}

Grid default_grid(const ProblemConfig& config, int points_per_axis) {
    auto b0 = default_box_bounds(config, 0);
    if (config.dim == 1) return Grid::make1d(b0[0], b0[1], points_per_axis);
    auto b1 = default_box_bounds(config, 1);
    return Grid::make2d(b0[0], b0[1], points_per_axis, b1[0], b1[1], points_per_axis);
}

GridField project_initial_measure(const ProblemConfig& config, const Grid& grid) {
    GridField out(grid);
    if (config.init.kind == InitialMeasure::Kind::point) {
        // multilinear splat preserves the first moment
        const double* x0 = config.init.mean.data();
        int i0[2] = {0, 0};
        double f[2] = {0.0, 0.0};
        for (int a = 0; a < grid.dim; ++a) {
            double s = (x0[a] - grid.lo[a]) / grid.spacing(a);
            s = std::clamp(s, 0.0, static_cast<double>(grid.n[a] - 1));
            i0[a] = std::min(static_cast<int>(s), grid.n[a] - 2);
            f[a] = s - i0[a];
        }
        if (grid.dim == 1) {
            out(i0[0]) = 1.0 - f[0];
            out(i0[0] + 1) = f[0];
        } else {
            out(i0[0], i0[1]) = (1.0 - f[0]) * (1.0 - f[1]);
            out(i0[0] + 1, i0[1]) = f[0] * (1.0 - f[1]);
            out(i0[0], i0[1] + 1) = (1.0 - f[0]) * f[1];
            out(i0[0] + 1, i0[1] + 1) = f[0] * f[1];
        }
    } else {
        for (int idx = 0; idx < grid.size(); ++idx) {
            double x[2];
            grid.node(idx, x);
            double q = 0.0;
            for (int a = 0; a < grid.dim; ++a) {
                double z = (x[a] - config.init.mean[a]) / config.init.stddev[a];
                q += z * z;
            }
            out.v[static_cast<size_t>(idx)] = std::exp(-0.5 * q);
        }
    }
    double mass = integrate(out);
    if (!(mass > 0.0)) throw ContractViolation("initial measure projects to zero mass");
    for (double& x : out.v) x /= mass;
    return out;
}

}  // namespace gibbsctrl
