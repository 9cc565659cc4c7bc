#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "gibbsctrl/model.hpp"

namespace gibbsctrl {

struct ContractViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Uniform tensor grid on a truncated box, d in {1,2}.
// Storage is row-major with axis 0 outermost: index(i,j) = i*n[1] + j.
struct Grid {
    int dim = 1;
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{1.0, 0.0};
    std::array<int, 2> n{2, 1};

    static Grid make1d(double lo, double hi, int points);
    static Grid make2d(double lo0, double hi0, int n0, double lo1, double hi1, int n1);

    double spacing(int axis) const { return (hi[axis] - lo[axis]) / (n[axis] - 1); }
    int size() const { return n[0] * n[1]; }
    int index(int i, int j = 0) const { return i * n[1] + j; }
    double coord(int axis, int i) const { return lo[axis] + i * spacing(axis); }
    void node(int idx, double* x) const {
        x[0] = coord(0, idx / n[1]);
        if (dim > 1) x[1] = coord(1, idx % n[1]);
    }
    // trapezoid quadrature weight of a node (product over axes)
    double quad_weight(int idx) const {
        int i = idx / n[1], j = idx % n[1];
        double w = spacing(0) * ((i == 0 || i == n[0] - 1) ? 0.5 : 1.0);
        if (dim > 1) w *= spacing(1) * ((j == 0 || j == n[1] - 1) ? 0.5 : 1.0);
        return w;
    }
    bool same_mesh(const Grid& o) const {
        return dim == o.dim && lo == o.lo && hi == o.hi && n == o.n;
    }
    void validate() const;
};

struct GridField {
    Grid grid;
    std::vector<double> v;

    GridField() = default;
    explicit GridField(const Grid& g, double fill = 0.0)
        : grid(g), v(static_cast<size_t>(g.size()), fill) {}

    double& operator()(int i, int j = 0) { return v[static_cast<size_t>(grid.index(i, j))]; }
    double operator()(int i, int j = 0) const { return v[static_cast<size_t>(grid.index(i, j))]; }
    bool all_finite() const;
};

// one field per axis
using VectorField = std::array<GridField, 2>;

// central differences interior, one-sided second order at the boundary
VectorField gradient(const GridField& field);
GridField gradient_axis(const GridField& field, int axis);

// 3-point (1-D) / 5-point (2-D) stencil; boundary rows use the one-sided
// second difference (callers impose their own boundary handling)
GridField laplacian(const GridField& field);

// trapezoidal rule over the box
double integrate(const GridField& field);

double linf_norm(const GridField& field);
double l1_distance(const GridField& a, const GridField& b);  // integral |a-b|

// multilinear interpolation with constant extrapolation outside the box
double interpolate(const GridField& field, const double* x);

// W1 = int |F_mu - F_nu| between two grid densities, 1-D only.
// Both inputs must be nonnegative and integrate to 1 +- 1e-6.
double wasserstein1_1d(const GridField& mu, const GridField& nu);

// CDF of a 1-D grid density at the nodes (trapezoid accumulation)
std::vector<double> density_cdf_1d(const GridField& density);

// W1 between a weighted atomic sample and a 1-D grid density (shared CDF
// routine; the grid CDF is piecewise linear, the sample CDF a step function)
double wasserstein1_atoms_vs_density(std::vector<double> positions,
                                     std::vector<double> weights,
                                     const GridField& density);

// evaluation box: domain D inflated by 6*sigma*sqrt(T) + epsilon
Grid default_grid(const ProblemConfig& config, int points_per_axis);
std::array<double, 2> default_box_bounds(const ProblemConfig& config, int axis);

// initial measure projected on the grid (multilinear splat for point masses,
// normalized density samples for Gaussians)
GridField project_initial_measure(const ProblemConfig& config, const Grid& grid);

}  // namespace gibbsctrl
