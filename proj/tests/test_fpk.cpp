#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "gibbsctrl/fpk.hpp"

using namespace gctest;

namespace {

VectorField zero_drift(const Grid& g) {
    VectorField d;
    for (int a = 0; a < g.dim; ++a) d[static_cast<size_t>(a)] = GridField(g);
    return d;
}

}  // namespace

TEST_CASE("step_gamma: heat kernel widening of a gaussian") {
    Grid g = Grid::make1d(-8.0, 8.0, 801);
    double s2 = 0.25;
    GridField gamma = gaussian_density_1d(g, 0.0, s2);
    GridField v(g);
    double dt = 1e-3;
    double sigma = 1.0;
    double t_total = 0.1;
    int steps = static_cast<int>(t_total / dt);
    for (int k = 0; k < steps; ++k) gamma = step_gamma(gamma, zero_drift(g), v, dt, sigma);
    GridField expected = gaussian_density_1d(g, 0.0, s2 + sigma * sigma * t_total);
    CHECK(l1_distance(gamma, expected) <= 5e-4);
}

TEST_CASE("step_gamma: reaction factor is exact") {
    Grid g = Grid::make1d(-8.0, 8.0, 401);
    GridField gamma = gaussian_density_1d(g, 0.0, 0.25);
    GridField v0(g);
    GridField vc(g);
    double c = 0.7, dt = 1e-3;
    for (double& x : vc.v) x = c;
    GridField with_v = step_gamma(gamma, zero_drift(g), vc, dt, 1.0);
    GridField without = step_gamma(gamma, zero_drift(g), v0, dt, 1.0);
    double ratio = integrate(with_v) / integrate(without);
    CHECK(ratio == doctest::Approx(std::exp(-c * dt)).epsilon(1e-10));
}

TEST_CASE("step_gamma: zero field stays zero; CFL rejection") {
    Grid g = Grid::make1d(-2.0, 2.0, 101);
    GridField zero(g);
    GridField v(g);
    GridField out = step_gamma(zero, zero_drift(g), v, 1e-3, 1.0);
    CHECK(linf_norm(out) == 0.0);

    VectorField fast = zero_drift(g);
    for (double& d : fast[0].v) d = 100.0;  // dx = 0.04, dt = 1e-3 -> CFL 2.5
    CHECK_THROWS_AS(step_gamma(zero, fast, v, 1e-3, 1.0), FpkError);
}

TEST_CASE("solve_fpk: constant potential leaves the conditioned flow invariant") {
    ProblemConfig cfg = bench();
    cfg.init.kind = InitialMeasure::Kind::gaussian;
    cfg.init.mean = {-1.0, 0.0};
    cfg.init.stddev = {0.3, 0.3};
    Grid g = coarse_grid(cfg);
    ZeroControl ctrl(1);

    ProblemConfig cfg0 = cfg;
    Domain dom = cfg.potential.domain();
    dom.radius = 1e6;  // V = 0 everywhere on the box
    cfg0.potential = Potential(dom, cfg.potential.epsilon(), 1.0);

    ProblemConfig cfgc = cfg0;  // V = c via constant shift: huge domain, then amp 0 vs ...
    // V identically 0 vs V identically 1: build via amplitude-0 potential and a
    // potential whose domain excludes the whole box
    Domain far;
    far.kind = Domain::Kind::ball;
    far.center = {1e5, 0.0};
    far.radius = 1.0;
    cfgc.potential = Potential(far, 1e4, 1.0);  // ramp covers the whole box? no:
    // distance from the box to `far` is ~1e5 >> eps: V = amplitude = 1 on the box
    GibbsFlow f0 = solve_fpk(cfg0, ctrl, g, 200);
    GibbsFlow fc = solve_fpk(cfgc, ctrl, g, 200);
    double worst = 0.0;
    for (size_t k = 0; k < f0.mu.size(); ++k)
        worst = std::max(worst, l1_distance(f0.mu[k], fc.mu[k]));
    CHECK(worst <= 1e-8);

    // mass log decays at rate c = 1 for the constant potential
    CHECK(fc.log_mass.back() == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(std::fabs(f0.log_mass.back()) <= 1e-7);  // left tail absorption at 5.8 sigma
}

TEST_CASE("solve_fpk: heat solution for control 0, V = 0") {
    ProblemConfig cfg = bench();
    cfg.init.kind = InitialMeasure::Kind::gaussian;
    cfg.init.mean = {0.0, 0.0};
    cfg.init.stddev = {0.05, 0.05};  // near-delta start
    Domain dom = cfg.potential.domain();
    dom.radius = 1e6;
    cfg.potential = Potential(dom, 0.1, 1.0);
    Grid g = Grid::make1d(-8.0, 8.0, 801);
    ZeroControl ctrl(1);
    GibbsFlow flow = solve_fpk(cfg, ctrl, g, 500);
    GridField expected = gaussian_density_1d(g, 0.0, 0.05 * 0.05 + 1.0);
    CHECK(l1_distance(flow.terminal(), expected) <= 5e-3);
}

TEST_CASE("solve_fpk invariants: mass, positivity, monotone log-mass, mass rate") {
    ProblemConfig cfg = bench();
    Grid g = coarse_grid(cfg);
    ZeroControl ctrl(1);
    GibbsFlow flow = solve_fpk(cfg, ctrl, g, 300);
    std::vector<double> mv = mean_potential(flow, cfg);
    for (size_t k = 0; k < flow.mu.size(); ++k) {
        CHECK(integrate(flow.mu[k]) == doctest::Approx(1.0).epsilon(1e-6));
        double min_v = 0.0;
        for (double x : flow.mu[k].v) min_v = std::min(min_v, x);
        CHECK(min_v >= -1e-12);
        if (k > 0) CHECK(flow.log_mass[k] <= flow.log_mass[k - 1] + 1e-12);
    }
    // d/dt log mass ~ -<mu_t, V> within O(dt)
    double dt = flow.dt();
    for (size_t k = 10; k + 10 < flow.mu.size(); k += 25) {
        double rate = (flow.log_mass[k + 1] - flow.log_mass[k]) / dt;
        CHECK(rate == doctest::Approx(-mv[k]).epsilon(0.05));
    }
}

TEST_CASE("solve_fpk: drifted flow transports the mean") {
    // constant drift 0.8, no potential: mean moves to x0 + 0.8 T
    ProblemConfig cfg = bench();
    Domain dom = cfg.potential.domain();
    dom.radius = 1e6;
    cfg.potential = Potential(dom, 0.1, 1.0);
    cfg.init.kind = InitialMeasure::Kind::gaussian;
    cfg.init.mean = {-1.0, 0.0};
    cfg.init.stddev = {0.2, 0.2};
    Grid g = Grid::make1d(-9.0, 9.0, 901);
    FunctionControl ctrl(1, false, [](double, const double*, double, double* a) { a[0] = 0.8; });
    GibbsFlow flow = solve_fpk(cfg, ctrl, g, 400);
    double mean = 0.0;
    for (int i = 0; i < g.size(); ++i)
        mean += g.quad_weight(i) * flow.terminal().v[static_cast<size_t>(i)] * g.coord(0, i);
    CHECK(mean == doctest::Approx(-0.2).epsilon(0.05));
}

TEST_CASE("solve_fpk_extended: V = 0 keeps the a-marginal at the initial plane") {
    ProblemConfig cfg = bench();
    Domain dom = cfg.potential.domain();
    dom.radius = 1e6;
    cfg.potential = Potential(dom, 0.1, 1.0);
    Grid gxa = Grid::make2d(-7.1, 7.1, 143, 0.0, 1.0, 21);
    ZeroControl ctrl(1);
    GibbsFlow flow = solve_fpk_extended(cfg, ctrl, gxa, 200);
    // all mass stays in the a = 0 plane
    const GridField& muT = flow.terminal();
    double off_plane = 0.0;
    for (int i = 0; i < gxa.n[0]; ++i)
        for (int j = 1; j < gxa.n[1]; ++j) off_plane += std::fabs(muT(i, j));
    CHECK(off_plane == 0.0);

    // x-marginal matches the Markovian solve
    ProblemConfig cfg1 = cfg;
    Grid gx = Grid::make1d(-7.1, 7.1, 143);
    GibbsFlow mflow = solve_fpk(cfg1, ctrl, gx, 200);
    CHECK(l1_distance(x_marginal(flow, flow.steps()), mflow.terminal()) <= 1e-8);
}

TEST_CASE("solve_fpk_extended: constant potential transports a at speed c") {
    ProblemConfig cfg = bench();
    Domain far;
    far.kind = Domain::Kind::ball;
    far.center = {1e5, 0.0};
    far.radius = 1.0;
    double c = 0.6;
    cfg.potential = Potential(far, 1e4, c);  // V = c on the whole box
    Grid gxa = Grid::make2d(-7.1, 7.1, 143, 0.0, 0.7, 141);  // da = 0.005
    ZeroControl ctrl(1);
    GibbsFlow flow = solve_fpk_extended(cfg, ctrl, gxa, 700);
    // a-centroid at time t sits at c*t up to the cell size
    for (int k : {175, 350, 700}) {
        const GridField& mu = flow.mu[static_cast<size_t>(k)];
        double num = 0.0, den = 0.0;
        for (int i = 0; i < gxa.n[0]; ++i)
            for (int j = 0; j < gxa.n[1]; ++j) {
                double w = gxa.quad_weight(gxa.index(i, j)) * mu(i, j);
                num += w * gxa.coord(1, j);
                den += w;
            }
        double t = flow.times[static_cast<size_t>(k)];
        CHECK(num / den == doctest::Approx(c * t).epsilon(0.05));
    }
}

TEST_CASE("solve_fpk_extended: a-independent control reproduces the x-marginal") {
    ProblemConfig cfg = bench();
    Grid gxa = Grid::make2d(-7.1, 7.1, 143, 0.0, 1.25, 101);
    Grid gx = Grid::make1d(-7.1, 7.1, 143);
    FunctionControl psi(1, true, [](double t, const double* x, double, double* a) {
        a[0] = -0.5 * x[0] + 0.1 * t;
    });
    FunctionControl phi(1, false, [](double t, const double* x, double, double* a) {
        a[0] = -0.5 * x[0] + 0.1 * t;
    });
    GibbsFlow fxa = solve_fpk_extended(cfg, psi, gxa, 200);
    GibbsFlow fx = solve_fpk(cfg, phi, gx, 200);

    // spatial truncation error proxy: same solve at half resolution
    Grid gx2 = Grid::make1d(-7.1, 7.1, 72);
    GibbsFlow fx2 = solve_fpk(cfg, phi, gx2, 200);
    GridField coarse_on_fine(gx);
    for (int i = 0; i < gx.size(); ++i) {
        double x = gx.coord(0, i);
        coarse_on_fine.v[static_cast<size_t>(i)] = interpolate(fx2.terminal(), &x);
    }
    double trunc = l1_distance(fx.terminal(), coarse_on_fine);
    double marg = l1_distance(x_marginal(fxa, fxa.steps()), fx.terminal());
    CHECK(marg <= 2.0 * trunc + 1e-12);
}

TEST_CASE("solve_fpk: mass underflow raises") {
    ProblemConfig cfg = bench();
    Domain far;
    far.kind = Domain::Kind::ball;
    far.center = {1e5, 0.0};
    far.radius = 1.0;
    cfg.potential = Potential(far, 1e4, 800.0);  // exp(-800) per unit time everywhere
    Grid g = coarse_grid(cfg);
    ZeroControl ctrl(1);
    CHECK_THROWS_AS(solve_fpk(cfg, ctrl, g, 100), FpkError);
}
