#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "gibbsctrl/fpk.hpp"
#include "gibbsctrl/hjb.hpp"
#include "oracles.hpp"

using namespace gctest;

namespace {

ProblemConfig no_potential(ProblemConfig cfg) {
    cfg.potential = Potential(cfg.potential.domain(), cfg.potential.epsilon(), 0.0);
    return cfg;
}

ProblemConfig constant_potential(ProblemConfig cfg, double c) {
    Domain far;
    far.kind = Domain::Kind::ball;
    far.center = {1e5, 0.0};
    far.radius = 1.0;
    cfg.potential = Potential(far, 1e4, c);
    return cfg;
}

}  // namespace

TEST_CASE("oracle self-check: quadrature matches the erfc closed form for g=|x|") {
    double T = 1.0, sigma = 1.0;
    auto g = [](double y) { return std::fabs(y); };
    for (double t : {0.0, 0.4, 0.9}) {
        for (double x : {-2.0, -0.3, 0.0, 1.7}) {
            double via_quad = hopfcole_quadrature_u(t, x, T, sigma, g, {0.0});
            double s = sigma * std::sqrt(T - t);
            double closed = -std::log(exp_abs_gaussian_integral(x, s));
            CHECK(via_quad == doctest::Approx(closed).epsilon(1e-10));
        }
    }
}

TEST_CASE("solve_linear_hopfcole: constant terminal cost is reproduced exactly (V=0)") {
    ProblemConfig cfg = no_potential(bench());
    cfg.costs.terminal_cost = constant_field(0.7);
    Grid g = coarse_grid(cfg);
    ZeroControl ctrl(1);
    GibbsFlow flow = solve_fpk(cfg, ctrl, g, 100);
    std::vector<double> frozen(flow.times.size(), 0.7);
    ValueField vf = solve_linear_hopfcole(flow, frozen, cfg);
    for (const GridField& u : vf.u)
        for (double v : u.v) CHECK(v == doctest::Approx(0.7).epsilon(1e-10));
}

TEST_CASE("solve_linear_hopfcole: linear terminal cost closed form") {
    // g(x) = x: u(t,x) = x - sigma^2 (T-t)/2 from w = E exp(-x - sigma W)
    ProblemConfig cfg = no_potential(bench());
    cfg.sigma = 1.3;
    cfg.init.kind = InitialMeasure::Kind::gaussian;
    cfg.init.mean = {0.0, 0.0};
    cfg.init.stddev = {0.5, 0.5};
    cfg.costs.terminal_cost = ScalarField{
        [](const double* x, int) { return x[0]; },
        [](const double*, int, double* out) { out[0] = 1.0; }};
    Grid g = Grid::make1d(-4.0, 4.0, 401);
    ZeroControl ctrl(1);
    GibbsFlow flow = solve_fpk(cfg, ctrl, g, 200);
    ValueField vf = solve_hjb_nonlocal(flow, cfg);
    double worst = 0.0;
    for (size_t k = 0; k < vf.times.size(); ++k) {
        double shift = 0.5 * cfg.sigma * cfg.sigma * (cfg.horizon - vf.times[k]);
        for (int i = 0; i < g.n[0]; ++i)
            worst = std::max(worst,
                             std::fabs(vf.u[k](i) - (g.coord(0, i) - shift)));
    }
    CHECK(worst <= 1e-3);
}

TEST_CASE("solve_hjb_nonlocal: V=0 equals the linear solve and the quadrature oracle") {
    ProblemConfig cfg = no_potential(bench());
    Grid g = coarse_grid(cfg);  // dx = 0.05
    ZeroControl ctrl(1);
    GibbsFlow flow = solve_fpk(cfg, ctrl, g, 400);
    ValueField vf = solve_hjb_nonlocal(flow, cfg);
    CHECK(vf.picard_residuals.size() == 1);  // one sweep when V = 0

    std::vector<double> frozen(flow.times.size(), bracket(flow.mu.back(),
                                                          terminal_cost_field(cfg, g)));
    ValueField lin = solve_linear_hopfcole(flow, frozen, cfg);
    double diff = 0.0;
    for (size_t k = 0; k < vf.u.size(); ++k)
        for (size_t i = 0; i < vf.u[k].v.size(); ++i)
            diff = std::max(diff, std::fabs(vf.u[k].v[i] - lin.u[k].v[i]));
    CHECK(diff == 0.0);

    auto gfun = [&](double y) { return std::fabs(y); };
    for (size_t k : {size_t(0), size_t(100), size_t(250), size_t(399)}) {
        double t = vf.times[k];
        for (int i = 0; i < g.n[0]; i += 8) {
            double expected = hopfcole_quadrature_u(t, g.coord(0, i), cfg.horizon,
                                                    cfg.sigma, gfun, {0.0});
            CHECK(vf.u[k](i) == doctest::Approx(expected).epsilon(2e-3 / std::max(1.0, expected)));
        }
    }
}

TEST_CASE("solve_hjb_nonlocal: constant potential reduces to a scalar companion ODE") {
    const double c = 0.8;
    ProblemConfig cfg0 = constant_potential(bench(), 0.0);
    ProblemConfig cfgc = constant_potential(bench(), c);
    Grid g = Grid::make1d(-7.1, 7.1, 285);
    ZeroControl ctrl(1);
    const int K = 1000;
    GibbsFlow flow0 = solve_fpk(cfg0, ctrl, g, K);
    GibbsFlow flowc = solve_fpk(cfgc, ctrl, g, K);

    ValueField u0 = solve_hjb_nonlocal(flow0, cfg0);
    ValueField uc = solve_hjb_nonlocal(flowc, cfgc);

    // the two zero-order terms reduce to +c <mu_t, u_t>: u_c - u_0 is the
    // x-independent solution of h'(t) = -c (q(t) + h(t)), h(T) = 0
    std::vector<double> q(u0.times.size());
    for (size_t k = 0; k < q.size(); ++k) q[k] = bracket(flow0.mu[k], u0.u[k]);
    std::vector<double> h = backward_euler_companion(u0.times, q, c, 10000);

    double worst = 0.0;
    for (size_t k = 0; k < u0.times.size(); ++k) {
        for (size_t i = 0; i < u0.u[k].v.size(); ++i)
            worst = std::max(worst, std::fabs(uc.u[k].v[i] - u0.u[k].v[i] - h[k]));
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("solve_hjb_nonlocal: Picard residuals decrease on the default benchmark") {
    ProblemConfig cfg = bench();
    Grid g = coarse_grid(cfg);
    ZeroControl ctrl(1);
    GibbsFlow flow = solve_fpk(cfg, ctrl, g, 200);
    ValueField vf = solve_hjb_nonlocal(flow, cfg);
    REQUIRE(vf.picard_residuals.size() >= 4);
    for (size_t i = 3; i < vf.picard_residuals.size(); ++i)
        CHECK(vf.picard_residuals[i] <= vf.picard_residuals[i - 1] + 1e-15);
    CHECK(vf.picard_rate < 1.0);
}

TEST_CASE("hopf-cole consistency, exact terminal condition, comparison monotonicity") {
    ProblemConfig cfg = bench();
    Grid g = coarse_grid(cfg, 143);
    ZeroControl ctrl(1);
    GibbsFlow flow = solve_fpk(cfg, ctrl, g, 100);
    ValueField vf = solve_hjb_nonlocal(flow, cfg);

    for (size_t k = 0; k < vf.u.size(); ++k)
        for (size_t i = 0; i < vf.u[k].v.size(); ++i) {
            CHECK(vf.w[k].v[i] > 0.0);
            CHECK(-std::log(vf.w[k].v[i]) == doctest::Approx(vf.u[k].v[i]).epsilon(1e-12));
        }

    GridField gterm = terminal_cost_field(cfg, g);
    for (size_t i = 0; i < gterm.v.size(); ++i)
        CHECK(vf.u.back().v[i] == gterm.v[i]);

    ProblemConfig up = cfg;
    ScalarField base = cfg.costs.terminal_cost;
    up.costs.terminal_cost = ScalarField{
        [base](const double* x, int d) { return base(x, d) + 0.1; }, base.gradient};
    ValueField vf_up = solve_hjb_nonlocal(flow, up);
    for (size_t k = 0; k < vf.u.size(); ++k)
        for (size_t i = 0; i < vf.u[k].v.size(); ++i)
            CHECK(vf_up.u[k].v[i] >= vf.u[k].v[i] - 1e-10);
}

TEST_CASE("apriori_bounds: pass on the benchmark, trip on a scaled field") {
    ProblemConfig cfg = bench();
    Grid g = coarse_grid(cfg);
    ZeroControl ctrl(1);
    GibbsFlow flow = solve_fpk(cfg, ctrl, g, 200);
    ValueField vf = solve_hjb_nonlocal(flow, cfg);

    AprioriReport rep = apriori_bounds(vf, flow, cfg);
    CHECK(rep.all_weak);
    CHECK(rep.all_strong);
    CHECK(rep.all_smooth);

    ValueField scaled = vf;
    for (auto& u : scaled.u)
        for (double& v : u.v) v *= 10.0;
    AprioriReport bad = apriori_bounds(scaled, flow, cfg);
    CHECK_FALSE(bad.all_ok());
}

TEST_CASE("apriori_bounds: zero data saturates nothing") {
    ProblemConfig cfg = no_potential(bench());
    cfg.costs.terminal_cost = constant_field(0.0);
    Grid g = coarse_grid(cfg, 143);
    ZeroControl ctrl(1);
    GibbsFlow flow = solve_fpk(cfg, ctrl, g, 100);
    ValueField vf = solve_hjb_nonlocal(flow, cfg);
    for (const GridField& u : vf.u) CHECK(linf_norm(u) <= 1e-12);
    AprioriReport rep = apriori_bounds(vf, flow, cfg);
    CHECK(rep.all_ok());
    for (const auto& row : rep.rows) CHECK(row.weak_bound > 0.0);
}

TEST_CASE("solve_hjb_extended: V=0 matches the Markovian solve and ignores a") {
    ProblemConfig cfg = no_potential(bench());
    Grid gxa = Grid::make2d(-7.1, 7.1, 143, 0.0, 1.0, 21);
    Grid gx = Grid::make1d(-7.1, 7.1, 143);
    ZeroControl ctrl(1);
    GibbsFlow fxa = solve_fpk_extended(cfg, ctrl, gxa, 150);
    GibbsFlow fx = solve_fpk(cfg, ctrl, gx, 150);
    ValueField ue = solve_hjb_extended(fxa, cfg);
    ValueField um = solve_hjb_nonlocal(fx, cfg);
    double worst_a = 0.0, worst_m = 0.0;
    for (size_t k = 0; k < ue.u.size(); ++k) {
        for (int i = 0; i < gxa.n[0]; ++i) {
            for (int j = 0; j < gxa.n[1]; ++j)
                worst_a = std::max(worst_a, std::fabs(ue.u[k](i, j) - ue.u[k](i, 0)));
            worst_m = std::max(worst_m, std::fabs(ue.u[k](i, 0) - um.u[k](i)));
        }
    }
    CHECK(worst_a <= 1e-12);
    CHECK(worst_m <= 1e-10);
}

TEST_CASE("solve_hjb_extended: constant terminal cost follows the killing exponential") {
    const double c = 0.5, gc = 0.9;
    ProblemConfig cfg = constant_potential(bench(), c);
    cfg.costs.terminal_cost = constant_field(gc);
    Grid gxa = Grid::make2d(-7.1, 7.1, 97, 0.0, 0.55, 23);
    ZeroControl ctrl(1);
    const int K = 400;
    GibbsFlow fxa = solve_fpk_extended(cfg, ctrl, gxa, K);
    ValueField vf = solve_hjb_extended(fxa, cfg);

    // discrete zero-order identity: -(V - <mu,V>) gc + V <mu, gc> = gc <mu, V>
    std::vector<double> mv = mean_potential(fxa, cfg);
    for (size_t k : {size_t(0), size_t(K / 2), size_t(K)}) {
        GridField cfield(gxa);
        for (double& v : cfield.v) v = gc;
        double bracket_c = bracket(fxa.mu[k], cfield);
        for (int i = 0; i < gxa.n[0]; i += 16) {
            double x = gxa.coord(0, i);
            double V = cfg.potential.value(&x, 1);
            double lhs = -(V - mv[k]) * gc + V * bracket_c;
            CHECK(lhs == doctest::Approx(gc * mv[k]).epsilon(1e-10));
        }
    }

    // exact x-constant solution: u(t) = gc * exp(int_t^T <mu_s, V> ds)
    for (size_t k : {size_t(0), size_t(K / 4), size_t(K / 2)}) {
        double integral = 0.0;
        double dt = cfg.horizon / K;
        for (size_t j = k; j < static_cast<size_t>(K); ++j)
            integral += 0.5 * dt * (mv[j] + mv[j + 1]);
        double expected = gc * std::exp(integral);
        for (int i = 0; i < gxa.n[0]; i += 24)
            for (int j = 0; j < gxa.n[1]; j += 11)
                CHECK(vf.u[k](i, j) == doctest::Approx(expected).epsilon(1e-4));
    }
}

TEST_CASE("solve_hjb_extended: a-range stays below the truncation error (default)") {
    ProblemConfig cfg = bench();
    Grid gxa = Grid::make2d(-7.1, 7.1, 143, 0.0, 1.0, 21);
    ZeroControl ctrl(1);
    GibbsFlow fxa = solve_fpk_extended(cfg, ctrl, gxa, 150);
    ValueField ue = solve_hjb_extended(fxa, cfg);

    // spatial truncation proxy: Markovian solve at full vs half resolution
    Grid gx = Grid::make1d(-7.1, 7.1, 143);
    Grid gx2 = Grid::make1d(-7.1, 7.1, 72);
    ZeroControl c1(1);
    GibbsFlow f1 = solve_fpk(cfg, c1, gx, 150);
    GibbsFlow f2 = solve_fpk(cfg, c1, gx2, 150);
    ValueField u1 = solve_hjb_nonlocal(f1, cfg);
    ValueField u2 = solve_hjb_nonlocal(f2, cfg);
    double trunc = 0.0;
    for (size_t k = 0; k < u1.times.size(); k += 10) {
        for (int i = 0; i < gx.n[0]; ++i) {
            double x = gx.coord(0, i);
            trunc = std::max(trunc, std::fabs(u1.u[k](i) - interpolate(u2.u[k], &x)));
        }
    }
    double arange = 0.0;
    for (size_t k = 0; k < ue.u.size(); ++k)
        for (int i = 0; i < gxa.n[0]; ++i)
            for (int j = 0; j < gxa.n[1]; ++j)
                arange = std::max(arange, std::fabs(ue.u[k](i, j) - ue.u[k](i, 0)));
    CHECK(arange <= 10.0 * trunc);
}
