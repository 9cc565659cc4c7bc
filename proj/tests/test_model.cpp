#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "gibbsctrl/rng.hpp"

using namespace gctest;

TEST_CASE("soft potential: inside, ramp midpoint, exact hand values") {
    ProblemConfig cfg = bench();
    Potential v = build_soft_potential(cfg);

    double x = 0.0;
    CHECK(v.value(&x, 1) == 0.0);

    // d(x,D) = eps/2 with amplitude 4 -> V = 2
    Domain d;
    d.kind = Domain::Kind::ball;
    d.center = {0.0, 0.0};
    d.radius = 1.0;
    Potential v4(d, 0.1, 4.0);
    x = 1.05;
    CHECK(v4.value(&x, 1) == doctest::Approx(2.0).epsilon(1e-12));

    // D=[-1,1], eps=0.1, n=5: x=1.05 -> 2.5, x=1.2 -> 5
    Potential v5(d, 0.1, 5.0);
    x = 1.05;
    CHECK(v5.value(&x, 1) == doctest::Approx(2.5).epsilon(1e-12));
    x = 1.2;
    CHECK(v5.value(&x, 1) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("potential invariants: range, Lipschitz, amplitude linearity") {
    Domain d;
    d.kind = Domain::Kind::ball;
    d.center = {0.25, 0.0};
    d.radius = 0.8;
    Potential v1(d, 0.15, 1.0);
    Potential v2(d, 0.15, 2.0);

    RngStream rng(42);
    for (int trial = 0; trial < 500; ++trial) {
        double x = -3.0 + 6.0 * rng.next_uniform();
        double y = -3.0 + 6.0 * rng.next_uniform();
        double vx = v1.value(&x, 1), vy = v1.value(&y, 1);
        CHECK(vx >= 0.0);
        CHECK(vx <= 1.0);
        CHECK(std::fabs(vx - vy) <= (1.0 / 0.15) * std::fabs(x - y) + 1e-12);
        // doubling the amplitude doubles V pointwise
        CHECK(v2.value(&x, 1) == doctest::Approx(2.0 * vx).epsilon(1e-12));
    }
    double inside = 0.5;
    CHECK(v2.value(&inside, 1) == 0.0);
}

TEST_CASE("smooth ramp variant stays within range and hits the midpoint") {
    Domain d;
    d.kind = Domain::Kind::ball;
    d.center = {0.0, 0.0};
    d.radius = 1.0;
    Potential smooth(d, 0.1, 1.0, true);
    double x = 1.05;  // ramp midpoint
    CHECK(smooth.value(&x, 1) == doctest::Approx(0.5).epsilon(1e-12));
    x = 1.2;
    CHECK(smooth.value(&x, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(smooth.lipschitz() == doctest::Approx(15.0));
}

TEST_CASE("box domain distance") {
    Domain d;
    d.kind = Domain::Kind::box;
    d.center = {0.0, 0.0};
    d.half_widths = {1.0, 2.0};
    double in[2] = {0.5, -1.5};
    CHECK(d.distance(in, 2) == 0.0);
    double side[2] = {1.5, 0.0};
    CHECK(d.distance(side, 2) == doctest::Approx(0.5));
    double corner[2] = {2.0, 3.0};
    CHECK(d.distance(corner, 2) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("eval_costs: target point, quadratic control, terminal distance") {
    ProblemConfig cfg = bench();

    double x = 0.0, a0 = 0.0;
    CostSample at_target = eval_costs(cfg, &x, &a0);
    CHECK(at_target.running == 0.0);
    CHECK(at_target.terminal == 0.0);

    ProblemConfig cfg2 = bench();
    cfg2.dim = 2;
    cfg2.costs.target = {0.0, 0.0};
    cfg2.costs.terminal_cost = abs_distance_field(cfg2.costs.target);
    double x2[2] = {0.0, 0.0};
    double alpha[2] = {3.0, 4.0};
    CHECK(eval_costs(cfg2, x2, alpha).running == doctest::Approx(12.5));

    // terminal g(x) = |x - 0| at x = -1.25
    double xm = -1.25;
    CHECK(eval_costs(cfg, &xm, &a0).terminal == doctest::Approx(1.25));
}

TEST_CASE("configuration errors") {
    Domain d;
    CHECK_THROWS_AS(Potential(d, 0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(Potential(d, -0.5, 1.0), ConfigError);
    CHECK_THROWS_AS(Potential(d, 0.1, -1.0), ConfigError);
    ProblemConfig bad = bench();
    bad.horizon = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("action set projection") {
    ActionSet box;
    box.whole_space = false;
    box.lo = {-1.0, -1.0};
    box.hi = {1.0, 1.0};
    double a[2] = {5.0, -0.25};
    box.project(a, 2);
    CHECK(a[0] == 1.0);
    CHECK(a[1] == -0.25);
}

TEST_CASE("potential gradient matches finite differences away from kinks") {
    Domain d;
    d.kind = Domain::Kind::ball;
    d.center = {0.0, 0.0};
    d.radius = 1.0;
    for (bool smooth : {false, true}) {
        Potential v(d, 0.2, 3.0, smooth);
        for (double x : {1.05, 1.1, 1.15, -1.07}) {
            double g;
            v.gradient(&x, 1, &g);
            double h = 1e-7;
            double xp = x + h, xm = x - h;
            double fd = (v.value(&xp, 1) - v.value(&xm, 1)) / (2.0 * h);
            CHECK(g == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}
