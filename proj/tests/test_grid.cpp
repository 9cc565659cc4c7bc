#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "gibbsctrl/rng.hpp"

using namespace gctest;

TEST_CASE("grid spacing consistency") {
    Grid g = Grid::make1d(-7.1, 7.1, 1421);
    CHECK(g.spacing(0) == doctest::Approx(0.01).epsilon(1e-12));
    Grid g2 = Grid::make2d(-1.0, 1.0, 101, 0.0, 2.0, 51);
    CHECK(g2.spacing(0) == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(g2.spacing(1) == doctest::Approx(0.04).epsilon(1e-12));
    CHECK_THROWS_AS(Grid::make1d(0.0, 1.0, 2), ConfigError);
}

TEST_CASE("gradient: constant, linear exactness, sin accuracy") {
    Grid g = Grid::make1d(-2.0, 2.0, 401);

    GridField c = sample(g, [](double, double) { return 3.5; });
    GridField gc = gradient_axis(c, 0);
    CHECK(linf_norm(gc) <= 1e-12);

    GridField lin = sample(g, [](double x, double) { return x; });
    GridField gl = gradient_axis(lin, 0);
    for (double v : gl.v) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

    Grid fine = Grid::make1d(0.0, 3.0, 301);  // dx = 0.01
    GridField s = sample(fine, [](double x, double) { return std::sin(x); });
    GridField gs = gradient_axis(s, 0);
    double worst = 0.0;
    for (int i = 1; i + 1 < fine.n[0]; ++i)
        worst = std::max(worst, std::fabs(gs(i) - std::cos(fine.coord(0, i))));
    CHECK(worst <= 1e-4);
}

TEST_CASE("laplacian: linear, quadratic exactness, sin accuracy") {
    Grid g = Grid::make1d(-1.0, 1.0, 201);
    GridField lin = sample(g, [](double x, double) { return 2.0 * x + 1.0; });
    GridField ll = laplacian(lin);
    for (int i = 1; i + 1 < g.n[0]; ++i) CHECK(std::fabs(ll(i)) <= 1e-10);

    GridField quad = sample(g, [](double x, double) { return x * x; });
    GridField lq = laplacian(quad);
    for (int i = 1; i + 1 < g.n[0]; ++i) CHECK(lq(i) == doctest::Approx(2.0).epsilon(1e-9));

    Grid fine = Grid::make1d(0.0, 3.0, 301);
    GridField s = sample(fine, [](double x, double) { return std::sin(x); });
    GridField ls = laplacian(s);
    double worst = 0.0;
    for (int i = 1; i + 1 < fine.n[0]; ++i)
        worst = std::max(worst, std::fabs(ls(i) + std::sin(fine.coord(0, i))));
    CHECK(worst <= 1e-4);
}

TEST_CASE("2-D laplacian quadratic exactness") {
    Grid g = Grid::make2d(-1.0, 1.0, 51, -1.0, 1.0, 41);
    GridField q = sample(g, [](double x, double y) { return x * x + 3.0 * y * y; });
    GridField lq = laplacian(q);
    for (int i = 1; i + 1 < g.n[0]; ++i)
        for (int j = 1; j + 1 < g.n[1]; ++j)
            CHECK(lq(i, j) == doctest::Approx(8.0).epsilon(1e-9));
}

TEST_CASE("integrate: constant, gaussian mass, odd symmetry") {
    Grid g01 = Grid::make1d(0.0, 2.0, 201);
    GridField one = sample(g01, [](double, double) { return 1.0; });
    CHECK(integrate(one) == doctest::Approx(2.0).epsilon(1e-12));

    Grid gg = Grid::make1d(-8.0, 8.0, 1601);  // dx = 0.01
    GridField gauss = gaussian_density_1d(gg, 0.0, 1.0);
    CHECK(integrate(gauss) == doctest::Approx(1.0).epsilon(1e-8));

    Grid gs = Grid::make1d(-1.0, 1.0, 201);
    GridField odd = sample(gs, [](double x, double) { return x; });
    CHECK(std::fabs(integrate(odd)) <= 1e-14);
}

TEST_CASE("linearity of gradient and laplacian on random fields") {
    Grid g = Grid::make1d(-1.0, 1.0, 101);
    RngStream rng(7);
    GridField f(g), h(g);
    for (double& v : f.v) v = rng.next_normal();
    for (double& v : h.v) v = rng.next_normal();
    double a = 1.7, b = -0.3;
    GridField combo(g);
    for (int i = 0; i < g.size(); ++i)
        combo.v[static_cast<size_t>(i)] =
            a * f.v[static_cast<size_t>(i)] + b * h.v[static_cast<size_t>(i)];

    GridField g1 = gradient_axis(combo, 0);
    GridField gf = gradient_axis(f, 0), gh = gradient_axis(h, 0);
    for (int i = 0; i < g.size(); ++i)
        CHECK(g1.v[static_cast<size_t>(i)] ==
              doctest::Approx(a * gf.v[static_cast<size_t>(i)] +
                              b * gh.v[static_cast<size_t>(i)])
                  .epsilon(1e-12));

    GridField l1 = laplacian(combo);
    GridField lf = laplacian(f), lh = laplacian(h);
    for (int i = 0; i < g.size(); ++i)
        CHECK(l1.v[static_cast<size_t>(i)] ==
              doctest::Approx(a * lf.v[static_cast<size_t>(i)] +
                              b * lh.v[static_cast<size_t>(i)])
                  .scale(std::max(1.0, std::fabs(l1.v[static_cast<size_t>(i)])))
                  .epsilon(1e-10));
}

TEST_CASE("wasserstein1_1d: identity, translation, gaussian shift") {
    Grid g = Grid::make1d(-8.0, 8.3, 1631);
    GridField a = gaussian_density_1d(g, 0.0, 1.0);
    CHECK(wasserstein1_1d(a, a) == 0.0);

    // narrow bumps at 0 and 1: translation cost equals the shift
    Grid gb = Grid::make1d(-2.0, 3.0, 2501);
    GridField b0 = gaussian_density_1d(gb, 0.0, 1e-4);
    GridField b1 = gaussian_density_1d(gb, 1.0, 1e-4);
    double w = wasserstein1_1d(b0, b1);
    CHECK(w == doctest::Approx(1.0).epsilon(2.0 * gb.spacing(0)));

    GridField n0 = gaussian_density_1d(g, 0.0, 1.0);
    GridField n3 = gaussian_density_1d(g, 0.3, 1.0);
    CHECK(wasserstein1_1d(n0, n3) == doctest::Approx(0.3).epsilon(1e-3 / 0.3));
}

TEST_CASE("wasserstein1_1d: metric properties on random mixtures") {
    Grid g = Grid::make1d(-6.0, 6.0, 601);
    RngStream rng(11);
    auto random_density = [&]() {
        double m1 = -2.0 + 4.0 * rng.next_uniform();
        double m2 = -2.0 + 4.0 * rng.next_uniform();
        double p = rng.next_uniform();
        GridField f(g);
        for (int i = 0; i < g.size(); ++i) {
            double x = g.coord(0, i);
            f.v[static_cast<size_t>(i)] =
                p * std::exp(-0.5 * (x - m1) * (x - m1)) +
                (1.0 - p) * std::exp(-2.0 * (x - m2) * (x - m2));
        }
        double mass = integrate(f);
        for (double& v : f.v) v /= mass;
        return f;
    };
    for (int trial = 0; trial < 10; ++trial) {
        GridField a = random_density(), b = random_density(), c = random_density();
        double ab = wasserstein1_1d(a, b);
        double ba = wasserstein1_1d(b, a);
        double ac = wasserstein1_1d(a, c);
        double cb = wasserstein1_1d(c, b);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
        CHECK(ab >= 0.0);
        CHECK(ab <= ac + cb + 1e-10);
    }
}

TEST_CASE("wasserstein1_1d rejects mass mismatch") {
    Grid g = Grid::make1d(-6.0, 6.0, 601);
    GridField a = gaussian_density_1d(g, 0.0, 1.0);
    GridField b = a;
    for (double& v : b.v) v *= 1.5;
    CHECK_THROWS_AS(wasserstein1_1d(a, b), ContractViolation);
}

TEST_CASE("interpolation: multilinear with constant extrapolation") {
    Grid g = Grid::make1d(0.0, 1.0, 11);
    GridField f = sample(g, [](double x, double) { return 2.0 * x; });
    double x = 0.55;
    CHECK(interpolate(f, &x) == doctest::Approx(1.1));
    x = -3.0;
    CHECK(interpolate(f, &x) == doctest::Approx(0.0));
    x = 9.0;
    CHECK(interpolate(f, &x) == doctest::Approx(2.0));

    Grid g2 = Grid::make2d(0.0, 1.0, 11, 0.0, 1.0, 11);
    GridField f2 = sample(g2, [](double x, double y) { return x + 3.0 * y; });
    double p[2] = {0.25, 0.65};
    CHECK(interpolate(f2, p) == doctest::Approx(0.25 + 1.95).epsilon(1e-12));
}

TEST_CASE("default grid follows the inflation rule") {
    ProblemConfig cfg = bench();
    auto b = default_box_bounds(cfg, 0);
    CHECK(b[0] == doctest::Approx(-7.1));
    CHECK(b[1] == doctest::Approx(7.1));
}

TEST_CASE("initial measure projection: point mass mean and mass") {
    ProblemConfig cfg = bench();
    cfg.init.mean = {-1.0037, 0.0};
    Grid g = Grid::make1d(-7.1, 7.1, 285);
    GridField mu = project_initial_measure(cfg, g);
    CHECK(integrate(mu) == doctest::Approx(1.0).epsilon(1e-12));
    double mean = 0.0;
    for (int i = 0; i < g.size(); ++i)
        mean += g.quad_weight(i) * mu.v[static_cast<size_t>(i)] * g.coord(0, i);
    CHECK(mean == doctest::Approx(-1.0037).epsilon(1e-10));
}
