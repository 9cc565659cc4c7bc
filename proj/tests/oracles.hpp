#pragma once

// Independent oracles used to freeze expected values; these never share code
// with the solver paths they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace gctest {

// composite Gauss-Legendre quadrature (8-point panels) of f over [a,b]
inline double gauss_legendre(const std::function<double(double)>& f, double a, double b,
                             int panels) {
    static const double nodes[4] = {0.1834346424956498, 0.5255324099163290,
                                    0.7966664774136267, 0.9602898564975363};
    static const double weights[4] = {0.3626837833783620, 0.3137066458778873,
                                      0.2223810344533745, 0.1012285362903763};
    double total = 0.0;
    double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        double mid = a + (p + 0.5) * h;
        double half = 0.5 * h;
        double acc = 0.0;
        for (int q = 0; q < 4; ++q) {
            acc += weights[q] *
                   (f(mid - half * nodes[q]) + f(mid + half * nodes[q]));
        }
        total += acc * half;
    }
    return total;
}

// Hopf-Cole closed form for the V=0 backward equation:
//   u(t,x) = -log int exp(-g(y)) N(y; x, sigma^2 (T-t)) dy
// by quadrature over 12 standard deviations, with panels split at the kinks
// of g so each piece is smooth
inline double hopfcole_quadrature_u(double t, double x, double T, double sigma,
                                    const std::function<double(double)>& g,
                                    const std::vector<double>& kinks = {},
                                    int panels = 400) {
    double var = sigma * sigma * (T - t);
    if (var <= 0.0) return g(x);
    double s = std::sqrt(var);
    auto integrand = [&](double y) {
        double z = (y - x) / s;
        return std::exp(-g(y)) * std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * M_PI));
    };
    std::vector<double> cuts = {x - 12.0 * s, x + 12.0 * s};
    for (double k : kinks)
        if (k > cuts.front() && k < cuts.back()) cuts.insert(cuts.end() - 1, k);
    std::sort(cuts.begin(), cuts.end());
    double w = 0.0;
    for (size_t i = 0; i + 1 < cuts.size(); ++i)
        w += gauss_legendre(integrand, cuts[i], cuts[i + 1], panels);
    return -std::log(w);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// closed form of int exp(-|y|) N(y; m, s^2) dy
inline double exp_abs_gaussian_integral(double m, double s) {
    return std::exp(0.5 * s * s) *
           (std::exp(-m) * normal_cdf(m / s - s) + std::exp(m) * normal_cdf(-m / s - s));
}

// E |Z| for Z ~ N(0, var)
inline double mean_abs_normal(double var) { return std::sqrt(2.0 * var / M_PI); }

// backward Euler for h'(t) = -c (q(t) + h(t)), h(T) = 0, with q given on a
// uniform fine mesh by linear interpolation of (times, values)
inline std::vector<double> backward_euler_companion(const std::vector<double>& times,
                                                    const std::vector<double>& q,
                                                    double c, int refine) {
    const int K = static_cast<int>(times.size()) - 1;
    const double T = times.back();
    const long n_fine = static_cast<long>(K) * refine;
    const double dt = T / static_cast<double>(n_fine);
    auto q_at = [&](double t) {
        double s = t / (T / K);
        int k = static_cast<int>(s);
        if (k >= K) return q[static_cast<size_t>(K)];
        double f = s - k;
        return (1.0 - f) * q[static_cast<size_t>(k)] + f * q[static_cast<size_t>(k) + 1];
    };
    // march h backward on the fine mesh, then sample at the coarse times
    std::vector<double> h_coarse(times.size(), 0.0);
    double h = 0.0;
    long next_coarse = K - 1;
    for (long n = n_fine; n >= 1; --n) {
        double t_prev = (n - 1) * dt;
        // implicit in the marching (decreasing t) direction:
        // h_prev (1 - dt c) = h + dt c q(t_prev)
        h = (h + dt * c * q_at(t_prev)) / (1.0 - dt * c);
        while (next_coarse >= 0 && std::fabs(t_prev - times[static_cast<size_t>(next_coarse)]) < 0.5 * dt) {
            h_coarse[static_cast<size_t>(next_coarse)] = h;
            --next_coarse;
        }
    }
    return h_coarse;
}

}  // namespace gctest
