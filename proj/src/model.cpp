#include "gibbsctrl/model.hpp"

#include <cmath>

namespace gibbsctrl {

double Domain::distance(const double* x, int dim) const {
    if (kind == Kind::ball) {
        double s = 0.0;
        for (int k = 0; k < dim; ++k) {
            double d = x[k] - center[k];
            s += d * d;
        }
        double r = std::sqrt(s) - radius;
        return r > 0.0 ? r : 0.0;
    }
    // box: distance to the nearest face, per axis
    double s = 0.0;
    for (int k = 0; k < dim; ++k) {
        double d = std::fabs(x[k] - center[k]) - half_widths[k];
        if (d > 0.0) s += d * d;
    }
    return std::sqrt(s);
}

namespace {

// ramp profile on [0,1]: linear by default, C1 smoothstep behind the flag
inline double ramp(double s, bool smooth) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    return smooth ? s * s * (3.0 - 2.0 * s) : s;
}

inline double ramp_slope(double s, bool smooth) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    return smooth ? 6.0 * s * (1.0 - s) : 1.0;
}

}  // namespace

double Potential::value(const double* x, int dim) const {
    double d = domain_.distance(x, dim);
    return amplitude_ * ramp(d / epsilon_, smooth_);
}

void Potential::gradient(const double* x, int dim, double* out) const {
    double d = domain_.distance(x, dim);
    double slope = amplitude_ * ramp_slope(d / epsilon_, smooth_) / epsilon_;
    if (slope == 0.0 || d == 0.0) {
        for (int k = 0; k < dim; ++k) out[k] = 0.0;
        return;
    }
    // gradient of d(x,D) for ball / box geometries
    if (domain_.kind == Domain::Kind::ball) {
        double s = 0.0;
        for (int k = 0; k < dim; ++k) {
            double dx = x[k] - domain_.center[k];
            s += dx * dx;
        }
        double norm = std::sqrt(s);
        for (int k = 0; k < dim; ++k) out[k] = slope * (x[k] - domain_.center[k]) / norm;
    } else {
        double g[kMaxDim] = {0.0, 0.0};
        double s = 0.0;
        for (int k = 0; k < dim; ++k) {
            double dx = x[k] - domain_.center[k];
            double excess = std::fabs(dx) - domain_.half_widths[k];
            if (excess > 0.0) {
                g[k] = (dx > 0.0 ? excess : -excess);
                s += excess * excess;
            }
        }
        double norm = std::sqrt(s);
        for (int k = 0; k < dim; ++k) out[k] = norm > 0.0 ? slope * g[k] / norm : 0.0;
    }
}

ScalarField zero_field() {
    return ScalarField{};
}

ScalarField constant_field(double c) {
    ScalarField f;
    f.value = [c](const double*, int) { return c; };
    f.gradient = [](const double*, int dim, double* out) {
        for (int k = 0; k < dim; ++k) out[k] = 0.0;
    };
    return f;
}

ScalarField abs_distance_field(const Vec& target) {
    ScalarField f;
    f.value = [target](const double* x, int dim) {
        double s = 0.0;
        for (int k = 0; k < dim; ++k) {
            double d = x[k] - target[k];
            s += d * d;
        }
        return std::sqrt(s);
    };
    f.gradient = [target](const double* x, int dim, double* out) {
        double s = 0.0;
        for (int k = 0; k < dim; ++k) {
            double d = x[k] - target[k];
            s += d * d;
        }
        double norm = std::sqrt(s);
        for (int k = 0; k < dim; ++k)
            out[k] = norm > 0.0 ? (x[k] - target[k]) / norm : 0.0;
    };
    return f;
}

ProblemConfig default_problem() {
    ProblemConfig cfg;
    cfg.dim = 1;
    cfg.horizon = 1.0;
    cfg.sigma = 1.0;
    cfg.init.kind = InitialMeasure::Kind::point;
    cfg.init.mean = {-1.0, 0.0};
    Domain d;
    d.kind = Domain::Kind::ball;
    d.center = {0.0, 0.0};
    d.radius = 1.0;
    cfg.potential = Potential(d, 0.1, 1.0);
    cfg.costs.target = {0.0, 0.0};
    cfg.costs.terminal_cost = abs_distance_field(cfg.costs.target);
    cfg.costs.state_cost = zero_field();
    return cfg;
}

Potential build_soft_potential(const ProblemConfig& config) {
    config.validate();
    return config.potential;
}

CostSample eval_costs(const ProblemConfig& config, const double* x, const double* alpha) {
    return CostSample{config.costs.running(x, alpha, config.dim),
                      config.costs.terminal(x, config.dim)};
}

}  // namespace gibbsctrl
