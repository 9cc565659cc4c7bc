#include "gibbsctrl/coupler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gibbsctrl {

namespace {

class TimeFieldControl final : public Control {
  public:
    TimeFieldControl(Grid grid, std::vector<double> times, std::vector<VectorField> fields,
                     int components, bool extended)
        : grid_(grid),
          times_(std::move(times)),
          fields_(std::move(fields)),
          components_(components),
          extended_(extended) {}

    int state_dim() const override { return components_; }
    bool uses_accumulated_potential() const override { return extended_; }

    void eval(double t, const double* x, double a, double* alpha) const override {
        // piecewise-constant in t between stored times
        int k = time_index(t);
        double pos[2] = {x[0], 0.0};
        if (extended_) {
            pos[1] = a;
        } else if (components_ > 1) {
            pos[1] = x[1];
        }
        for (int c = 0; c < components_; ++c)
            alpha[c] = interpolate(fields_[static_cast<size_t>(k)][static_cast<size_t>(c)],
                                   pos);
    }

  private:
    int time_index(double t) const {
        const double T = times_.back();
        const int K = static_cast<int>(times_.size()) - 1;
        if (t <= times_.front()) return 0;
        if (t >= T) return K;
        double dt = T / K;
        int k = static_cast<int>(t / dt);
        return std::min(k, K);
    }

    Grid grid_;
    std::vector<double> times_;
    std::vector<VectorField> fields_;
    int components_;
    bool extended_;
};

std::vector<VectorField> minimizer_fields(const ValueField& vf, const ActionSet& actions,
                                          int components) {
    std::vector<VectorField> out(vf.times.size());
    for (size_t k = 0; k < vf.times.size(); ++k) {
        for (int c = 0; c < components; ++c) {
            GridField g = gradient_axis(vf.u[k], c);
            for (double& v : g.v) v = -v;
            out[k][static_cast<size_t>(c)] = std::move(g);
        }
        if (!actions.whole_space) {
            for (int idx = 0; idx < vf.grid.size(); ++idx) {
                double alpha[kMaxDim];
                for (int c = 0; c < components; ++c)
                    alpha[c] = out[k][static_cast<size_t>(c)].v[static_cast<size_t>(idx)];
                actions.project(alpha, components);
                for (int c = 0; c < components; ++c)
                    out[k][static_cast<size_t>(c)].v[static_cast<size_t>(idx)] = alpha[c];
            }
        }
    }
    return out;
}

double flow_distance(const GibbsFlow& a, const GibbsFlow& b) {
    double worst = 0.0;
    for (size_t k = 0; k < a.mu.size(); ++k) {
        double d = (a.grid.dim == 1) ? wasserstein1_1d(a.mu[k], b.mu[k])
                                     : l1_distance(a.mu[k], b.mu[k]);
        worst = std::max(worst, d);
    }
    return worst;
}

double value_distance(const ValueField& a, const ValueField& b) {
    double worst = 0.0;
    for (size_t k = 0; k < a.u.size(); ++k) {
        for (size_t idx = 0; idx < a.u[k].v.size(); ++idx)
            worst = std::max(worst, std::fabs(a.u[k].v[idx] - b.u[k].v[idx]));
    }
    return worst;
}

}  // namespace

ControlPtr control_from_fields(const Grid& grid, std::vector<double> times,
                               std::vector<VectorField> fields, int components,
                               bool extended) {
    return std::make_shared<TimeFieldControl>(grid, std::move(times), std::move(fields),
                                              components, extended);
}

ControlPtr extract_control(const ValueField& vf, const ActionSet& actions) {
    int components = vf.extended ? 1 : vf.grid.dim;
    return control_from_fields(vf.grid, vf.times, minimizer_fields(vf, actions, components),
                               components, vf.extended);
}

FBSolution fb_solve(const ProblemConfig& config, const Grid& grid, int steps, FbMode mode,
                    const FbOptions& opts) {
    config.validate();
    const bool extended = (mode == FbMode::extended);
    if (extended && config.dim != 1)
        throw ConfigError("fb_solve: extended mode requires d = 1");

    const int components = extended ? 1 : config.dim;
    double rho = opts.rho_fb;
    const double rho_min = opts.rho_fb / 16.0;

    FBSolution sol;
    sol.extended = extended;

    ControlPtr current = std::make_shared<ZeroControl>(components);
    std::vector<VectorField> relaxed;  // current control's fields
    bool have_prev = false;
    GibbsFlow prev_flow;
    ValueField prev_value;

    auto solve_forward = [&](const Control& c) {
        return extended ? solve_fpk_extended(config, c, grid, steps)
                        : solve_fpk(config, c, grid, steps);
    };

    for (int outer = 1; outer <= opts.max_outer; ++outer) {
        GibbsFlow flow = solve_forward(*current);
        ValueField vf = extended ? solve_hjb_extended(flow, config, opts.hjb)
                                 : solve_hjb_nonlocal(flow, config, opts.hjb);
        std::vector<VectorField> fresh = minimizer_fields(vf, config.costs.actions, components);

        double res_flow = 0.0, res_value = 0.0;
        if (have_prev) {
            res_flow = flow_distance(prev_flow, flow);
            res_value = value_distance(prev_value, vf);
            sol.residual_history.push_back({outer, res_flow, res_value});
            if (res_flow < opts.tol_mu && res_value < opts.tol_u) {
                sol.converged = true;
                sol.value = std::move(vf);
                sol.control = std::move(fresh);
                // exact control, consistent forward flow
                ControlPtr exact = control_from_fields(grid, sol.value.times, sol.control,
                                                       components, extended);
                sol.flow = solve_forward(*exact);
                return sol;
            }
        }

        // stalled residuals: halve the relaxation before giving up
        const auto& hist = sol.residual_history;
        if (hist.size() >= 10) {
            double now = hist.back().flow_residual + hist.back().value_residual;
            double before = hist[hist.size() - 10].flow_residual +
                            hist[hist.size() - 10].value_residual;
            if (now > 0.99 * before && rho > rho_min) rho = std::max(rho_min, 0.5 * rho);
        }

        if (relaxed.empty()) {
            relaxed = fresh;
        } else {
            for (size_t k = 0; k < relaxed.size(); ++k)
                for (int c = 0; c < components; ++c)
                    for (size_t idx = 0; idx < relaxed[k][static_cast<size_t>(c)].v.size();
                         ++idx)
                        relaxed[k][static_cast<size_t>(c)].v[idx] =
                            (1.0 - rho) * relaxed[k][static_cast<size_t>(c)].v[idx] +
                            rho * fresh[k][static_cast<size_t>(c)].v[idx];
        }
        current = control_from_fields(grid, vf.times, relaxed, components, extended);
        prev_flow = std::move(flow);
        prev_value = std::move(vf);
        have_prev = true;
    }

    std::vector<double> trace;
    for (const auto& r : sol.residual_history)
        trace.push_back(r.flow_residual + r.value_residual);
    throw NonConvergenceError("fb_solve: outer iteration did not converge in " +
                                  std::to_string(opts.max_outer) + " iterations",
                              trace);
}

double gateaux_derivative(const FBSolution& sol, const Control& beta) {
    const GibbsFlow& flow = sol.flow;
    const Grid& g = flow.grid;
    const int components = sol.components();
    double total = 0.0;
    const int K = flow.steps();
    for (int k = 0; k < K; ++k) {
        const double t = flow.times[static_cast<size_t>(k)];
        const double dt = flow.times[static_cast<size_t>(k + 1)] - t;
        VectorField grad_u;
        for (int c = 0; c < components; ++c)
            grad_u[static_cast<size_t>(c)] = gradient_axis(sol.value.u[static_cast<size_t>(k)], c);
        double acc = 0.0;
        for (int idx = 0; idx < g.size(); ++idx) {
            double x[2];
            g.node(idx, x);
            double a = sol.extended ? x[1] : 0.0;
            double b[kMaxDim];
            beta.eval(t, x, a, b);
            double dot = 0.0;
            for (int c = 0; c < components; ++c) {
                double phi = sol.control[static_cast<size_t>(k)][static_cast<size_t>(c)]
                                 .v[static_cast<size_t>(idx)];
                dot += b[c] * (grad_u[static_cast<size_t>(c)].v[static_cast<size_t>(idx)] + phi);
            }
            acc += g.quad_weight(idx) * flow.mu[static_cast<size_t>(k)].v[static_cast<size_t>(idx)] *
                   dot;
        }
        total += dt * acc;
    }
    return total;
}

double cost_from_flow(const GibbsFlow& flow, const Control& control,
                      const ProblemConfig& config) {
    const Grid& g = flow.grid;
    const int state_dim = flow.extended ? 1 : config.dim;
    const int K = flow.steps();
    double total = 0.0;
    for (int k = 0; k < K; ++k) {
        const double t = flow.times[static_cast<size_t>(k)];
        const double dt = flow.times[static_cast<size_t>(k + 1)] - t;
        double acc = 0.0;
        for (int idx = 0; idx < g.size(); ++idx) {
            double x[2];
            g.node(idx, x);
            double a = flow.extended ? x[1] : 0.0;
            double alpha[kMaxDim];
            control.eval(t, x, a, alpha);
            acc += g.quad_weight(idx) * flow.mu[static_cast<size_t>(k)].v[static_cast<size_t>(idx)] *
                   config.costs.running(x, alpha, state_dim);
        }
        total += dt * acc;
    }
    // terminal
    double acc = 0.0;
    for (int idx = 0; idx < g.size(); ++idx) {
        double x[2];
        g.node(idx, x);
        acc += g.quad_weight(idx) * flow.mu[static_cast<size_t>(K)].v[static_cast<size_t>(idx)] *
               config.costs.terminal(x, state_dim);
    }
    return total + acc;
}

namespace {

// grid sup-norms of a scalar field and its stencil derivatives
struct FieldSups {
    double sup = 0.0, dsup = 0.0, d2sup = 0.0;
};

FieldSups field_sups(const ScalarField& f, const Grid& grid, int dim) {
    FieldSups s;
    if (f.empty()) return s;
    GridField vals(grid);
    for (int idx = 0; idx < grid.size(); ++idx) {
        double x[2];
        grid.node(idx, x);
        vals.v[static_cast<size_t>(idx)] = f(x, dim);
    }
    s.sup = linf_norm(vals);
    for (int c = 0; c < grid.dim; ++c) s.dsup = std::max(s.dsup, linf_norm(gradient_axis(vals, c)));
    s.d2sup = linf_norm(laplacian(vals));
    return s;
}

}  // namespace

ShortTimeCertificate shorttime_certificate(const ProblemConfig& config,
                                           const FBSolution* solved) {
    config.validate();
    ShortTimeCertificate cert;

    Grid grid = default_grid(config, 401);
    FieldSups gs = field_sups(config.costs.terminal_cost, grid, config.dim);
    FieldSups fs = field_sups(config.costs.state_cost, grid, config.dim);

    cert.c_g = std::max(gs.sup, gs.dsup);
    cert.c_f = fs.sup;
    cert.c_df = fs.dsup;
    cert.c_d2f = fs.d2sup;
    cert.c_dv = config.potential.lipschitz();
    cert.c_d2v = config.potential.second_derivative_bound();

    cert.gamma2 = 3.0 * (cert.c_g + 1.0) * (cert.c_g + 1.0) * std::exp(6.0 * cert.c_g);
    cert.c2 = cert.gamma2;
    cert.c3 = std::max({2.0 * cert.c2 + cert.c_f,
                        2.0 * cert.c_dv * cert.c2 + cert.c2 + cert.c_df,
                        2.0 * cert.c_d2v * cert.c2 + 2.0 * cert.c_dv * cert.c2 + cert.c2 +
                            cert.c_d2f});
    cert.gamma3 = cert.c2 + cert.c3;
    const double e = config.horizon * cert.c3 + cert.c_g;
    cert.k_horizon = std::exp(3.0 * e) * e;
    cert.satisfied = cert.k_horizon <= cert.gamma2;

    if (solved && solved->residual_history.size() >= 2) {
        const auto& h = solved->residual_history;
        double acc = 1.0;
        int count = 0;
        for (size_t i = h.size() - 1; i >= 1 && count < 5; --i, ++count) {
            double prev = h[i - 1].flow_residual + h[i - 1].value_residual;
            double cur = h[i].flow_residual + h[i].value_residual;
            if (prev <= 0.0) break;
            acc *= cur / prev;
        }
        cert.measured_rate = count > 0 ? std::pow(acc, 1.0 / count) : 0.0;
    }
    return cert;
}

}  // namespace gibbsctrl
