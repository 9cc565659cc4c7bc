#include "gibbsctrl/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gibbsctrl/linalg.hpp"

namespace gibbsctrl {

namespace {

// Truncation-boundary treatment for the backward w-solve: the interior is
// advanced by Crank-Nicolson with the old edge values as Dirichlet data, the
// edge data is then corrected by the multiplicative drift of the neighboring
// interior node and the line re-solved, and finally the edges are reset by
// log-linear extrapolation. Exact for w = C exp(+-lambda x), the asymptotic
// regime when u is Lipschitz.
inline double safe_ratio(double num, double den, double lo, double hi) {
    if (!(den > 0.0) || !(num > 0.0)) return 1.0;
    return std::clamp(num / den, lo, hi);
}

void w_cn_line(double* line, int np, double rhalf, std::vector<double>& lower,
               std::vector<double>& diag, std::vector<double>& upper,
               std::vector<double>& rhs, std::vector<double>& scratch) {
    // interior rows: Crank-Nicolson; edge rows: the algebraic constraint
    // w_edge = rho * w_neighbor with rho frozen from the old interior ratio
    // (log-linear continuation; the edges carry no dynamics of their own)
    const double rho_l = safe_ratio(line[1], line[2], 1e-3, 1e3);
    const double rho_r = safe_ratio(line[np - 2], line[np - 3], 1e-3, 1e3);

    rhs[0] = 0.0;
    diag[0] = 1.0;
    upper[0] = -rho_l;
    lower[0] = 0.0;
    for (int p = 1; p < np - 1; ++p) {
        rhs[static_cast<size_t>(p)] =
            line[p] + rhalf * (line[p - 1] - 2.0 * line[p] + line[p + 1]);
        lower[static_cast<size_t>(p)] = -rhalf;
        diag[static_cast<size_t>(p)] = 1.0 + 2.0 * rhalf;
        upper[static_cast<size_t>(p)] = -rhalf;
    }
    rhs[static_cast<size_t>(np - 1)] = 0.0;
    diag[static_cast<size_t>(np - 1)] = 1.0;
    lower[static_cast<size_t>(np - 1)] = -rho_r;
    upper[static_cast<size_t>(np - 1)] = 0.0;

    solve_tridiagonal(lower.data(), diag.data(), upper.data(), rhs.data(), np,
                      scratch.data());
    for (int p = 0; p < np; ++p) line[p] = rhs[static_cast<size_t>(p)];
}

void w_diffuse_axis(GridField& f, int axis, double diff_coef, double dt) {
    const Grid& g = f.grid;
    const int np = g.n[axis];
    const double rhalf = 0.5 * diff_coef * dt / (g.spacing(axis) * g.spacing(axis));
    const int stride = (axis == 0) ? g.n[1] : 1;
    const int nt = g.size() / np;
    std::vector<double> lower(static_cast<size_t>(np)), diag(static_cast<size_t>(np)),
        upper(static_cast<size_t>(np)), rhs(static_cast<size_t>(np)),
        scratch(static_cast<size_t>(np)), line(static_cast<size_t>(np));
    for (int ln = 0; ln < nt; ++ln) {
        int base = (axis == 0) ? ln : ln * g.n[1];
        for (int p = 0; p < np; ++p)
            line[static_cast<size_t>(p)] = f.v[static_cast<size_t>(base + p * stride)];
        w_cn_line(line.data(), np, rhalf, lower, diag, upper, rhs, scratch);
        for (int p = 0; p < np; ++p)
            f.v[static_cast<size_t>(base + p * stride)] = line[static_cast<size_t>(p)];
    }
}

void w_diffuse(GridField& f, double diff_coef, double dt, bool x_axis_only) {
    if (f.grid.dim == 1 || x_axis_only) {
        w_diffuse_axis(f, 0, diff_coef, dt);
        return;
    }
    // axis-by-axis Crank-Nicolson; the axis operators commute on a rectangle
    w_diffuse_axis(f, 0, diff_coef, dt);
    w_diffuse_axis(f, 1, diff_coef, dt);
}

// backward-in-time upwind for the V(x) d_a transport: information flows
// toward smaller a; zero-gradient at the top of the a-axis
void w_transport_a(GridField& f, const std::vector<double>& speed_per_x, double dt,
                   double a_viscosity) {
    const Grid& g = f.grid;
    const int nx = g.n[0], na = g.n[1];
    const double da = g.spacing(1);
    std::vector<double> old_row(static_cast<size_t>(na));
    for (int i = 0; i < nx; ++i) {
        const double nu = speed_per_x[static_cast<size_t>(i)] * dt / da;
        const double eta = a_viscosity * dt / (da * da);
        if (nu == 0.0 && eta == 0.0) continue;
        for (int j = 0; j < na; ++j) old_row[static_cast<size_t>(j)] = f(i, j);
        for (int j = 0; j < na; ++j) {
            double up = (j + 1 < na) ? old_row[static_cast<size_t>(j + 1)]
                                     : old_row[static_cast<size_t>(na - 1)];
            double down = (j > 0) ? old_row[static_cast<size_t>(j - 1)]
                                  : old_row[0];
            double cur = old_row[static_cast<size_t>(j)];
            f(i, j) = cur + nu * (up - cur) + eta * (up - 2.0 * cur + down);
        }
    }
}

struct SweepData {
    GridField potential;       // V at nodes
    GridField state_cost;      // f~ at nodes
    GridField terminal;        // g at nodes
    std::vector<double> mean_v;  // <mu_t, V>
    std::vector<double> a_speed; // V per x-row (extended only)
    double sup_v = 0.0;
};

SweepData prepare_sweep(const GibbsFlow& flow, const ProblemConfig& config) {
    const Grid& g = flow.grid;
    const int state_dim = flow.extended ? 1 : config.dim;
    SweepData d;
    d.potential = GridField(g);
    d.state_cost = GridField(g);
    d.terminal = GridField(g);
    for (int idx = 0; idx < g.size(); ++idx) {
        double x[2];
        g.node(idx, x);
        d.potential.v[static_cast<size_t>(idx)] = config.potential.value(x, state_dim);
        d.state_cost.v[static_cast<size_t>(idx)] =
            config.costs.state_cost.empty() ? 0.0 : config.costs.state_cost(x, state_dim);
        d.terminal.v[static_cast<size_t>(idx)] = config.costs.terminal(x, state_dim);
        d.sup_v = std::max(d.sup_v, d.potential.v[static_cast<size_t>(idx)]);
    }
    d.mean_v = mean_potential(flow, config);
    if (flow.extended) {
        d.a_speed.resize(static_cast<size_t>(g.n[0]));
        for (int i = 0; i < g.n[0]; ++i) {
            double x = g.coord(0, i);
            d.a_speed[static_cast<size_t>(i)] = config.potential.value(&x, 1);
        }
    }
    return d;
}

// F(t_k, x) = -(V - <mu_k,V>) u + V s_k + f~
void zero_order_source(const SweepData& d, int k, const GridField& u,
                       const std::vector<double>& s, GridField& out) {
    const double mv = d.mean_v[static_cast<size_t>(k)];
    const double sk = s[static_cast<size_t>(k)];
    for (size_t idx = 0; idx < out.v.size(); ++idx) {
        double V = d.potential.v[idx];
        out.v[idx] = -(V - mv) * u.v[idx] + V * sk + d.state_cost.v[idx];
    }
}

struct SweepResult {
    std::vector<GridField> u, w;
    double source_sup = 0.0;
    long floor_activations = 0;
};

SweepResult hopfcole_sweep(const GibbsFlow& flow, const SweepData& d,
                           const std::vector<double>& s, const ProblemConfig& config,
                           const HjbOptions& opts) {
    const Grid& g = flow.grid;
    const int K = flow.steps();
    const double diff = 0.5 * config.sigma * config.sigma;

    SweepResult res;
    res.u.assign(static_cast<size_t>(K) + 1, GridField(g));
    res.w.assign(static_cast<size_t>(K) + 1, GridField(g));

    GridField& uT = res.u[static_cast<size_t>(K)];
    GridField& wT = res.w[static_cast<size_t>(K)];
    uT = d.terminal;  // terminal condition holds exactly on the grid
    for (size_t idx = 0; idx < wT.v.size(); ++idx) wT.v[idx] = std::exp(-uT.v[idx]);

    GridField f_k(g), f_est(g), w_work(g), u_prov(g);
    auto to_u = [&](const GridField& w, GridField& u_out) -> long {
        long floored = 0;
        long at_floor = 0;
        for (size_t idx = 0; idx < w.v.size(); ++idx) {
            double wv = w.v[idx];
            if (!(wv > opts.w_floor)) {
                wv = opts.w_floor;
                ++floored;
                ++at_floor;
            }
            u_out.v[idx] = -std::log(wv);
        }
        if (at_floor == static_cast<long>(w.v.size()))
            throw HjbError("hopf-cole solve underflowed everywhere: horizon or terminal "
                           "cost too large for the floor");
        return floored;
    };

    auto apply_half_factor = [&](GridField& w, const GridField& F, double dt) {
        for (size_t idx = 0; idx < w.v.size(); ++idx)
            w.v[idx] *= std::exp(-0.5 * dt * F.v[idx]);
    };

    for (int k = K; k >= 1; --k) {
        const double dt =
            flow.times[static_cast<size_t>(k)] - flow.times[static_cast<size_t>(k - 1)];
        const GridField& w_k = res.w[static_cast<size_t>(k)];
        const GridField& u_k = res.u[static_cast<size_t>(k)];

        // predictor: zero-order coefficient frozen at the known level
        zero_order_source(d, k, u_k, s, f_k);
        w_work = w_k;
        apply_half_factor(w_work, f_k, dt);
        if (flow.extended) w_transport_a(w_work, d.a_speed, dt, opts.a_viscosity);
        w_diffuse(w_work, diff, dt, flow.extended);
        apply_half_factor(w_work, f_k, dt);
        to_u(w_work, u_prov);

        // corrector: midpoint source between levels k and k-1
        zero_order_source(d, k - 1, u_prov, s, f_est);
        for (size_t idx = 0; idx < f_k.v.size(); ++idx)
            f_est.v[idx] = 0.5 * (f_k.v[idx] + f_est.v[idx]);
        for (double fv : f_est.v) res.source_sup = std::max(res.source_sup, std::fabs(fv));

        GridField& w_new = res.w[static_cast<size_t>(k - 1)];
        w_new = w_k;
        apply_half_factor(w_new, f_est, dt);
        if (flow.extended) w_transport_a(w_new, d.a_speed, dt, opts.a_viscosity);
        w_diffuse(w_new, diff, dt, flow.extended);
        apply_half_factor(w_new, f_est, dt);
        res.floor_activations += to_u(w_new, res.u[static_cast<size_t>(k - 1)]);
        if (!res.u[static_cast<size_t>(k - 1)].all_finite())
            throw HjbError("hopf-cole sweep produced non-finite values");
    }
    return res;
}

void check_flow(const GibbsFlow& flow) {
    for (size_t k = 0; k < flow.mu.size(); ++k) {
        double mass = integrate(flow.mu[k]);
        if (std::fabs(mass - 1.0) > 1e-6)
            throw ContractViolation("hjb: input flow is not normalized at t index " +
                                    std::to_string(k) + " (mass " + std::to_string(mass) +
                                    ")");
    }
}

ValueField assemble(const GibbsFlow& flow, SweepResult&& sw) {
    ValueField vf;
    vf.grid = flow.grid;
    vf.times = flow.times;
    vf.extended = flow.extended;
    vf.u = std::move(sw.u);
    vf.w = std::move(sw.w);
    vf.source_sup = sw.source_sup;
    vf.floor_activations = sw.floor_activations;
    return vf;
}

ValueField solve_nonlocal_impl(const GibbsFlow& flow, const ProblemConfig& config,
                               const HjbOptions& opts) {
    check_flow(flow);
    SweepData data = prepare_sweep(flow, config);
    const int K = flow.steps();

    std::vector<double> s(static_cast<size_t>(K) + 1,
                          bracket(flow.mu.back(), data.terminal));

    if (data.sup_v == 0.0) {
        // non-local terms multiply V: with V = 0 the first sweep is exact
        SweepResult sw = hopfcole_sweep(flow, data, s, config, opts);
        ValueField vf = assemble(flow, std::move(sw));
        vf.nonlocal.resize(static_cast<size_t>(K) + 1);
        for (int k = 0; k <= K; ++k)
            vf.nonlocal[static_cast<size_t>(k)] =
                bracket(flow.mu[static_cast<size_t>(k)], vf.u[static_cast<size_t>(k)]);
        vf.picard_residuals = {0.0};
        return vf;
    }

    std::vector<double> residuals;
    for (int it = 0; it < opts.max_iter; ++it) {
        SweepResult sw = hopfcole_sweep(flow, data, s, config, opts);
        double delta = 0.0;
        for (int k = 0; k <= K; ++k) {
            double s_new =
                bracket(flow.mu[static_cast<size_t>(k)], sw.u[static_cast<size_t>(k)]);
            double step = opts.damping * (s_new - s[static_cast<size_t>(k)]);
            delta = std::max(delta, std::fabs(step));
            s[static_cast<size_t>(k)] += step;
        }
        residuals.push_back(delta);
        if (delta < opts.tol_nonlocal) {
            ValueField vf = assemble(flow, std::move(sw));
            vf.nonlocal = s;
            vf.picard_residuals = residuals;
            if (residuals.size() >= 2) {
                double acc = 1.0;
                int count = 0;
                for (size_t i = residuals.size() - 1;
                     i >= 1 && count < 5 && residuals[i - 1] > 0.0; --i, ++count)
                    acc *= residuals[i] / residuals[i - 1];
                vf.picard_rate = count > 0 ? std::pow(acc, 1.0 / count) : 0.0;
            }
            return vf;
        }
    }
    throw NonConvergenceError(
        "solve_hjb_nonlocal: Picard iteration on the non-local scalar did not reach " +
            std::to_string(opts.tol_nonlocal) + " in " + std::to_string(opts.max_iter) +
            " iterations",
        residuals);
}

}  // namespace

GridField terminal_cost_field(const ProblemConfig& config, const Grid& grid) {
    GridField out(grid);
    const int state_dim = (grid.dim == 2 && config.dim == 1) ? 1 : config.dim;
    for (int idx = 0; idx < grid.size(); ++idx) {
        double x[2];
        grid.node(idx, x);
        out.v[static_cast<size_t>(idx)] = config.costs.terminal(x, state_dim);
    }
    return out;
}

double bracket(const GridField& mu, const GridField& field) {
    if (!mu.grid.same_mesh(field.grid)) throw ContractViolation("bracket: grid mismatch");
    double s = 0.0;
    for (int idx = 0; idx < mu.grid.size(); ++idx)
        s += mu.grid.quad_weight(idx) * mu.v[static_cast<size_t>(idx)] *
             field.v[static_cast<size_t>(idx)];
    return s;
}

ValueField solve_linear_hopfcole(const GibbsFlow& flow,
                                 const std::vector<double>& frozen_nonlocal,
                                 const ProblemConfig& config, const HjbOptions& opts) {
    check_flow(flow);
    if (frozen_nonlocal.size() != flow.times.size())
        throw ContractViolation("solve_linear_hopfcole: frozen sequence length mismatch");
    SweepData data = prepare_sweep(flow, config);
    SweepResult sw = hopfcole_sweep(flow, data, frozen_nonlocal, config, opts);
    ValueField vf = assemble(flow, std::move(sw));
    vf.nonlocal = frozen_nonlocal;
    return vf;
}

ValueField solve_hjb_nonlocal(const GibbsFlow& flow, const ProblemConfig& config,
                              const HjbOptions& opts) {
    if (flow.extended)
        throw ContractViolation("solve_hjb_nonlocal: use solve_hjb_extended for (x,a) flows");
    return solve_nonlocal_impl(flow, config, opts);
}

ValueField solve_hjb_extended(const GibbsFlow& flow_xa, const ProblemConfig& config,
                              const HjbOptions& opts) {
    if (!flow_xa.extended)
        throw ContractViolation("solve_hjb_extended: flow is not on an (x,a) grid");
    return solve_nonlocal_impl(flow_xa, config, opts);
}

AprioriReport apriori_bounds(const ValueField& vf, const GibbsFlow& flow,
                             const ProblemConfig& config) {
    const double T = config.horizon;
    AprioriReport rep;
    rep.source_sup = vf.source_sup;

    const int state_dim = vf.extended ? 1 : config.dim;
    GridField f_field(vf.grid), g_field(vf.grid);
    for (int idx = 0; idx < vf.grid.size(); ++idx) {
        double x[2];
        vf.grid.node(idx, x);
        f_field.v[static_cast<size_t>(idx)] =
            config.costs.state_cost.empty() ? 0.0 : config.costs.state_cost(x, state_dim);
        g_field.v[static_cast<size_t>(idx)] = config.costs.terminal(x, state_dim);
    }
    rep.f_sup = linf_norm(f_field);
    rep.g_sup = linf_norm(g_field);

    // K_phi estimated as the discrete int_0^T <mu_t, |grad u_t|^2> dt
    const int K = static_cast<int>(vf.times.size()) - 1;
    for (int k = 0; k < K; ++k) {
        double dt =
            vf.times[static_cast<size_t>(k + 1)] - vf.times[static_cast<size_t>(k)];
        GridField gx = gradient_axis(vf.u[static_cast<size_t>(k)], 0);
        GridField sq(vf.grid);
        for (size_t idx = 0; idx < sq.v.size(); ++idx) sq.v[idx] = gx.v[idx] * gx.v[idx];
        if (!vf.extended && vf.grid.dim > 1) {
            GridField gy = gradient_axis(vf.u[static_cast<size_t>(k)], 1);
            for (size_t idx = 0; idx < sq.v.size(); ++idx) sq.v[idx] += gy.v[idx] * gy.v[idx];
        }
        rep.k_phi += dt * bracket(flow.mu[static_cast<size_t>(k)], sq);
    }

    for (size_t k = 0; k < vf.times.size(); ++k) {
        AprioriBoundRow row;
        row.t = vf.times[k];
        const double tt = T - row.t;
        row.mu_u = bracket(flow.mu[k], vf.u[k]);
        row.weak_bound = std::exp(2.0 * tt) * (rep.f_sup + rep.g_sup) +
                         0.25 * std::exp(T) * (std::exp(2.0 * tt) + 1.0);
        row.weak_ok = std::fabs(row.mu_u) <= row.weak_bound;
        row.u_sup = linf_norm(vf.u[k]);
        row.strong_bound = 0.5 * std::exp(row.t) * (std::exp(2.0 * tt) - 1.0) * rep.f_sup +
                           0.5 * std::exp(2.0 * T) * rep.k_phi + std::exp(T) * rep.g_sup;
        row.strong_ok = row.u_sup <= row.strong_bound;
        row.smooth_bound =
            std::exp(2.0 * T - row.t) * (rep.g_sup + 0.5 * rep.source_sup) + 1e-6;
        row.smooth_ok = row.u_sup <= row.smooth_bound;
        rep.all_weak = rep.all_weak && row.weak_ok;
        rep.all_strong = rep.all_strong && row.strong_ok;
        rep.all_smooth = rep.all_smooth && row.smooth_ok;
        rep.rows.push_back(row);
    }
    return rep;
}

}  // namespace gibbsctrl
