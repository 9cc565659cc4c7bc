#include "gibbsctrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "gibbsctrl/coupler.hpp"
#include "gibbsctrl/particle.hpp"
#include "gibbsctrl/rng.hpp"
#include "gibbsctrl/util.hpp"

namespace gibbsctrl {

namespace {

constexpr int H = Policy::kHidden;

struct ParamView {
    const double* w1;
    const double* b1;
    const double* w2;
    const double* b2;
    const double* w3;
    const double* b3;
};

ParamView view(const Policy& p) {
    const int in = p.input_dim();
    const double* q = p.params.data();
    ParamView v;
    v.w1 = q;
    v.b1 = q + H * in;
    v.w2 = v.b1 + H;
    v.b2 = v.w2 + H * H;
    v.w3 = v.b2 + H;
    v.b3 = v.w3 + p.dim * H;
    return v;
}

struct GradView {
    double* w1;
    double* b1;
    double* w2;
    double* b2;
    double* w3;
    double* b3;
};

GradView view(std::vector<double>& g, const Policy& p) {
    const int in = p.input_dim();
    double* q = g.data();
    GradView v;
    v.w1 = q;
    v.b1 = q + H * in;
    v.w2 = v.b1 + H;
    v.b2 = v.w2 + H * H;
    v.w3 = v.b2 + H;
    v.b3 = v.w3 + p.dim * H;
    return v;
}

// normalized inputs in the fixed order (t, x..., a): the a input is last so
// that a lifted Markovian policy reproduces its outputs bit-for-bit
inline void normalize_inputs(const Policy& p, double t, const double* x, double a,
                             double* in) {
    in[0] = t / p.t_scale;
    for (int k = 0; k < p.dim; ++k) in[1 + k] = (x[k] - p.x_center[k]) / p.x_scale[k];
    if (p.extended) in[1 + p.dim] = a / p.a_scale;
}

inline void forward(const Policy& p, const ParamView& pv, const double* in, double* h1,
                    double* h2, double* alpha) {
    const int ind = p.input_dim();
    for (int h = 0; h < H; ++h) {
        double s = pv.b1[h];
        const double* row = pv.w1 + h * ind;
        for (int j = 0; j < ind; ++j) s += row[j] * in[j];
        h1[h] = std::tanh(s);
    }
    for (int h = 0; h < H; ++h) {
        double s = pv.b2[h];
        const double* row = pv.w2 + h * H;
        for (int j = 0; j < H; ++j) s += row[j] * h1[j];
        h2[h] = std::tanh(s);
    }
    for (int c = 0; c < p.dim; ++c) {
        double s = pv.b3[c];
        const double* row = pv.w3 + c * H;
        for (int j = 0; j < H; ++j) s += row[j] * h2[j];
        alpha[c] = s;
    }
}

// reverse pass; accumulates the parameter gradient and returns the input
// adjoint (same normalized coordinates as `in`)
inline void backward(const Policy& p, const ParamView& pv, const double* in,
                     const double* h1, const double* h2, const double* alpha_bar,
                     GradView& gv, double* in_bar) {
    const int ind = p.input_dim();
    double d2[H], d1[H];
    for (int c = 0; c < p.dim; ++c) {
        gv.b3[c] += alpha_bar[c];
        double* row = gv.w3 + c * H;
        for (int j = 0; j < H; ++j) row[j] += alpha_bar[c] * h2[j];
    }
    for (int j = 0; j < H; ++j) {
        double s = 0.0;
        for (int c = 0; c < p.dim; ++c) s += pv.w3[c * H + j] * alpha_bar[c];
        d2[j] = s * (1.0 - h2[j] * h2[j]);
    }
    for (int h = 0; h < H; ++h) {
        gv.b2[h] += d2[h];
        double* row = gv.w2 + h * H;
        for (int j = 0; j < H; ++j) row[j] += d2[h] * h1[j];
    }
    for (int j = 0; j < H; ++j) {
        double s = 0.0;
        for (int h = 0; h < H; ++h) s += pv.w2[h * H + j] * d2[h];
        d1[j] = s * (1.0 - h1[j] * h1[j]);
    }
    for (int h = 0; h < H; ++h) {
        gv.b1[h] += d1[h];
        double* row = gv.w1 + h * ind;
        for (int j = 0; j < ind; ++j) row[j] += d1[h] * in[j];
    }
    for (int j = 0; j < ind; ++j) {
        double s = 0.0;
        for (int h = 0; h < H; ++h) s += pv.w1[h * ind + j] * d1[h];
        in_bar[j] = s;
    }
}

void set_normalization(Policy& p, const ProblemConfig& config) {
    p.t_scale = config.horizon;
    for (int k = 0; k < config.dim; ++k) {
        auto b = default_box_bounds(config, k);
        p.x_center[k] = 0.5 * (b[0] + b[1]);
        p.x_scale[k] = 0.5 * (b[1] - b[0]);
    }
    double amax = config.horizon * config.potential.amplitude();
    p.a_scale = amax > 0.0 ? amax : 1.0;
}

}  // namespace

void Policy::eval(double t, const double* x, double a, double* alpha) const {
    double in[2 + kMaxDim], h1[H], h2[H];
    normalize_inputs(*this, t, x, a, in);
    forward(*this, view(*this), in, h1, h2, alpha);
}

ControlPtr make_control(const Policy& policy) {
    return std::make_shared<PolicyControl>(std::make_shared<Policy>(policy));
}

Policy init_policy(bool extended, const ProblemConfig& config, uint64_t seed,
                   bool zero_init) {
    config.validate();
    Policy p;
    p.extended = extended;
    p.dim = config.dim;
    set_normalization(p, config);
    p.params.assign(static_cast<size_t>(p.param_count()), 0.0);
    if (!zero_init) {
        RngStream rng(hash_combine(mix64(seed), 0x706f6c696379ULL));
        const int in = p.input_dim();
        auto fill = [&](double* q, int count, int fan_in) {
            double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (int i = 0; i < count; ++i) q[i] = scale * (2.0 * rng.next_uniform() - 1.0);
        };
        std::vector<double> tmp = p.params;
        GradView gv = view(tmp, p);
        fill(gv.w1, H * in, in);
        fill(gv.b1, H, in);
        fill(gv.w2, H * H, H);
        fill(gv.b2, H, H);
        fill(gv.w3, p.dim * H, H);
        fill(gv.b3, p.dim, H);
        p.params = std::move(tmp);
    }
    return p;
}

Policy lift_to_extended(const Policy& m) {
    if (m.extended) return m;
    Policy p = m;
    p.extended = true;
    p.params.assign(static_cast<size_t>(p.param_count()), 0.0);
    const int in_m = m.input_dim();
    const int in_e = p.input_dim();
    // first layer gains a trailing zero column for the a input; the rest is copied
    const double* src = m.params.data();
    double* dst = p.params.data();
    for (int h = 0; h < H; ++h)
        for (int j = 0; j < in_m; ++j) dst[h * in_e + j] = src[h * in_m + j];
    std::copy(src + H * in_m, src + m.param_count(), dst + H * in_e);
    return p;
}

// ---------------------------------------------------------------------------
// batch loss and exact pathwise gradient

LossGrad loss_and_gradient(const Policy& policy, const ProblemConfig& config, int n_batch,
                           int steps, uint64_t seed) {
    config.validate();
    if (n_batch < 2) throw PolicyError("loss_and_gradient: need N >= 2");
    if (policy.dim != config.dim) throw PolicyError("loss_and_gradient: dimension mismatch");

    const int d = config.dim;
    const int ind = policy.input_dim();
    const double T = config.horizon;
    const double dt = T / steps;
    const double noise = config.sigma * std::sqrt(dt);
    const ParamView pv = view(policy);
    const size_t N = static_cast<size_t>(n_batch);
    const size_t S = static_cast<size_t>(steps);

    // forward caches
    std::vector<double> X(N * (S + 1) * d), A(N * (S + 1));
    std::vector<double> IN(N * S * ind), H1(N * S * H), H2(N * S * H), AL(N * S * d);
    std::vector<double> FV(N * S);  // running cost values f_{i,n}

    parallel_for_tasks(kStderrBlocks, [&](int b) {
        long lo = static_cast<long>(n_batch) * b / kStderrBlocks;
        long hi = static_cast<long>(n_batch) * (b + 1) / kStderrBlocks;
        for (long i = lo; i < hi; ++i) {
            RngStream rng = RngStream::for_trajectory(seed, static_cast<uint64_t>(i));
            double x[kMaxDim] = {0.0, 0.0};
            if (config.init.kind == InitialMeasure::Kind::point) {
                for (int k = 0; k < d; ++k) x[k] = config.init.mean[k];
            } else {
                for (int k = 0; k < d; ++k)
                    x[k] = config.init.mean[k] + config.init.stddev[k] * rng.next_normal();
            }
            double a = 0.0;
            for (size_t n = 0; n < S; ++n) {
                const size_t cell = (static_cast<size_t>(i) * S + n);
                for (int k = 0; k < d; ++k) X[(static_cast<size_t>(i) * (S + 1) + n) * d + k] = x[k];
                A[static_cast<size_t>(i) * (S + 1) + n] = a;
                double* in = &IN[cell * ind];
                double* h1 = &H1[cell * H];
                double* h2 = &H2[cell * H];
                double* al = &AL[cell * d];
                normalize_inputs(policy, static_cast<double>(n) * dt, x, a, in);
                forward(policy, pv, in, h1, h2, al);
                FV[cell] = config.costs.running(x, al, d);
                a += config.potential.value(x, d) * dt;
                for (int k = 0; k < d; ++k) x[k] += al[k] * dt + noise * rng.next_normal();
            }
            for (int k = 0; k < d; ++k)
                X[(static_cast<size_t>(i) * (S + 1) + S) * d + k] = x[k];
            A[static_cast<size_t>(i) * (S + 1) + S] = a;
        }
    });

    // per-step normalizers
    std::vector<double> Sf(S, 0.0), Sw(S + 1, 0.0);
    double Sg = 0.0;
    double max_a = 0.0;
    for (size_t i = 0; i < N; ++i) {
        for (size_t n = 0; n < S; ++n) {
            double w = std::exp(-A[i * (S + 1) + n]);
            Sf[n] += FV[i * S + n] * w;
            Sw[n] += w;
        }
        double aT = A[i * (S + 1) + S];
        max_a = std::max(max_a, aT);
        double wT = std::exp(-aT);
        Sw[S] += wT;
        Sg += config.costs.terminal(&X[(i * (S + 1) + S) * d], d) * wT;
    }
    for (size_t n = 0; n <= S; ++n)
        if (!(Sw[n] > 0.0))
            throw EstimatorDegenerateError(
                "loss_and_gradient: all weights underflowed (max A " +
                    std::to_string(max_a) + ")",
                max_a);

    LossGrad out;
    for (size_t n = 0; n < S; ++n) out.loss += dt * Sf[n] / Sw[n];
    const double j_term = Sg / Sw[S];
    out.loss += j_term;
    out.grad.assign(policy.params.size(), 0.0);

    // reverse sweep per particle; the coupling across particles enters only
    // through the precomputed normalizers
    std::vector<std::vector<double>> grad_block(
        kStderrBlocks, std::vector<double>(policy.params.size(), 0.0));
    std::vector<double> a_channel_block(kStderrBlocks, 0.0);

    parallel_for_tasks(kStderrBlocks, [&](int b) {
        long lo = static_cast<long>(n_batch) * b / kStderrBlocks;
        long hi = static_cast<long>(n_batch) * (b + 1) / kStderrBlocks;
        std::vector<double> gbuf(policy.params.size(), 0.0);
        GradView gv = view(gbuf, policy);
        double a_channel = 0.0;
        for (long i = lo; i < hi; ++i) {
            double xbar[kMaxDim] = {0.0, 0.0};
            double abar = 0.0;
            // terminal contribution
            {
                const double* xT = &X[(static_cast<size_t>(i) * (S + 1) + S) * d];
                double aT = A[static_cast<size_t>(i) * (S + 1) + S];
                double wT = std::exp(-aT);
                double gT = config.costs.terminal(xT, d);
                double wbar = (gT - j_term) / Sw[S];
                double gg[kMaxDim];
                config.costs.terminal_cost.grad(xT, d, gg);
                for (int k = 0; k < d; ++k) xbar[k] = gg[k] * wT / Sw[S];
                abar = -wT * wbar;
            }
            for (long n = static_cast<long>(S) - 1; n >= 0; --n) {
                const size_t cell = static_cast<size_t>(i) * S + static_cast<size_t>(n);
                const size_t node = static_cast<size_t>(i) * (S + 1) + static_cast<size_t>(n);
                const double* xn = &X[node * d];
                const double an = A[node];
                const double wn = std::exp(-an);
                const double fbar = dt * wn / Sw[static_cast<size_t>(n)];
                const double wbar =
                    dt * (FV[cell] - Sf[static_cast<size_t>(n)] / Sw[static_cast<size_t>(n)]) /
                    Sw[static_cast<size_t>(n)];

                double xbar_next[kMaxDim];
                for (int k = 0; k < d; ++k) xbar_next[k] = xbar[k];
                const double abar_next = abar;

                // A_{n+1} = A_n + V(X_n) dt and the weight at time n
                abar = abar_next - wn * wbar;
                double vg[kMaxDim];
                config.potential.gradient(xn, d, vg);
                for (int k = 0; k < d; ++k) {
                    double via_a = abar_next * vg[k] * dt;
                    a_channel = std::max(a_channel, std::fabs(via_a));
                    xbar[k] = xbar_next[k] + via_a;
                }

                // alpha enters the dynamics and the running cost
                double alpha_bar[kMaxDim];
                for (int k = 0; k < d; ++k)
                    alpha_bar[k] = xbar_next[k] * dt + fbar * AL[cell * d + static_cast<size_t>(k)];

                if (!config.costs.state_cost.empty()) {
                    double fg[kMaxDim];
                    config.costs.state_cost.grad(xn, d, fg);
                    for (int k = 0; k < d; ++k) xbar[k] += fbar * fg[k];
                }

                double in_bar[2 + kMaxDim];
                backward(policy, pv, &IN[cell * ind], &H1[cell * H], &H2[cell * H],
                         alpha_bar, gv, in_bar);
                for (int k = 0; k < d; ++k) xbar[k] += in_bar[1 + k] / policy.x_scale[k];
                if (policy.extended) abar += in_bar[1 + d] / policy.a_scale;
            }
        }
        grad_block[static_cast<size_t>(b)] = std::move(gbuf);
        a_channel_block[static_cast<size_t>(b)] = a_channel;
    });

    for (int b = 0; b < kStderrBlocks; ++b) {
        for (size_t q = 0; q < out.grad.size(); ++q)
            out.grad[q] += grad_block[static_cast<size_t>(b)][q];
        out.a_channel_max = std::max(out.a_channel_max, a_channel_block[static_cast<size_t>(b)]);
    }
    return out;
}

TrainResult train(const Policy& start, const ProblemConfig& config, const TrainOptions& opts,
                  uint64_t seed) {
    if (opts.iterations < 0) throw PolicyError("train: iterations must be >= 0");
    TrainResult res;
    res.policy = start;
    if (opts.iterations == 0) return res;

    std::vector<double> m(start.params.size(), 0.0), v(start.params.size(), 0.0);
    double initial_loss = 0.0;
    int bad_streak = 0;

    for (int it = 0; it < opts.iterations; ++it) {
        uint64_t it_seed = hash_combine(seed, static_cast<uint64_t>(it) + 0x17ULL);
        LossGrad lg = loss_and_gradient(res.policy, config, opts.batch, opts.steps, it_seed);
        res.losses.push_back(lg.loss);
        if (it == 0) initial_loss = lg.loss;
        if (lg.loss > 10.0 * std::fabs(initial_loss) + 1e-12) {
            if (++bad_streak >= 50)
                throw TrainingDivergedError(
                    "train: loss exceeded 10x the initial loss for 50 consecutive "
                    "iterations");
        } else {
            bad_streak = 0;
        }
        const double b1c = 1.0 - std::pow(opts.beta1, it + 1);
        const double b2c = 1.0 - std::pow(opts.beta2, it + 1);
        for (size_t q = 0; q < res.policy.params.size(); ++q) {
            m[q] = opts.beta1 * m[q] + (1.0 - opts.beta1) * lg.grad[q];
            v[q] = opts.beta2 * v[q] + (1.0 - opts.beta2) * lg.grad[q] * lg.grad[q];
            res.policy.params[q] -=
                opts.lr * (m[q] / b1c) / (std::sqrt(v[q] / b2c) + opts.adam_eps);
        }
    }
    return res;
}

double a_dependence_metric(const Policy& policy, const ProblemConfig& config, int nt,
                           int nx, int na) {
    if (!policy.extended) throw PolicyError("a_dependence_metric: extended policies only");
    const double T = config.horizon;
    const double a_max = T * config.potential.amplitude();
    const int d = policy.dim;

    double range_over_a = 0.0;
    double global_lo[kMaxDim], global_hi[kMaxDim];
    for (int c = 0; c < d; ++c) {
        global_lo[c] = 1e308;
        global_hi[c] = -1e308;
    }

    std::array<std::array<double, 2>, kMaxDim> bounds{};
    for (int k = 0; k < d; ++k) bounds[static_cast<size_t>(k)] = default_box_bounds(config, k);

    const int nx1 = (d == 2) ? nx : 1;
    for (int it = 0; it < nt; ++it) {
        double t = T * it / std::max(nt - 1, 1);
        for (int ix = 0; ix < nx; ++ix) {
            for (int iy = 0; iy < nx1; ++iy) {
                double x[kMaxDim];
                x[0] = bounds[0][0] + (bounds[0][1] - bounds[0][0]) * ix / (nx - 1);
                if (d == 2)
                    x[1] = bounds[1][0] + (bounds[1][1] - bounds[1][0]) * iy / (nx1 - 1);
                double lo_c[kMaxDim], hi_c[kMaxDim];
                for (int c = 0; c < d; ++c) {
                    lo_c[c] = 1e308;
                    hi_c[c] = -1e308;
                }
                for (int ia = 0; ia < na; ++ia) {
                    double a = a_max * ia / std::max(na - 1, 1);
                    double alpha[kMaxDim];
                    policy.eval(t, x, a, alpha);
                    for (int c = 0; c < d; ++c) {
                        lo_c[c] = std::min(lo_c[c], alpha[c]);
                        hi_c[c] = std::max(hi_c[c], alpha[c]);
                        global_lo[c] = std::min(global_lo[c], alpha[c]);
                        global_hi[c] = std::max(global_hi[c], alpha[c]);
                    }
                }
                for (int c = 0; c < d; ++c)
                    range_over_a = std::max(range_over_a, hi_c[c] - lo_c[c]);
            }
        }
    }
    if (range_over_a == 0.0) return 0.0;
    double global_range = 0.0;
    for (int c = 0; c < d; ++c)
        global_range = std::max(global_range, global_hi[c] - global_lo[c]);
    return range_over_a / std::max(global_range, 1e-300);
}

ControlPtr average_out_a(const Policy& policy, const GibbsFlow& flow_xa) {
    if (!policy.extended) throw PolicyError("average_out_a: extended policies only");
    if (!flow_xa.extended) throw PolicyError("average_out_a: need an (x,a) flow");
    const Grid& g = flow_xa.grid;
    Grid gx = Grid::make1d(g.lo[0], g.hi[0], g.n[0]);
    const double da = g.spacing(1);

    std::vector<VectorField> fields(flow_xa.times.size());
    for (size_t k = 0; k < flow_xa.times.size(); ++k) {
        GridField phi(gx);
        const GridField& mu = flow_xa.mu[k];
        for (int i = 0; i < g.n[0]; ++i) {
            double x = g.coord(0, i);
            double num = 0.0, den = 0.0;
            for (int j = 0; j < g.n[1]; ++j) {
                double wq = (j == 0 || j == g.n[1] - 1) ? 0.5 : 1.0;
                double mass = wq * da * mu(i, j);
                if (mass <= 0.0) continue;
                double a = g.coord(1, j);
                double alpha[kMaxDim];
                policy.eval(flow_xa.times[k], &x, a, alpha);
                num += mass * alpha[0];
                den += mass;
            }
            phi(i) = den > 1e-12 ? num / den : 0.0;
        }
        fields[k][0] = std::move(phi);
    }
    return control_from_fields(gx, flow_xa.times, std::move(fields), 1, false);
}

// ---------------------------------------------------------------------------
// serialization: 16-byte header + little-endian f64 parameters

namespace {
constexpr char kMagic[4] = {'G', 'C', 'P', 'L'};
constexpr uint8_t kVersion = 1;
}  // namespace

void save_policy(const Policy& policy, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw PolicyError("save_policy: cannot open " + path);
    uint8_t header[16] = {};
    std::memcpy(header, kMagic, 4);
    header[4] = kVersion;
    header[5] = policy.extended ? 1 : 0;
    header[6] = static_cast<uint8_t>(policy.dim);
    header[7] = static_cast<uint8_t>(Policy::kHidden);
    uint16_t ind = static_cast<uint16_t>(policy.input_dim());
    uint32_t count = static_cast<uint32_t>(policy.params.size());
    std::memcpy(header + 8, &ind, 2);
    std::memcpy(header + 10, &count, 4);
    f.write(reinterpret_cast<const char*>(header), sizeof(header));
    f.write(reinterpret_cast<const char*>(policy.params.data()),
            static_cast<std::streamsize>(policy.params.size() * sizeof(double)));
    if (!f) throw PolicyError("save_policy: write failed for " + path);
}

Policy load_policy(const std::string& path, const ProblemConfig& config) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw PolicyError("load_policy: cannot open " + path);
    uint8_t header[16];
    f.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!f || std::memcmp(header, kMagic, 4) != 0)
        throw PolicyError("load_policy: bad magic in " + path);
    if (header[4] != kVersion) throw PolicyError("load_policy: unsupported version");
    Policy p;
    p.extended = header[5] != 0;
    p.dim = header[6];
    if (header[7] != Policy::kHidden) throw PolicyError("load_policy: hidden width mismatch");
    uint16_t ind;
    uint32_t count;
    std::memcpy(&ind, header + 8, 2);
    std::memcpy(&count, header + 10, 4);
    set_normalization(p, config);
    if (p.dim != config.dim)
        throw PolicyError("load_policy: policy dimension does not match the config");
    if (ind != p.input_dim() || count != static_cast<uint32_t>(p.param_count()))
        throw PolicyError("load_policy: layer sizes do not match");
    p.params.resize(count);
    f.read(reinterpret_cast<char*>(p.params.data()),
           static_cast<std::streamsize>(count * sizeof(double)));
    if (!f) throw PolicyError("load_policy: truncated file " + path);
    return p;
}

}  // namespace gibbsctrl
