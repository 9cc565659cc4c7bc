#include "gibbsctrl/particle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gibbsctrl/rng.hpp"
#include "gibbsctrl/util.hpp"

namespace gibbsctrl {

namespace {

// contiguous particle range of one stderr block
std::pair<int, int> block_range(int n, int b) {
    long lo = static_cast<long>(n) * b / kStderrBlocks;
    long hi = static_cast<long>(n) * (b + 1) / kStderrBlocks;
    return {static_cast<int>(lo), static_cast<int>(hi)};
}

int pick_stride(int n, int steps, int dim, int requested) {
    if (requested > 0) return requested;
    const double budget = 2e8;  // bytes for snapshots
    double per_node = static_cast<double>(n) * (dim + 1) * 8.0;
    double nodes = budget / per_node;
    if (nodes >= steps + 1) return 1;
    int stride = static_cast<int>(std::ceil((steps + 1) / std::max(nodes, 2.0)));
    return std::max(stride, 1);
}

void initial_state(const ProblemConfig& config, RngStream& rng, double* x) {
    if (config.init.kind == InitialMeasure::Kind::point) {
        for (int k = 0; k < config.dim; ++k) x[k] = config.init.mean[k];
    } else {
        for (int k = 0; k < config.dim; ++k)
            x[k] = config.init.mean[k] + config.init.stddev[k] * rng.next_normal();
    }
}

double block_sum(const std::array<double, kStderrBlocks>& a) {
    double s = 0.0;
    for (double v : a) s += v;
    return s;
}

}  // namespace

ParticleEnsemble simulate_ensemble(const ProblemConfig& config, const Control& control,
                                   int n_particles, int steps, uint64_t seed,
                                   int store_stride) {
    config.validate();
    if (n_particles < 2) throw ConfigError("simulate_ensemble: need N >= 2");
    if (steps < 1) throw ConfigError("simulate_ensemble: need steps >= 1");
    if (control.state_dim() != config.dim)
        throw ConfigError("simulate_ensemble: control dimension mismatch");

    const int d = config.dim;
    const double T = config.horizon;
    const double dt = T / steps;
    const double noise = config.sigma * std::sqrt(dt);
    const int stride = pick_stride(n_particles, steps, d, store_stride);

    ParticleEnsemble ens;
    ens.n = n_particles;
    ens.dim = d;
    ens.steps = steps;
    ens.dt = dt;
    ens.seed = seed;
    ens.extended_control = control.uses_accumulated_potential();

    for (int n = 0; n <= steps; n += stride) ens.stored_steps.push_back(n);
    if (ens.stored_steps.back() != steps) ens.stored_steps.push_back(steps);
    for (int n : ens.stored_steps) ens.stored_times.push_back(n * dt);
    ens.X.assign(ens.stored_steps.size(),
                 std::vector<double>(static_cast<size_t>(n_particles) * d));
    ens.A.assign(ens.stored_steps.size(), std::vector<double>(static_cast<size_t>(n_particles)));

    ens.running_f.assign(static_cast<size_t>(steps), {});
    ens.weight_sum.assign(static_cast<size_t>(steps) + 1, {});

    std::vector<double> max_a_per_block(kStderrBlocks, 0.0);

    parallel_for_tasks(kStderrBlocks, [&](int b) {
        auto [ilo, ihi] = block_range(n_particles, b);
        std::vector<double> rf(static_cast<size_t>(steps), 0.0);
        std::vector<double> ws(static_cast<size_t>(steps) + 1, 0.0);
        double tg = 0.0;
        double max_a = 0.0;

        for (int i = ilo; i < ihi; ++i) {
            RngStream rng = RngStream::for_trajectory(seed, static_cast<uint64_t>(i));
            double x[kMaxDim] = {0.0, 0.0};
            double alpha[kMaxDim];
            initial_state(config, rng, x);
            double a = 0.0;
            size_t next_store = 0;
            for (int n = 0; n < steps; ++n) {
                if (next_store < ens.stored_steps.size() &&
                    ens.stored_steps[next_store] == n) {
                    for (int k = 0; k < d; ++k)
                        ens.X[next_store][static_cast<size_t>(i) * d + k] = x[k];
                    ens.A[next_store][static_cast<size_t>(i)] = a;
                    ++next_store;
                }
                const double t = n * dt;
                control.eval(t, x, a, alpha);
                const double w = std::exp(-a);
                rf[static_cast<size_t>(n)] += config.costs.running(x, alpha, d) * w;
                ws[static_cast<size_t>(n)] += w;
                a += config.potential.value(x, d) * dt;  // left endpoint
                for (int k = 0; k < d; ++k) x[k] += alpha[k] * dt + noise * rng.next_normal();
            }
            // terminal node
            for (int k = 0; k < d; ++k)
                ens.X.back()[static_cast<size_t>(i) * d + k] = x[k];
            ens.A.back()[static_cast<size_t>(i)] = a;
            const double wT = std::exp(-a);
            ws[static_cast<size_t>(steps)] += wT;
            tg += config.costs.terminal(x, d) * wT;
            max_a = std::max(max_a, a);
        }
        for (int n = 0; n < steps; ++n) {
            ens.running_f[static_cast<size_t>(n)][static_cast<size_t>(b)] =
                rf[static_cast<size_t>(n)];
            ens.weight_sum[static_cast<size_t>(n)][static_cast<size_t>(b)] =
                ws[static_cast<size_t>(n)];
        }
        ens.weight_sum[static_cast<size_t>(steps)][static_cast<size_t>(b)] =
            ws[static_cast<size_t>(steps)];
        ens.terminal_g[static_cast<size_t>(b)] = tg;
        max_a_per_block[static_cast<size_t>(b)] = max_a;
    });

    ens.max_accumulated = *std::max_element(max_a_per_block.begin(), max_a_per_block.end());
    return ens;
}

CostEstimate estimate_cost(const ParticleEnsemble& ens, const ProblemConfig& config,
                           const Control& control) {
    if (control.state_dim() != config.dim)
        throw ConfigError("estimate_cost: control dimension mismatch");
    if (control.uses_accumulated_potential() != ens.extended_control)
        throw ConfigError("estimate_cost: ensemble simulated under a different control class");

    auto degenerate = [&](int n) {
        throw EstimatorDegenerateError(
            "estimate_cost: all Gibbs weights underflowed at step " + std::to_string(n) +
                " (max accumulated potential " + std::to_string(ens.max_accumulated) + ")",
            ens.max_accumulated);
    };

    CostEstimate est;
    for (int n = 0; n < ens.steps; ++n) {
        double sw = block_sum(ens.weight_sum[static_cast<size_t>(n)]);
        if (!(sw > 0.0)) degenerate(n);
        est.value += ens.dt * block_sum(ens.running_f[static_cast<size_t>(n)]) / sw;
    }
    double swT = block_sum(ens.weight_sum[static_cast<size_t>(ens.steps)]);
    if (!(swT > 0.0)) degenerate(ens.steps);
    est.value += block_sum(ens.terminal_g) / swT;

    // nonparametric replication over the index blocks
    std::vector<double> reps;
    for (int b = 0; b < kStderrBlocks; ++b) {
        auto [ilo, ihi] = block_range(ens.n, b);
        if (ihi <= ilo) continue;
        if (!(ens.weight_sum[static_cast<size_t>(ens.steps)][static_cast<size_t>(b)] > 0.0))
            continue;
        double j = 0.0;
        bool ok = true;
        for (int n = 0; n < ens.steps && ok; ++n) {
            double sw = ens.weight_sum[static_cast<size_t>(n)][static_cast<size_t>(b)];
            if (!(sw > 0.0)) {
                ok = false;
                break;
            }
            j += ens.dt * ens.running_f[static_cast<size_t>(n)][static_cast<size_t>(b)] / sw;
        }
        if (!ok) continue;
        j += ens.terminal_g[static_cast<size_t>(b)] /
             ens.weight_sum[static_cast<size_t>(ens.steps)][static_cast<size_t>(b)];
        reps.push_back(j);
    }
    if (reps.size() >= 2) {
        double mean = 0.0;
        for (double r : reps) mean += r;
        mean /= static_cast<double>(reps.size());
        double var = 0.0;
        for (double r : reps) var += (r - mean) * (r - mean);
        var /= static_cast<double>(reps.size() - 1);
        est.stderr_value = std::sqrt(var / static_cast<double>(reps.size()));
    }
    return est;
}

WeightedSample estimate_gibbs_measure(const ParticleEnsemble& ens, int stored_index) {
    if (stored_index < 0 || stored_index >= static_cast<int>(ens.stored_times.size()))
        throw ConfigError("estimate_gibbs_measure: stored index out of range");
    WeightedSample s;
    s.dim = ens.dim;
    s.positions = ens.X[static_cast<size_t>(stored_index)];
    s.weights.resize(static_cast<size_t>(ens.n));
    double total = 0.0;
    for (int i = 0; i < ens.n; ++i) {
        double w = std::exp(-ens.A[static_cast<size_t>(stored_index)][static_cast<size_t>(i)]);
        s.weights[static_cast<size_t>(i)] = w;
        total += w;
    }
    if (!(total > 0.0))
        throw EstimatorDegenerateError("estimate_gibbs_measure: all weights underflowed",
                                       ens.max_accumulated);
    for (double& w : s.weights) w /= total;
    return s;
}

double sample_w1_distance(const WeightedSample& sample, const GridField& density) {
    if (sample.dim != 1)
        throw ContractViolation("sample_w1_distance: 1-D only");
    return wasserstein1_atoms_vs_density(sample.positions, sample.weights, density);
}

HardKillResult hard_kill_cost(const ProblemConfig& config, const Control& control,
                              int n_particles, int steps, uint64_t seed) {
    config.validate();
    if (config.init.kind == InitialMeasure::Kind::point &&
        config.potential.domain().distance(config.init.mean.data(), config.dim) > 0.0)
        throw ConfigError("hard_kill_cost: x0 must lie in the domain");

    const int d = config.dim;
    const double dt = config.horizon / steps;
    const double noise = config.sigma * std::sqrt(dt);

    // per block, per step: survivor running-cost sums and counts
    std::vector<std::array<double, kStderrBlocks>> run_sum(
        static_cast<size_t>(steps), std::array<double, kStderrBlocks>{});
    std::vector<std::array<long, kStderrBlocks>> alive_cnt(
        static_cast<size_t>(steps) + 1, std::array<long, kStderrBlocks>{});
    std::array<double, kStderrBlocks> term_sum{};

    parallel_for_tasks(kStderrBlocks, [&](int b) {
        auto [ilo, ihi] = block_range(n_particles, b);
        for (int i = ilo; i < ihi; ++i) {
            RngStream rng = RngStream::for_trajectory(seed, static_cast<uint64_t>(i));
            double x[kMaxDim] = {0.0, 0.0};
            double alpha[kMaxDim];
            initial_state(config, rng, x);
            bool alive = true;
            for (int n = 0; n < steps && alive; ++n) {
                if (config.potential.domain().distance(x, d) > 0.0) {
                    alive = false;
                    break;
                }
                ++alive_cnt[static_cast<size_t>(n)][static_cast<size_t>(b)];
                control.eval(n * dt, x, 0.0, alpha);
                run_sum[static_cast<size_t>(n)][static_cast<size_t>(b)] +=
                    config.costs.running(x, alpha, d);
                for (int k = 0; k < d; ++k) x[k] += alpha[k] * dt + noise * rng.next_normal();
            }
            if (alive && config.potential.domain().distance(x, d) == 0.0) {
                ++alive_cnt[static_cast<size_t>(steps)][static_cast<size_t>(b)];
                term_sum[static_cast<size_t>(b)] += config.costs.terminal(x, d);
            }
        }
    });

    HardKillResult res;
    res.survival.resize(static_cast<size_t>(steps) + 1);
    for (int n = 0; n <= steps; ++n) {
        long cnt = 0;
        for (int b = 0; b < kStderrBlocks; ++b)
            cnt += alive_cnt[static_cast<size_t>(n)][static_cast<size_t>(b)];
        res.survival[static_cast<size_t>(n)] = static_cast<double>(cnt) / n_particles;
        if (cnt == 0)
            throw EstimatorDegenerateError(
                "hard_kill_cost: no survivors at step " + std::to_string(n), 0.0);
    }
    for (int n = 0; n < steps; ++n) {
        long cnt = 0;
        double s = 0.0;
        for (int b = 0; b < kStderrBlocks; ++b) {
            cnt += alive_cnt[static_cast<size_t>(n)][static_cast<size_t>(b)];
            s += run_sum[static_cast<size_t>(n)][static_cast<size_t>(b)];
        }
        res.value += dt * s / static_cast<double>(cnt);
    }
    {
        long cnt = 0;
        double s = 0.0;
        for (int b = 0; b < kStderrBlocks; ++b) {
            cnt += alive_cnt[static_cast<size_t>(steps)][static_cast<size_t>(b)];
            s += term_sum[static_cast<size_t>(b)];
        }
        res.value += s / static_cast<double>(cnt);
    }

    // block replication, skipping blocks that lost everyone
    std::vector<double> reps;
    for (int b = 0; b < kStderrBlocks; ++b) {
        double j = 0.0;
        bool ok = true;
        for (int n = 0; n < steps && ok; ++n) {
            long cnt = alive_cnt[static_cast<size_t>(n)][static_cast<size_t>(b)];
            if (cnt == 0) {
                ok = false;
                break;
            }
            j += dt * run_sum[static_cast<size_t>(n)][static_cast<size_t>(b)] /
                 static_cast<double>(cnt);
        }
        long cntT = alive_cnt[static_cast<size_t>(steps)][static_cast<size_t>(b)];
        if (!ok || cntT == 0) continue;
        j += term_sum[static_cast<size_t>(b)] / static_cast<double>(cntT);
        reps.push_back(j);
    }
    if (reps.size() >= 2) {
        double mean = 0.0;
        for (double r : reps) mean += r;
        mean /= static_cast<double>(reps.size());
        double var = 0.0;
        for (double r : reps) var += (r - mean) * (r - mean);
        var /= static_cast<double>(reps.size() - 1);
        res.stderr_value = std::sqrt(var / static_cast<double>(reps.size()));
    }
    return res;
}

namespace {

class TruncatedControl final : public Control {
  public:
    TruncatedControl(ControlPtr inner, double bound)
        : inner_(std::move(inner)), bound_(bound) {
        if (!(bound_ > 0.0)) throw ConfigError("truncate_control: bound must be > 0");
    }
    int state_dim() const override { return inner_->state_dim(); }
    bool uses_accumulated_potential() const override {
        return inner_->uses_accumulated_potential();
    }
    void eval(double t, const double* x, double a, double* alpha) const override {
        inner_->eval(t, x, a, alpha);
        double s = 0.0;
        for (int k = 0; k < state_dim(); ++k) s += alpha[k] * alpha[k];
        if (s > bound_ * bound_) {
            for (int k = 0; k < state_dim(); ++k) alpha[k] = 0.0;
        }
    }

  private:
    ControlPtr inner_;
    double bound_;
};

}  // namespace

ControlPtr truncate_control(ControlPtr control, double bound) {
    return std::make_shared<TruncatedControl>(std::move(control), bound);
}

}  // namespace gibbsctrl
