#include "gibbsctrl/experiments.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "gibbsctrl/coupler.hpp"
#include "gibbsctrl/csv.hpp"
#include "gibbsctrl/particle.hpp"
#include "gibbsctrl/policy.hpp"
#include "gibbsctrl/util.hpp"

namespace gibbsctrl {

namespace {

namespace fs = std::filesystem;

struct Stamp {
    std::string hash;
    long long seed;
};

std::string coord_tag(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    std::string s(buf);
    for (char& c : s)
        if (c == '.') c = 'p';
    return s;
}

void write_resolved_config(const ExperimentConfig& cfg, const RunContext& ctx) {
    fs::create_directories(ctx.out_dir);
    std::ofstream f(fs::path(ctx.out_dir) / "resolved_config.ini", std::ios::binary);
    if (!f) throw ConfigError("cannot write resolved config under " + ctx.out_dir);
    f << "; config_hash = " << to_hex16(config_hash(cfg)) << "\n";
    f << serialize_config(cfg);
}

Grid solution_grid(const ExperimentConfig& cfg) {
    return default_grid(cfg.problem, cfg.solver.grid_points);
}

Grid extended_grid(const ExperimentConfig& cfg) {
    auto b = default_box_bounds(cfg.problem, 0);
    double a_max = cfg.problem.horizon * cfg.problem.potential.amplitude();
    if (a_max <= 0.0) a_max = 1.0;
    return Grid::make2d(b[0], b[1], cfg.solver.grid_points, 0.0, a_max, cfg.solver.a_points);
}

FbOptions fb_options(const ExperimentConfig& cfg) {
    FbOptions o;
    o.tol_mu = cfg.solver.tol_mu;
    o.tol_u = cfg.solver.tol_u;
    o.max_outer = cfg.solver.max_outer;
    o.rho_fb = cfg.solver.fb_damping;
    o.hjb.tol_nonlocal = cfg.solver.tol_nonlocal;
    o.hjb.max_iter = cfg.solver.max_picard;
    o.hjb.damping = cfg.solver.picard_damping;
    o.hjb.a_viscosity = cfg.solver.a_viscosity;
    return o;
}

struct TrainedValue {
    double value = 0.0;
    double stderr_value = 0.0;
    double loss_first = 0.0;
    double loss_last = 0.0;
};

TrainedValue train_and_test(const ExperimentConfig& cfg, bool extended, uint64_t seed,
                            const std::string& save_path = "") {
    Policy p0 = init_policy(extended, cfg.problem, seed);
    TrainOptions topt;
    topt.iterations = cfg.mc.iterations;
    topt.batch = cfg.mc.n_train;
    topt.steps = cfg.mc.train_steps;
    topt.lr = cfg.mc.learning_rate;
    TrainResult tr = train(p0, cfg.problem, topt, hash_combine(seed, 0x7261696eULL));
    if (!save_path.empty()) save_policy(tr.policy, save_path);
    ControlPtr ctrl = make_control(tr.policy);
    ParticleEnsemble ens =
        simulate_ensemble(cfg.problem, *ctrl, cfg.mc.n_test, cfg.mc.steps,
                          hash_combine(seed, 0x74657374ULL));
    CostEstimate est = estimate_cost(ens, cfg.problem, *ctrl);
    TrainedValue tv;
    tv.value = est.value;
    tv.stderr_value = est.stderr_value;
    tv.loss_first = tr.losses.empty() ? 0.0 : tr.losses.front();
    tv.loss_last = tr.losses.empty() ? 0.0 : tr.losses.back();
    return tv;
}

int run_solve(const ExperimentConfig& cfg, const RunContext& ctx, const Stamp& st) {
    Grid grid = solution_grid(cfg);
    FBSolution sol;
    try {
        sol = fb_solve(cfg.problem, grid, cfg.solver.time_steps, FbMode::markovian,
                       fb_options(cfg));
    } catch (const NonConvergenceError& e) {
        std::ofstream trace(fs::path(ctx.out_dir) / "residual_trace.txt");
        for (double r : e.residuals) trace << format_double(r) << "\n";
        std::cerr << "solve: " << e.what() << "\n";
        return 3;
    }
    ControlPtr ctrl = control_from_fields(grid, sol.value.times, sol.control,
                                          sol.components(), false);
    double cost = cost_from_flow(sol.flow, *ctrl, cfg.problem);

    {
        CsvWriter sum(
            (fs::path(ctx.out_dir) / "summary.csv").string(),
            {"t", "log_mass", "mean_potential", "value", "config_hash", "seed"});
        std::vector<double> mv = mean_potential(sol.flow, cfg.problem);
        for (size_t k = 0; k < sol.flow.times.size(); ++k) {
            sum.write_row({sol.flow.times[k], sol.flow.log_mass[k], mv[k],
                           bracket(sol.flow.mu[k], sol.value.u[k]), st.hash, st.seed});
        }
    }
    {
        std::vector<std::string> cols = {"t", "x"};
        if (grid.dim == 2) cols.push_back("y");
        cols.insert(cols.end(), {"mu", "u", "w", "phi_x"});
        if (grid.dim == 2) cols.push_back("phi_y");
        cols.insert(cols.end(), {"config_hash", "seed"});
        CsvWriter fields((fs::path(ctx.out_dir) / "fields.csv").string(), cols);
        for (size_t k = 0; k < sol.flow.times.size(); ++k) {
            for (int idx = 0; idx < grid.size(); ++idx) {
                double x[2];
                grid.node(idx, x);
                std::vector<CsvValue> row = {sol.flow.times[k], x[0]};
                if (grid.dim == 2) row.push_back(x[1]);
                row.push_back(sol.flow.mu[k].v[static_cast<size_t>(idx)]);
                row.push_back(sol.value.u[k].v[static_cast<size_t>(idx)]);
                row.push_back(sol.value.w[k].v[static_cast<size_t>(idx)]);
                row.push_back(sol.control[k][0].v[static_cast<size_t>(idx)]);
                if (grid.dim == 2)
                    row.push_back(sol.control[k][1].v[static_cast<size_t>(idx)]);
                row.push_back(st.hash);
                row.push_back(st.seed);
                fields.write_row(row);
            }
        }
    }
    {
        CsvWriter metrics((fs::path(ctx.out_dir) / "metrics.csv").string(),
                          {"metric", "value", "config_hash", "seed"});
        metrics.write_row({std::string("cost"), cost, st.hash, st.seed});
        metrics.write_row({std::string("converged"),
                           static_cast<long long>(sol.converged ? 1 : 0), st.hash, st.seed});
        metrics.write_row({std::string("outer_iterations"),
                           static_cast<long long>(sol.residual_history.size()), st.hash,
                           st.seed});
    }
    return 0;
}

int run_simulate(const ExperimentConfig& cfg, const RunContext& ctx, const Stamp& st) {
    ZeroControl ctrl(cfg.problem.dim);
    ParticleEnsemble ens =
        simulate_ensemble(cfg.problem, ctrl, cfg.mc.n_test, cfg.mc.steps, ctx.seed);
    CostEstimate est = estimate_cost(ens, cfg.problem, ctrl);

    CsvWriter sum((fs::path(ctx.out_dir) / "ensemble.csv").string(),
                  {"t", "ess", "weight_mean", "mean_x", "var_x", "config_hash", "seed"});
    for (size_t s = 0; s < ens.stored_times.size(); ++s) {
        double sw = 0.0, sw2 = 0.0;
        double mean = 0.0, m2 = 0.0;
        for (int i = 0; i < ens.n; ++i) {
            double w = std::exp(-ens.A[s][static_cast<size_t>(i)]);
            sw += w;
            sw2 += w * w;
            mean += w * ens.X[s][static_cast<size_t>(i) * ens.dim];
        }
        mean /= sw;
        for (int i = 0; i < ens.n; ++i) {
            double w = std::exp(-ens.A[s][static_cast<size_t>(i)]);
            double d = ens.X[s][static_cast<size_t>(i) * ens.dim] - mean;
            m2 += w * d * d;
        }
        sum.write_row({ens.stored_times[s], sw * sw / sw2, sw / ens.n, mean, m2 / sw,
                       st.hash, st.seed});
    }
    CsvWriter metrics((fs::path(ctx.out_dir) / "metrics.csv").string(),
                      {"metric", "value", "config_hash", "seed"});
    metrics.write_row({std::string("cost"), est.value, st.hash, st.seed});
    metrics.write_row({std::string("cost_stderr"), est.stderr_value, st.hash, st.seed});
    return 0;
}

int run_optimize(const ExperimentConfig& cfg, const RunContext& ctx, const Stamp& st) {
    CsvWriter values((fs::path(ctx.out_dir) / "values.csv").string(),
                     {"class", "rep", "value", "stderr", "loss_first", "loss_last",
                      "config_hash", "seed"});
    for (int cls = 0; cls < 2; ++cls) {
        const bool extended = cls == 1;
        const std::string name = extended ? "OL" : "CL";
        std::vector<double> vals;
        double worst_se = 0.0;
        for (int rep = 0; rep < cfg.mc.repetitions; ++rep) {
            uint64_t s = hash_combine(hash_combine(ctx.seed, cfg.mc.base_seed),
                                      static_cast<uint64_t>(rep * 2 + cls));
            std::string path =
                (fs::path(ctx.out_dir) /
                 ("policy_" + name + "_rep" + std::to_string(rep) + ".bin"))
                    .string();
            TrainedValue tv = train_and_test(cfg, extended, s, path);
            values.write_row({name, static_cast<long long>(rep), tv.value, tv.stderr_value,
                              tv.loss_first, tv.loss_last, st.hash, st.seed});
            vals.push_back(tv.value);
            worst_se = std::max(worst_se, tv.stderr_value);
        }
        double mean = 0.0, lo = vals[0], hi = vals[0];
        for (double v : vals) {
            mean += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        mean /= static_cast<double>(vals.size());
        values.write_row({name + "_mean", static_cast<long long>(-1), mean, worst_se, lo, hi,
                          st.hash, st.seed});
    }
    return 0;
}

int run_compare(const ExperimentConfig& cfg, const RunContext& ctx, const Stamp& st) {
    struct Row {
        double x0, amplitude;
        std::string cls;
        double value, se;
    };
    const auto& x0s = cfg.sweep.x0_list;
    const auto& amps = cfg.sweep.amplitude_list;
    if (x0s.empty() || amps.empty()) throw ConfigError("compare: sweep lists must be non-empty");

    const int n_points = static_cast<int>(x0s.size() * amps.size());
    std::vector<std::vector<Row>> results(static_cast<size_t>(n_points) * 2);

    // sweep points are independent; the worker pool writes into its own slots
    parallel_for_tasks(
        n_points * 2,
        [&](int task) {
            int point = task / 2;
            bool extended = task % 2 == 1;
            double x0 = x0s[static_cast<size_t>(point) % x0s.size()];
            double amp = amps[static_cast<size_t>(point) / x0s.size()];
            ExperimentConfig local = cfg;
            apply_override(local, "problem.x0", format_double(x0));
            apply_override(local, "problem.amplitude", format_double(amp));

            std::vector<double> vals;
            double se_acc = 0.0;
            for (int rep = 0; rep < cfg.mc.repetitions; ++rep) {
                uint64_t s = hash_combine(
                    hash_combine(ctx.seed, static_cast<uint64_t>(task)),
                    static_cast<uint64_t>(rep) + cfg.mc.base_seed);
                TrainedValue tv = train_and_test(local, extended, s);
                vals.push_back(tv.value);
                se_acc += tv.stderr_value * tv.stderr_value;
            }
            double mean = 0.0;
            for (double v : vals) mean += v;
            mean /= static_cast<double>(vals.size());
            double spread = 0.0;
            for (double v : vals) spread += (v - mean) * (v - mean);
            spread = vals.size() > 1
                         ? std::sqrt(spread / (static_cast<double>(vals.size()) - 1.0) /
                                     static_cast<double>(vals.size()))
                         : 0.0;
            // seed spread plus mean MC error
            double se = std::sqrt(spread * spread +
                                  se_acc / static_cast<double>(vals.size() * vals.size()));
            results[static_cast<size_t>(task)].push_back(
                {x0, amp, extended ? "OL" : "CL", mean, se});
        },
        ctx.threads);

    CsvWriter out((fs::path(ctx.out_dir) / "compare.csv").string(),
                  {"x0", "amplitude", "class", "value", "stderr", "config_hash", "seed"});
    for (const auto& rows : results)
        for (const Row& r : rows)
            out.write_row({r.x0, r.amplitude, r.cls, r.value, r.se, st.hash, st.seed});
    // per-point artifacts named by sweep coordinates
    for (const auto& rows : results)
        for (const Row& r : rows) {
            std::string name = "compare_x0_" + coord_tag(r.x0) + "_n_" +
                               coord_tag(r.amplitude) + "_" + r.cls + ".csv";
            CsvWriter point((fs::path(ctx.out_dir) / name).string(),
                            {"x0", "amplitude", "class", "value", "stderr", "config_hash",
                             "seed"});
            point.write_row({r.x0, r.amplitude, r.cls, r.value, r.se, st.hash, st.seed});
        }
    return 0;
}

int run_limit_sweep(const ExperimentConfig& cfg, const RunContext& ctx, const Stamp& st) {
    if (cfg.sweep.amplitude_list.empty())
        throw ConfigError("limit-sweep: amplitude list must be non-empty");
    ZeroControl ctrl(cfg.problem.dim);
    HardKillResult exit_res =
        hard_kill_cost(cfg.problem, ctrl, cfg.mc.n_test, cfg.mc.steps, ctx.seed);

    CsvWriter out((fs::path(ctx.out_dir) / "limit_sweep.csv").string(),
                  {"amplitude", "j_soft", "j_soft_stderr", "j_exit", "j_exit_stderr", "gap",
                   "config_hash", "seed"});
    for (double n : cfg.sweep.amplitude_list) {
        ExperimentConfig local = cfg;
        apply_override(local, "problem.amplitude", format_double(n));
        ParticleEnsemble ens = simulate_ensemble(local.problem, ctrl, cfg.mc.n_test,
                                                 cfg.mc.steps, ctx.seed);
        CostEstimate est = estimate_cost(ens, local.problem, ctrl);
        out.write_row({n, est.value, est.stderr_value, exit_res.value,
                       exit_res.stderr_value, std::fabs(est.value - exit_res.value), st.hash,
                       st.seed});
    }
    return 0;
}

int run_certify(const ExperimentConfig& cfg, const RunContext& ctx, const Stamp& st) {
    Grid grid = solution_grid(cfg);
    const FBSolution* solved_ptr = nullptr;
    FBSolution sol;
    try {
        sol = fb_solve(cfg.problem, grid, cfg.solver.time_steps, FbMode::markovian,
                       fb_options(cfg));
        solved_ptr = &sol;
    } catch (const NonConvergenceError&) {
        // certificate is still well defined without a measured rate
    }
    ShortTimeCertificate cert = shorttime_certificate(cfg.problem, solved_ptr);
    CsvWriter out((fs::path(ctx.out_dir) / "certificate.csv").string(),
                  {"c_g", "c_f", "c_df", "c_d2f", "c_dv", "c_d2v", "c2", "c3", "gamma2",
                   "gamma3", "k_horizon", "satisfied", "measured_rate", "config_hash",
                   "seed"});
    out.write_row({cert.c_g, cert.c_f, cert.c_df, cert.c_d2f, cert.c_dv, cert.c_d2v, cert.c2,
                   cert.c3, cert.gamma2, cert.gamma3, cert.k_horizon,
                   static_cast<long long>(cert.satisfied ? 1 : 0), cert.measured_rate,
                   st.hash, st.seed});
    return 0;
}

}  // namespace

int run_subcommand(const std::string& name, const ExperimentConfig& cfg,
                   const RunContext& ctx) {
    // worker-pool size: --threads wins, then GIBBSCTRL_THREADS, then hardware
    if (ctx.threads > 0) {
        setenv("GIBBSCTRL_THREADS", std::to_string(ctx.threads).c_str(), 1);
    }
    fs::create_directories(ctx.out_dir);
    write_resolved_config(cfg, ctx);
    Stamp st{to_hex16(config_hash(cfg)), static_cast<long long>(ctx.seed)};

    if (name == "solve") return run_solve(cfg, ctx, st);
    if (name == "simulate") return run_simulate(cfg, ctx, st);
    if (name == "optimize") return run_optimize(cfg, ctx, st);
    if (name == "compare") return run_compare(cfg, ctx, st);
    if (name == "limit-sweep") return run_limit_sweep(cfg, ctx, st);
    if (name == "certify") return run_certify(cfg, ctx, st);
    std::cerr << "unknown subcommand: " << name << "\n";
    return 2;
}

}  // namespace gibbsctrl
