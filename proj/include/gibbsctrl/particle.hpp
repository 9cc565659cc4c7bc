#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gibbsctrl/grid.hpp"
#include "gibbsctrl/model.hpp"

namespace gibbsctrl {

struct EstimatorDegenerateError : std::runtime_error {
    EstimatorDegenerateError(const std::string& what, double max_a)
        : std::runtime_error(what), max_accumulated(max_a) {}
    double max_accumulated;
};

constexpr int kStderrBlocks = 20;

// Euler-Maruyama ensemble with Gibbs weights exp(-A_i). Full trajectories are
// snapshotted at a stride (memory cap), while the sums entering the
// self-normalized estimator are accumulated at full time resolution during
// the simulation, in kStderrBlocks contiguous index blocks. Block sums are
// combined in fixed order, so results are independent of the thread count.
struct ParticleEnsemble {
    int n = 0;
    int dim = 1;
    int steps = 0;
    double dt = 0.0;
    uint64_t seed = 0;
    bool extended_control = false;
    double max_accumulated = 0.0;  // max_i A_i(T)

    std::vector<double> stored_times;
    std::vector<int> stored_steps;
    std::vector<std::vector<double>> X;  // [stored][i*dim + k]
    std::vector<std::vector<double>> A;  // [stored][i]

    // full-resolution block sums for the cost estimator
    std::vector<std::array<double, kStderrBlocks>> running_f;   // n = 0..steps-1
    std::vector<std::array<double, kStderrBlocks>> weight_sum;  // n = 0..steps
    std::array<double, kStderrBlocks> terminal_g{};

    int terminal_index() const { return static_cast<int>(stored_times.size()) - 1; }
    int block_of(int i) const { return static_cast<int>(static_cast<long>(i) * kStderrBlocks / n); }
};

// X_{t+dt} = X_t + control(t, X_t, A_t) dt + sigma sqrt(dt) xi, with the
// additive functional updated by the left-endpoint rule A += V(X_t) dt.
// store_stride 0 picks the largest stride that keeps snapshots under ~200 MB;
// the initial and terminal nodes are always stored.
ParticleEnsemble simulate_ensemble(const ProblemConfig& config, const Control& control,
                                   int n_particles, int steps, uint64_t seed,
                                   int store_stride = 0);

struct CostEstimate {
    double value = 0.0;
    double stderr_value = 0.0;
};

// Self-normalized estimator of the soft-killing cost; stderr by nonparametric
// replication over the kStderrBlocks index blocks.
CostEstimate estimate_cost(const ParticleEnsemble& ens, const ProblemConfig& config,
                           const Control& control);

struct WeightedSample {
    int dim = 1;
    std::vector<double> positions;  // i*dim + k
    std::vector<double> weights;    // normalized
};

// atoms X_i(t) with weights exp(-A_i(t)) / sum_j exp(-A_j(t))
WeightedSample estimate_gibbs_measure(const ParticleEnsemble& ens, int stored_index);

// 1-D W1 distance between the weighted sample and a grid density
double sample_w1_distance(const WeightedSample& sample, const GridField& density);

struct HardKillResult {
    double value = 0.0;
    double stderr_value = 0.0;
    std::vector<double> survival;  // fraction alive at each mesh time
};

// Hard-killing oracle: particles die at the first mesh time outside the
// closed domain; conditional estimators over survivors.
HardKillResult hard_kill_cost(const ProblemConfig& config, const Control& control,
                              int n_particles, int steps, uint64_t seed);

// alpha * 1_{|alpha| <= bound} on the Euclidean norm (whole vector zeroed)
ControlPtr truncate_control(ControlPtr control, double bound);

}  // namespace gibbsctrl
