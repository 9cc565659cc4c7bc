#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gibbsctrl/fpk.hpp"
#include "gibbsctrl/model.hpp"

namespace gibbsctrl {

struct PolicyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainingDivergedError : PolicyError {
    using PolicyError::PolicyError;
};

// Feed-forward feedback control: 2 hidden layers x 32 tanh units, linear
// output of width d. Inputs are affinely normalized (t/T, x over the
// evaluation box, a/(T*amplitude)); the map is fixed from the problem config.
// Parameter layout: W1 [H x in], b1 [H], W2 [H x H], b2 [H], W3 [d x H], b3 [d].
struct Policy {
    static constexpr int kHidden = 32;

    bool extended = false;
    int dim = 1;
    std::vector<double> params;

    double t_scale = 1.0;
    Vec x_center{0.0, 0.0};
    Vec x_scale{1.0, 1.0};
    double a_scale = 1.0;

    int input_dim() const { return 1 + dim + (extended ? 1 : 0); }
    int param_count() const {
        int in = input_dim();
        return kHidden * in + kHidden + kHidden * kHidden + kHidden + dim * kHidden + dim;
    }

    void eval(double t, const double* x, double a, double* alpha) const;
};

// small random initialization, uniform +-1/sqrt(fan_in), deterministic per seed
Policy init_policy(bool extended, const ProblemConfig& config, uint64_t seed,
                   bool zero_init = false);

// same function as the Markovian policy, with a zero-weighted a-input
Policy lift_to_extended(const Policy& markovian);

class PolicyControl final : public Control {
  public:
    explicit PolicyControl(std::shared_ptr<const Policy> p) : policy_(std::move(p)) {}
    int state_dim() const override { return policy_->dim; }
    bool uses_accumulated_potential() const override { return policy_->extended; }
    void eval(double t, const double* x, double a, double* alpha) const override {
        policy_->eval(t, x, a, alpha);
    }

  private:
    std::shared_ptr<const Policy> policy_;
};

ControlPtr make_control(const Policy& policy);

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;
    // largest magnitude routed from the A-recursion back into the state
    // adjoints (the grad V chain); identically 0 when V = 0
    double a_channel_max = 0.0;
};

// Exact reverse-mode pathwise gradient of the discretized self-normalized
// cost: differentiates through the Euler recursion, the A-recursion, the
// Gibbs weights and the normalizing denominators, with the noise draws held
// fixed. No score-function terms.
LossGrad loss_and_gradient(const Policy& policy, const ProblemConfig& config, int n_batch,
                           int steps, uint64_t seed);

struct TrainOptions {
    int iterations = 1000;
    int batch = 100;    // N during training
    int steps = 50;     // Euler steps during training
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
};

struct TrainResult {
    Policy policy;
    std::vector<double> losses;
};

// adaptive-moment descent with fresh seed-derived noise per iteration;
// throws TrainingDivergedError when the loss exceeds 10x the initial loss
// for 50 consecutive iterations
TrainResult train(const Policy& start, const ProblemConfig& config,
                  const TrainOptions& opts, uint64_t seed);

// max over probe (t,x) of the output range over a in [0, T*amplitude],
// normalized by the output's overall range across all probes
double a_dependence_metric(const Policy& policy, const ProblemConfig& config,
                           int nt = 9, int nx = 41, int na = 21);

// phi(t,x) = int psi(t,x,a) mu_t(x,da), conditional weights from the x-slices
// of the extended grid flow; zero where the x-marginal mass is below 1e-12
ControlPtr average_out_a(const Policy& policy, const GibbsFlow& flow_xa);

// flat binary format with a 16-byte header (magic, version, class tag, layer
// sizes); bit-exact round trip
void save_policy(const Policy& policy, const std::string& path);
Policy load_policy(const std::string& path, const ProblemConfig& config);

}  // namespace gibbsctrl
