#pragma once

#include <stdexcept>
#include <vector>

#include "gibbsctrl/fpk.hpp"
#include "gibbsctrl/grid.hpp"
#include "gibbsctrl/model.hpp"

namespace gibbsctrl {

struct HjbError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Picard iteration failed; carries the residual trace for diagnosis.
struct NonConvergenceError : HjbError {
    NonConvergenceError(const std::string& what, std::vector<double> trace)
        : HjbError(what), residuals(std::move(trace)) {}
    std::vector<double> residuals;
};

struct HjbOptions {
    double tol_nonlocal = 1e-8;   // sup_t |delta s| stopping threshold
    int max_iter = 200;
    double damping = 0.5;         // Picard relaxation on s(t) = <mu_t, u_t>
    double w_floor = 1e-150;      // floor before taking logarithms
    double a_viscosity = 0.0;     // optional regularization of the a-transport
};

// Backward co-state u(t,x) and its Hopf-Cole companion w = exp(-u).
struct ValueField {
    Grid grid;
    std::vector<double> times;
    std::vector<GridField> u;
    std::vector<GridField> w;
    bool extended = false;

    // diagnostics from the solve
    std::vector<double> nonlocal;          // s(t) = <mu_t, u_t> at convergence
    std::vector<double> picard_residuals;  // damped-update residual per iteration
    double picard_rate = 0.0;              // geometric mean of residual ratios
    double source_sup = 0.0;               // sup |F| over the final sweep
    long floor_activations = 0;            // w-floor hits across the final sweep
};

// One backward Hopf-Cole sweep with the non-local scalar frozen:
//   0 = d_t w + 1/2 sigma^2 Lap w - F w,   w_T = exp(-g),
//   F = -(V - <mu_t,V>) u + V * frozen_nonlocal(t) + f~,
// where the local u in F is taken from the already-computed time level with a
// midpoint corrector pass. Crank-Nicolson diffusion with log-linear ghost
// extrapolation at the truncation boundary; exact exponential zero-order
// factor; w floored at w_floor before logging.
ValueField solve_linear_hopfcole(const GibbsFlow& flow,
                                 const std::vector<double>& frozen_nonlocal,
                                 const ProblemConfig& config,
                                 const HjbOptions& opts = {});

// Damped Picard iteration on s(t) = <mu_t, u_t> around solve_linear_hopfcole.
ValueField solve_hjb_nonlocal(const GibbsFlow& flow, const ProblemConfig& config,
                              const HjbOptions& opts = {});

// Extended-class backward solve on the (x,a) grid of flow_xa: adds upwind
// V(x) d_a transport (characteristics run toward smaller a going backward;
// zero-gradient condition at the top of the a-axis).
ValueField solve_hjb_extended(const GibbsFlow& flow_xa, const ProblemConfig& config,
                              const HjbOptions& opts = {});

// ---------------------------------------------------------------------------
// a-priori bound report

struct AprioriBoundRow {
    double t;
    double mu_u;           // <mu_t, u_t>
    double weak_bound;     // exp(2(T-t))(|f~|+|g|) + exp(T)/4 (exp(2(T-t))+1)
    bool weak_ok;
    double u_sup;          // ||u_t||_inf
    double strong_bound;   // (e^t/2)(e^{2(T-t)}-1)|f~| + (e^{2T}/2) K_phi + e^T |g|
    bool strong_ok;
    double smooth_bound;   // e^{2T-t}(|g| + |F|/2) + 1e-6
    bool smooth_ok;
};

struct AprioriReport {
    std::vector<AprioriBoundRow> rows;
    double k_phi = 0.0;       // discrete int int |grad u|^2 dmu dt
    double f_sup = 0.0;       // grid sup |f~|
    double g_sup = 0.0;       // grid sup |g|
    double source_sup = 0.0;  // |F| used by the smooth bound
    bool all_weak = true, all_strong = true, all_smooth = true;
    bool all_ok() const { return all_weak && all_strong && all_smooth; }
};

AprioriReport apriori_bounds(const ValueField& vf, const GibbsFlow& flow,
                             const ProblemConfig& config);

// terminal cost sampled on a grid
GridField terminal_cost_field(const ProblemConfig& config, const Grid& grid);

// <mu, field> with the trapezoid weights of the common grid
double bracket(const GridField& mu, const GridField& field);

}  // namespace gibbsctrl
