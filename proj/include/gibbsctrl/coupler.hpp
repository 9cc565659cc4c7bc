#pragma once

#include <memory>
#include <vector>

#include "gibbsctrl/fpk.hpp"
#include "gibbsctrl/hjb.hpp"

namespace gibbsctrl {

struct FbOptions {
    double tol_mu = 1e-6;   // W1 residual between successive flows (L1 in 2-D)
    double tol_u = 1e-6;    // sup-norm residual between successive co-states
    int max_outer = 100;
    double rho_fb = 0.5;    // relaxation on the extracted control
    HjbOptions hjb{};
};

struct FbResidual {
    int iteration;
    double flow_residual;
    double value_residual;
};

enum class FbMode { markovian, extended };

// Converged forward-backward pair with the extracted feedback control.
struct FBSolution {
    GibbsFlow flow;
    ValueField value;
    // per stored time, per component: Pi_A(-grad u); component 0 only for
    // extended solutions (the control acts on x)
    std::vector<VectorField> control;
    std::vector<FbResidual> residual_history;
    bool converged = false;
    bool extended = false;
    int components() const { return extended ? 1 : flow.grid.dim; }
};

// Damped Picard coupling of solve_fpk and solve_hjb_nonlocal (or the extended
// pair): start from zero control, alternate forward/backward solves, relax the
// extracted control by rho_fb. When the residual plateaus for 10 iterations
// the relaxation halves, down to 1/16 of the initial value.
FBSolution fb_solve(const ProblemConfig& config, const Grid& grid, int steps,
                    FbMode mode, const FbOptions& opts = {});

// feedback evaluator phi(t,x) = Pi_A(-grad u) with multilinear interpolation
// in space and piecewise-constant interpolation between stored times
ControlPtr extract_control(const ValueField& vf, const ActionSet& actions);

// control evaluator backed by per-time grid fields (shared by extract_control
// and the policy module's a-averaging)
ControlPtr control_from_fields(const Grid& grid, std::vector<double> times,
                               std::vector<VectorField> fields, int components,
                               bool extended);

// d/deps J(phi + eps beta) at eps = 0: int_0^T <beta (grad u + phi), mu> dt
double gateaux_derivative(const FBSolution& sol, const Control& beta);

// deterministic PDE-side cost: sum_t dt <f(., phi_t), mu_t> + <g, mu_T>
double cost_from_flow(const GibbsFlow& flow, const Control& control,
                      const ProblemConfig& config);

// ---------------------------------------------------------------------------
// short-time existence certificate (appendix constants)

struct ShortTimeCertificate {
    double c_g = 0.0;      // terminal-cost surrogate: max(sup|g|, sup|grad g|)
    double c_f = 0.0;      // sup |f~|
    double c_df = 0.0;     // sup |grad f~|
    double c_d2f = 0.0;    // sup |D2 f~|
    double c_dv = 0.0;     // Lipschitz constant of V
    double c_d2v = 0.0;    // a.e. bound on D2 V
    double c2 = 0.0;       // Gamma_2(C_g)
    double c3 = 0.0;       // C_3(C_2)
    double gamma2 = 0.0;   // 3 (C_g+1)^2 exp(6 C_g)
    double gamma3 = 0.0;   // C_2 + C_3(C_2)
    double k_horizon = 0.0;  // K(T, C_g)
    bool satisfied = false;  // K(T, C_g) <= Gamma_2(C_g)
    double measured_rate = 0.0;  // outer-iteration contraction, when available
};

// Computes Gamma_2, Gamma_3 and K(T,C_g) from grid-estimated cost surrogates
// and the potential's analytic smoothness constants; when a solved FBSolution
// is supplied its measured outer contraction rate is attached for comparison.
ShortTimeCertificate shorttime_certificate(const ProblemConfig& config,
                                           const FBSolution* solved = nullptr);

}  // namespace gibbsctrl
