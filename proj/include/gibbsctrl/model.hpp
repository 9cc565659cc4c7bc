#pragma once

#include <array>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>

namespace gibbsctrl {

// State dimension is 1 or 2 throughout; fixed-size storage avoids allocation
// in the per-particle hot loops.
constexpr int kMaxDim = 2;
using Vec = std::array<double, kMaxDim>;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// domain geometry

struct Domain {
    enum class Kind { ball, box };
    Kind kind = Kind::ball;
    Vec center{0.0, 0.0};
    double radius = 1.0;         // ball
    Vec half_widths{1.0, 1.0};   // box

    // Euclidean distance to the closed domain; 0 inside.
    double distance(const double* x, int dim) const;
};

// ---------------------------------------------------------------------------
// soft-killing potential V = amplitude * ramp(d(x,D)/epsilon)

class Potential {
  public:
    Potential() = default;
    Potential(Domain domain, double epsilon, double amplitude, bool smooth = false)
        : domain_(domain), epsilon_(epsilon), amplitude_(amplitude), smooth_(smooth) {
        if (epsilon_ <= 0.0) throw ConfigError("potential: epsilon must be > 0");
        if (amplitude_ < 0.0) throw ConfigError("potential: amplitude must be >= 0");
    }

    double value(const double* x, int dim) const;
    // a.e. gradient; zero at ramp kinks and inside the domain
    void gradient(const double* x, int dim, double* out) const;

    const Domain& domain() const { return domain_; }
    double epsilon() const { return epsilon_; }
    double amplitude() const { return amplitude_; }
    bool smooth() const { return smooth_; }
    // Lipschitz constant of the chosen ramp (linear: n/eps, smoothstep: 1.5 n/eps)
    double lipschitz() const { return (smooth_ ? 1.5 : 1.0) * amplitude_ / epsilon_; }
    // a.e. bound on the second derivative (linear ramp: 0, smoothstep: 6 n/eps^2)
    double second_derivative_bound() const {
        return smooth_ ? 6.0 * amplitude_ / (epsilon_ * epsilon_) : 0.0;
    }

  private:
    Domain domain_{};
    double epsilon_ = 0.1;
    double amplitude_ = 1.0;
    bool smooth_ = false;
};

// ---------------------------------------------------------------------------
// costs

// scalar field with an (optional) gradient, used for state cost and terminal cost
struct ScalarField {
    std::function<double(const double*, int)> value;
    std::function<void(const double*, int, double*)> gradient;  // may be empty

    bool empty() const { return !value; }
    double operator()(const double* x, int dim) const { return value ? value(x, dim) : 0.0; }
    void grad(const double* x, int dim, double* out) const {
        if (gradient) {
            gradient(x, dim, out);
        } else {
            for (int k = 0; k < dim; ++k) out[k] = 0.0;
        }
    }
};

ScalarField zero_field();
ScalarField constant_field(double c);
// g(x) = |x - target|, subgradient 0 at the kink
ScalarField abs_distance_field(const Vec& target);

struct ActionSet {
    bool whole_space = true;
    Vec lo{0.0, 0.0};
    Vec hi{0.0, 0.0};

    // Euclidean projection onto the set (componentwise clamp for boxes)
    void project(double* alpha, int dim) const {
        if (whole_space) return;
        for (int k = 0; k < dim; ++k) {
            if (alpha[k] < lo[k]) alpha[k] = lo[k];
            if (alpha[k] > hi[k]) alpha[k] = hi[k];
        }
    }
};

struct CostSpec {
    ScalarField state_cost;        // \tilde f, default 0
    ScalarField terminal_cost;     // g, default |x - target|
    Vec target{0.0, 0.0};
    ActionSet actions;

    double running(const double* x, const double* alpha, int dim) const {
        double s = 0.0;
        for (int k = 0; k < dim; ++k) s += alpha[k] * alpha[k];
        return 0.5 * s + (state_cost.empty() ? 0.0 : state_cost(x, dim));
    }
    double terminal(const double* x, int dim) const { return terminal_cost(x, dim); }
};

// ---------------------------------------------------------------------------
// initial measure

struct InitialMeasure {
    enum class Kind { point, gaussian };
    Kind kind = Kind::point;
    Vec mean{0.0, 0.0};
    Vec stddev{1.0, 1.0};  // gaussian, diagonal
};

// ---------------------------------------------------------------------------
// problem definition

struct ProblemConfig {
    int dim = 1;
    double horizon = 1.0;
    double sigma = 1.0;
    InitialMeasure init;
    Potential potential;
    CostSpec costs;

    void validate() const {
        if (dim < 1 || dim > kMaxDim) throw ConfigError("dimension must be 1 or 2");
        if (horizon <= 0.0) throw ConfigError("horizon must be > 0");
        if (sigma <= 0.0) throw ConfigError("sigma must be > 0");
        if (init.kind == InitialMeasure::Kind::gaussian) {
            for (int k = 0; k < dim; ++k)
                if (init.stddev[k] <= 0.0) throw ConfigError("initial stddev must be > 0");
        }
    }
};

// d=1, T=1, sigma=1, D=[-1,1], eps=0.1, amplitude 1, f~=0, g(x)=|x|, x0=-1
ProblemConfig default_problem();

// returns the potential evaluator for the configured geometry
Potential build_soft_potential(const ProblemConfig& config);

struct CostSample {
    double running;
    double terminal;
};
CostSample eval_costs(const ProblemConfig& config, const double* x, const double* alpha);

// ---------------------------------------------------------------------------
// feedback controls

// Feedback evaluator. Markovian controls ignore the accumulated-potential
// argument a; extended controls (t,x,a) report uses_accumulated_potential().
class Control {
  public:
    virtual ~Control() = default;
    virtual int state_dim() const = 0;
    virtual bool uses_accumulated_potential() const { return false; }
    virtual void eval(double t, const double* x, double a, double* alpha) const = 0;
};

using ControlPtr = std::shared_ptr<const Control>;

class ZeroControl final : public Control {
  public:
    explicit ZeroControl(int dim) : dim_(dim) {}
    int state_dim() const override { return dim_; }
    void eval(double, const double*, double, double* alpha) const override {
        for (int k = 0; k < dim_; ++k) alpha[k] = 0.0;
    }

  private:
    int dim_;
};

class FunctionControl final : public Control {
  public:
    using Fn = std::function<void(double t, const double* x, double a, double* alpha)>;
    FunctionControl(int dim, bool extended, Fn fn)
        : dim_(dim), extended_(extended), fn_(std::move(fn)) {}
    int state_dim() const override { return dim_; }
    bool uses_accumulated_potential() const override { return extended_; }
    void eval(double t, const double* x, double a, double* alpha) const override {
        fn_(t, x, a, alpha);
    }

  private:
    int dim_;
    bool extended_;
    Fn fn_;
};

// control + eps * direction, used by the first-variation checks
class PerturbedControl final : public Control {
  public:
    PerturbedControl(ControlPtr base, ControlPtr direction, double eps)
        : base_(std::move(base)), dir_(std::move(direction)), eps_(eps) {}
    int state_dim() const override { return base_->state_dim(); }
    bool uses_accumulated_potential() const override {
        return base_->uses_accumulated_potential() || dir_->uses_accumulated_potential();
    }
    void eval(double t, const double* x, double a, double* alpha) const override {
        double b[kMaxDim];
        base_->eval(t, x, a, alpha);
        dir_->eval(t, x, a, b);
        for (int k = 0; k < state_dim(); ++k) alpha[k] += eps_ * b[k];
    }

  private:
    ControlPtr base_;
    ControlPtr dir_;
    double eps_;
};

}  // namespace gibbsctrl
