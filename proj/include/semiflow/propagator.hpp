#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "semiflow/measure_space.hpp"

namespace semiflow {

/// Dense square matrix, row-major.
struct DenseMatrix {
    std::size_t n = 0;
    std::vector<double> a;

    DenseMatrix() = default;
    explicit DenseMatrix(std::size_t n_, double fill = 0.0) : n(n_), a(n_ * n_, fill) {}
    static DenseMatrix identity(std::size_t n);

    double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
    double* row(std::size_t i) { return a.data() + i * n; }
    const double* row(std::size_t i) const { return a.data() + i * n; }

    std::vector<double> apply(std::span<const double> x) const;            // A x
    std::vector<double> apply_transpose(std::span<const double> x) const;  // A^T x
    DenseMatrix multiply(const DenseMatrix& rhs) const;                    // this * rhs
    double max_abs() const;
};

/// Sparse generator layout: a diagonal plus an off-diagonal CSR block.
/// The split lets step updates keep the diagonal term factored as
/// (1 + dt*diag)*row, which preserves nodewise nonnegativity under CFL.
struct GeneratorMatrix {
    std::size_t n = 0;
    std::vector<double> diag;             // L_ii
    std::vector<std::size_t> row_ptr;     // size n+1, off-diagonal CSR
    std::vector<std::size_t> col;
    std::vector<double> val;

    void apply(std::span<const double> f, std::span<double> out) const;    // out = L f
};

/// Time-dependent dual generator L_t on a fixed grid. Models implement the
/// sparsity once and refresh values per time; boundary closure lives inside.
class DualGenerator {
public:
    virtual ~DualGenerator() = default;
    virtual const SpaceGrid& grid() const = 0;
    /// Fill L at time t into `out` (pattern may be rebuilt or reused).
    virtual void generator_matrix(double t, GeneratorMatrix& out) const = 0;
    /// Largest dt with every explicit step matrix entrywise nonnegative
    /// (transport plus zero-order reaction), before the cfl_safety factor.
    virtual double max_step() const = 0;
    /// Coefficient period; 0 means autonomous.
    virtual double period() const = 0;

    /// Convenience: L_t f (allocates scratch).
    std::vector<double> apply(double t, std::span<const double> f) const;
};

enum class StepMethod { euler, heun };

struct StepScheme {
    double dt_max = 0.05;
    StepMethod method = StepMethod::heun;
    double cfl_safety = 0.9;

    StepScheme() = default;
    StepScheme(double dt_max_, StepMethod m, double safety);
};

/// Discrete M_{s,t}: entrywise nonnegative dense matrix; P(i,j) is the
/// contribution of f(x_j) to (M_{s,t} f)(x_i).
struct Propagator {
    SpaceGrid grid;
    double s = 0.0;
    double t = 0.0;
    DenseMatrix matrix;
    std::size_t clamp_count = 0;   // entries in [-1e-12, 0) zeroed at assembly

    Propagator(SpaceGrid g, double s_, double t_, DenseMatrix m, std::size_t clamps = 0);
    static Propagator identity(const SpaceGrid& g, double s);
};

/// P f, the dual (function-side) action.
DiscreteFunction apply_dual(const Propagator& P, const DiscreteFunction& f);

/// mu^T P, the measure-side action; duality <mu P, f> = <mu, P f> holds to
/// rounding because both use the same matrix.
DiscreteMeasure push_forward(const DiscreteMeasure& mu, const Propagator& P);

/// Semiflow composition: P1 covers [s,u], P2 covers [u,t]; result covers [s,t]
/// with dual action f -> P1 (P2 f).
Propagator compose(const Propagator& P1, const Propagator& P2);

/// Build M_{s,t} by explicit stepping of the backward dual equation
/// d/ds psi = -L_s psi from the final time t down to s. The step count is
/// derived from t-s only, so T-periodic models assemble bit-identically
/// across periods. Steps are factored into nonnegative updates; any residual
/// entry in [-1e-12, 0) is clamped to zero and counted, anything below
/// -1e-12 aborts (CFL diagnostic).
Propagator assemble(const DualGenerator& model, double s, double t, const StepScheme& scheme);

/// One explicit step of the backward dual evolution at time t with width dt:
/// euler f + dt*L_t f, or the Heun two-stage average. Throws if dt exceeds
/// the scheme-scaled CFL bound.
std::vector<double> step_dual(const DualGenerator& model, std::span<const double> f, double t,
                              double dt, const StepScheme& scheme);

/// Number of steps assemble() will take over a horizon (exposed for oracles).
std::size_t step_count(const DualGenerator& model, double horizon, const StepScheme& scheme);

/// CSV dump, header "n,s,t" then row-major entries at 15 significant digits.
void dump_csv(const Propagator& P, const std::string& path);
Propagator load_csv(const SpaceGrid& g, const std::string& path);

/// On-demand propagator source for the eigen machinery. Implementations must
/// be pure: the same (a, b) yields the same matrix.
class PropagatorProvider {
public:
    virtual ~PropagatorProvider() = default;
    virtual const SpaceGrid& grid() const = 0;
    virtual double period() const = 0;
    virtual const Propagator& get(double a, double b) = 0;
};

/// Provider backed by assemble(), memoizing on the exact (a, b) pair.
class CachingAssembler : public PropagatorProvider {
public:
    CachingAssembler(const DualGenerator& model, StepScheme scheme);
    const SpaceGrid& grid() const override { return model_.grid(); }
    double period() const override { return model_.period(); }
    const Propagator& get(double a, double b) override;

private:
    const DualGenerator& model_;
    StepScheme scheme_;
    std::map<std::pair<double, double>, Propagator> cache_;
};

} // namespace semiflow
