#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "semiflow/measure_space.hpp"
#include "semiflow/propagator.hpp"

namespace semiflow {

/// value(t) = mean + sin_amp * sin(2 pi t / T + sin_phase), evaluated after
/// reducing t mod T so periodic shifts reproduce bit-identical coefficients.
struct PeriodicCoefficient {
    double mean = 0.0;
    double sin_amp = 0.0;
    double sin_phase = 0.0;
    double period = 1.0;

    double value(double t) const;
    double min_value() const { return mean - std::abs(sin_amp); }
    double max_value() const { return mean + std::abs(sin_amp); }
    double mean_value() const { return mean; }
    /// Exact integral over [a, b].
    double integral(double a, double b) const;
};

/// Daughter-size density kappa on [0,1], stored by polynomial coefficients
/// kappa(z) = c0 + c1 z + c2 z^2 so moments are exact rational expressions.
struct FragmentationDistribution {
    enum class Kind { uniform_binary, floor_plus_bump };
    Kind kind = Kind::uniform_binary;
    double c0 = 2.0, c1 = 0.0, c2 = 0.0;
    double kappa_floor = 2.0;  // kappa underline

    static FragmentationDistribution uniform_binary();
    /// kappa(z) = kappa_floor + c_b z(1-z), c_b solved so eta_1 = 1.
    static FragmentationDistribution floor_plus_bump(double kappa_floor);

    double operator()(double z) const { return c0 + z * (c1 + z * c2); }
    double min_value() const { return kappa_floor; }
    bool symmetric() const { return std::abs(c1 + c2) <= 1e-12; }
};

/// eta_k = int_0^1 z^k kappa(z) dz, exact for the polynomial catalog.
double kappa_moment(const FragmentationDistribution& kappa, double k);

/// Forward characteristic flow of dX/dtau = g0(tau) + g1(tau) X from (s, x)
/// to time t: X = x e^{G1(s,t)} + int_s^t g0(tau) e^{G1(tau,t)} dtau with the
/// g1-integral in closed form and the outer integral by adaptive Simpson.
double characteristic_flow(const PeriodicCoefficient& g0, const PeriodicCoefficient& g1,
                           double s, double t, double x);

/// Growth-fragmentation model with affine periodic rates g = g0 + g1 x,
/// beta = b0 + b1 x on a grid with x_min = 0. Weight V(x) = 1 + x^alpha.
class GfModel : public DualGenerator {
public:
    static GfModel make(PeriodicCoefficient g0, PeriodicCoefficient g1, PeriodicCoefficient b0,
                        PeriodicCoefficient b1, FragmentationDistribution kappa, SpaceGrid grid,
                        double alpha_weight = 2.0, int z_nodes = 64);

    const SpaceGrid& grid() const override { return grid_; }
    void generator_matrix(double t, GeneratorMatrix& out) const override;
    double max_step() const override;
    double period() const override { return g0.period; }

    double g(double t, double x) const { return g0.value(t) + g1.value(t) * x; }
    double beta(double t, double x) const { return b0.value(t) + b1.value(t) * x; }
    double flow(double s, double t, double x) const { return characteristic_flow(g0, g1, s, t, x); }
    DiscreteFunction weight_V() const;

    PeriodicCoefficient g0, g1, b0, b1;
    FragmentationDistribution kappa;
    double alpha_weight = 2.0;
    int z_nodes = 64;

private:
    GfModel(PeriodicCoefficient, PeriodicCoefficient, PeriodicCoefficient, PeriodicCoefficient,
            FragmentationDistribution, SpaceGrid, double, int);
    void build_pattern();

    SpaceGrid grid_;
    double g_max_ = 0.0, beta_max_ = 0.0;
    // Static sparsity with per-entry coefficients: val = g(t,x_i)*gc + beta(t,x_i)*bc.
    std::vector<std::size_t> row_ptr_, col_;
    std::vector<double> gc_, bc_;
    std::vector<double> diag_gc_, diag_bc_;
};

/// (L_t f), exposed for oracles; identical to the generator matrix action.
DiscreteFunction generator_apply_gf(const GfModel& model, const DiscreteFunction& f, double t);

/// One explicit dual step (propagator_core contract).
DiscreteFunction step_dual_gf(const GfModel& model, const DiscreteFunction& f, double t, double dt,
                              const StepScheme& scheme);

using Mat2 = std::array<double, 4>;  // row-major [[a,b],[c,d]] acting on (m,n)

/// Coefficient matrix of the affine-eigenfunction ODE (dm,dn) = A(t)(m,n):
/// A(t) = [[b0(-t)(eta0-1), g0(-t)], [b1(-t)(eta0-1), g1(-t)]].
Mat2 floquet_matrix(const GfModel& model, double t);

struct MonodromyData {
    double T = 0.0;
    std::size_t n_steps = 0;
    std::vector<Mat2> xi;  // xi[k] = Xi_{kT/n_steps}, xi.back() = Xi_T

    /// Xi_t for t in [0, T]: nearest node below plus one RK4 substep.
    Mat2 xi_at(const GfModel& model, double t) const;
};

/// RK4 fundamental solution of Ydot = A(t) Y over one period.
MonodromyData monodromy(const GfModel& model, std::size_t n_steps);

struct FloquetEigen2x2 {
    double lambda_F = 0.0;
    double Lambda = 0.0;
    double u0 = 0.0, v0 = 0.0;  // Perron eigenvector of Xi_T, u0 + v0 = 1
    MonodromyData mono;
};

/// Perron pair of Xi_T via the explicit 2x2 quadratic; throws if Xi_T is not
/// entrywise positive (coefficient floor broken).
FloquetEigen2x2 perron_floquet(const GfModel& model, std::size_t n_steps);

/// h_s(x) = u_{-s} + v_{-s} x with (u_t, v_t) = e^{-lambda_F t} Xi_t (u0, v0).
double floquet_h(const GfModel& model, const FloquetEigen2x2& eig, double s, double x);

struct DoeblinCertificate {
    double c_st = 0.0;
    double a1 = 0.0, a2 = 0.0;  // flow-comparison constants (tightest sampled)
    double B = 0.0;             // sup of beta along sampled trajectories
    double nu_lo = 0.0, nu_hi = 0.0;
    bool verified = false;
    double margin_rel = 0.0;    // worst (LHS - RHS)/RHS over the hat basis
    std::size_t worst_node = 0;
};

/// Candidate Doeblin minorization M_{s,t} f >= c_st <nu, f> on [0, R] with
/// nu = Lebesgue on (a1 X_{s,t}(0), X_{s,t}(0)); constants from the sampled
/// flow comparison, then verified against the assembled propagator when
/// verify is set. A negative margin is reported, never silently passed.
DoeblinCertificate doeblin_certificate_gf(const GfModel& model, const StepScheme& scheme, double s,
                                          double t, double R, bool verify = true);

struct GabrielBounds {
    double lam_bar_g0 = 0.0;  // average of lambda(g0(s))
    double lam_g0_bar = 0.0;  // lambda(mean g0)
    double lambda_F = 0.0;
    double allowance = 0.0;   // measured discretization allowance
    bool holds = false;
    std::vector<std::pair<double, double>> samples;  // (s, lambda(g0(s)))
};

struct GabrielParams {
    int n_s = 12;
    int t_ref = 10;
    double power_tol = 1e-10;
    int power_max_iter = 2000;
    std::size_t n_monodromy = 400;
};

/// Eigenvalue comparison lambda_bar(g0) <= lambda_F <= lambda(g0_bar) for the
/// special shape g1 = 0, b0 = 0, b1 constant, symmetric kappa. Each constant
/// eigenvalue comes from power iteration on the assembled autonomous period
/// map raised to the reference horizon.
GabrielBounds gabriel_bounds(const GfModel& model, const StepScheme& scheme,
                             const GabrielParams& params = {});

} // namespace semiflow
