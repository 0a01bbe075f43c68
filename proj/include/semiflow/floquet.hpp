#pragma once

#include <vector>

#include "semiflow/measure_space.hpp"
#include "semiflow/propagator.hpp"

namespace semiflow {

/// Eigen-triplet of a period map: gamma M = Lambda gamma, M h = Lambda h,
/// normalized to <gamma, h> = ||h||_B(V) = 1 with h > 0.
struct PeriodMapEigen {
    double Lambda = 0.0;
    DiscreteFunction h;
    DiscreteMeasure gamma;
    double residual = 0.0;        // ||P h - Lambda h||_B(V)
    double gamma_residual = 0.0;  // ||gamma P - Lambda gamma||_M(V)
    int iterations = 0;
    bool converged = false;
};

/// Power iteration on a nonnegative period map. The start vector is V itself
/// and Lambda is extracted from the B(V)-norm ratio, matching the paper's
/// normalization. Non-convergence is reported through the residual, not thrown.
PeriodMapEigen power_iterate(const Propagator& P, const DiscreteFunction& V, double tol,
                             int max_iter);

/// T-periodic Floquet family sampled over one period, each sample normalized
/// to <gamma_t, h_t> = ||h_t||_B(V) = 1.
struct FloquetFamily {
    double lambda_F = 0.0;
    double s0 = 0.0;
    double T = 0.0;
    std::vector<double> times;  // n_samples points spanning [s0, s0+T]
    std::vector<DiscreteFunction> h;
    std::vector<DiscreteMeasure> gamma;

    /// Index of the family sample nearest to time t (periodic wrap).
    std::size_t nearest_sample(double t) const;
};

/// Extend period-map eigenelements to the full family:
/// h_t = e^{-lambda_F (s0+T-t)} M_{t,s0+T} h, gamma_t = e^{-lambda_F (t-s0)} gamma M_{s0,t}.
FloquetFamily extend_family(PropagatorProvider& provider, const PeriodMapEigen& eig, double s0,
                            double T, std::size_t n_samples, const DiscreteFunction& V);

struct ConvergenceRate {
    double C_hat = 0.0;
    double omega_hat = 0.0;
    bool already_converged = false;  // all distances below 1e-14 * ||mu0||
    std::vector<double> times;
    std::vector<double> distances;
    /// Final rescaled measure e^{-lambda_F (t-s)} mu M_{s,t}, for profile checks.
    std::vector<double> final_rescaled;
};

/// Distances d_k = || e^{-lambda_F (t_k - s)} mu M_{s,t_k} - <mu, h_s> gamma_{t_k} ||_M(V)
/// at checkpoints, with (C_hat, omega_hat) fit on log d_k over the
/// post-transient window (first 20% of checkpoints dropped).
ConvergenceRate convergence_rate(PropagatorProvider& provider, const FloquetFamily& family,
                                 const DiscreteMeasure& mu0, double s, double horizon,
                                 std::size_t n_checkpoints, const DiscreteFunction& V);

namespace detail {
/// Least squares line y ~ a + b x; returns {a, b}.
std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y);
} // namespace detail

} // namespace semiflow
