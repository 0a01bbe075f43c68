#pragma once

#include <map>
#include <string>
#include <vector>

#include "semiflow/measure_space.hpp"
#include "semiflow/propagator.hpp"
#include "semiflow/selection_mutation.hpp"

namespace semiflow {

/// Node-index interval [i_lo, i_hi] standing for the small set K.
struct SmallSet {
    std::size_t i_lo = 0;
    std::size_t i_hi = 0;

    static SmallSet from_interval(const SpaceGrid& g, double a, double b);
    bool contains(std::size_t i) const { return i >= i_lo && i <= i_hi; }
    std::size_t count() const { return i_hi - i_lo + 1; }
};

/// Probability weights on grid nodes, supported inside K.
struct MinorizationMeasure {
    std::vector<double> weights;  // full grid length, sums to 1

    static MinorizationMeasure normalized_lebesgue(const SpaceGrid& g, const SmallSet& K, double a,
                                                   double b);
};

struct CheckResult {
    std::string name;
    std::map<std::string, double> constants;
    double margin = 0.0;
    bool pass = false;
    std::string note;
};

struct HarrisReport {
    std::vector<CheckResult> checks;
    bool all_pass() const;
};

/// Trend threshold for the finite-horizon surrogate of the A4/B4 suprema:
/// |log-slope| of the per-n constants over the last half of the n-range.
inline constexpr double kTrendSlopeTol = 1e-4;

/// (A1) M^k V <= alpha V + theta 1_K psi, tightest grid constants.
CheckResult check_A1(const Propagator& Pk, const WeightPair& pair, const SmallSet& K);

/// (A2) M^k psi >= beta psi; pass requires beta > alpha from the paired A1.
CheckResult check_A2(const Propagator& Pk, const WeightPair& pair, double alpha_from_A1);

/// (A3) inf_K M^k(f psi)/M^k psi >= c <nu, f> via the node basis.
CheckResult check_A3(const Propagator& Pk, const WeightPair& pair, const SmallSet& K,
                     const MinorizationMeasure& nu);

/// (A4) <nu, M^{nk} psi/psi> >= d sup_K M^{nk} psi/psi for n = 1..n_max,
/// with a log-slope trend test over the last half of the range.
CheckResult check_A4(const Propagator& P_period, const WeightPair& pair, const SmallSet& K,
                     const MinorizationMeasure& nu, int n_max);

/// sigma_{x,y} family of the (B5) induction, depths 0 and 1.
struct B5Sigma {
    int depth = 0;
    double c = 0.0;
    bool dirac = false;
    double u_point = 0.0;            // depth 0
    std::vector<double> u, density;  // depth 1, density integrates to 1
};

/// depth 0: point mass at the endpoint, valid only when y = x + tau;
/// depth 1: one kernel-jump induction step, density by time quadrature.
/// Depths >= 2 are unsupported.
B5Sigma b5_sigma(const SmModel& model, double x, double y, double s0, double tau, int depth,
                 std::size_t n_u = 16);

struct BSuiteParams {
    double s0 = 0.0;
    double tau = 1.0;        // must be a multiple of the model period
    int n_max = 6;
    int time_samples = 4;
    std::size_t b5_u_nodes = 12;
    int b5_pair_samples = 4;
};

/// (B0)-(B5) across sampled phases. B5 needs the selection-mutation model for
/// its Duhamel constants; pass sm = nullptr to skip it (reported as skipped).
HarrisReport check_B_suite(PropagatorProvider& provider, const WeightPair& pair, const SmallSet& K,
                           const MinorizationMeasure& nu, const BSuiteParams& params,
                           const SmModel* sm);

/// Exact semiflow of dt u + dx u = sin(t - x) u on a periodic grid over
/// [0, 2 pi]: M_{s,t} f(x) = f(x + t - s) e^{(t-s) sin(x - s)}.
struct SinModel {
    SpaceGrid grid;
    double T = 0.0;

    static SinModel make(SpaceGrid grid);
    Propagator propagator(double s, double t) const;
};

DiscreteFunction sin_model_exact(const SinModel& model, double s, double t,
                                 const DiscreteFunction& f);

/// The counterexample ratio M_{s,s+kT} psi(x) / M_{u,u+kT} psi(x)
/// = e^{kT (sin(x-s) - sin(x-u))}; requires T = 2 pi.
double sin_b4_ratio(double x, double s, double u, int k, double T);

class SinProvider : public PropagatorProvider {
public:
    explicit SinProvider(SinModel m) : model_(std::move(m)) {}
    const SpaceGrid& grid() const override { return model_.grid; }
    double period() const override { return model_.T; }
    const Propagator& get(double a, double b) override;

private:
    SinModel model_;
    std::map<std::pair<double, double>, Propagator> cache_;
};

} // namespace semiflow
