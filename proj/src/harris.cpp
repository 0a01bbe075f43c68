#include "semiflow/harris.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "semiflow/floquet.hpp"

namespace semiflow {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> ratio_vec(const std::vector<double>& num, const std::vector<double>& den) {
    std::vector<double> r(num.size());
    for (std::size_t i = 0; i < num.size(); ++i) r[i] = num[i] / den[i];
    return r;
}

double trend_slope(const std::vector<double>& per_n) {
    // log-slope over the last half of the n-range
    std::vector<double> xs, ys;
    for (std::size_t n = per_n.size() / 2; n < per_n.size(); ++n) {
        if (per_n[n] <= 0.0) continue;
        xs.push_back(static_cast<double>(n + 1));
        ys.push_back(std::log(per_n[n]));
    }
    if (xs.size() < 2) return 0.0;
    return detail::fit_line(xs, ys).second;
}
} // namespace

SmallSet SmallSet::from_interval(const SpaceGrid& g, double a, double b) {
    if (!(a < b)) throw std::invalid_argument("SmallSet: empty interval");
    SmallSet K{g.size(), 0};
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.node(i);
        if (x >= a - 1e-12 && x <= b + 1e-12) {
            K.i_lo = std::min(K.i_lo, i);
            K.i_hi = std::max(K.i_hi, i);
        }
    }
    if (K.i_lo > K.i_hi) throw std::invalid_argument("SmallSet: no grid nodes inside interval");
    return K;
}

MinorizationMeasure MinorizationMeasure::normalized_lebesgue(const SpaceGrid& g, const SmallSet& K,
                                                             double a, double b) {
    DiscreteMeasure leb = DiscreteMeasure::lebesgue_on(g, a, b);
    MinorizationMeasure nu;
    nu.weights.assign(g.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (leb.masses[i] > 0.0 && !K.contains(i))
            throw std::invalid_argument("MinorizationMeasure: support leaves K");
        total += leb.masses[i];
    }
    for (std::size_t i = 0; i < g.size(); ++i) nu.weights[i] = leb.masses[i] / total;
    return nu;
}

bool HarrisReport::all_pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

CheckResult check_A1(const Propagator& Pk, const WeightPair& pair, const SmallSet& K) {
    const std::vector<double> PV = Pk.matrix.apply(pair.V.values);
    const std::size_t n = PV.size();
    double alpha = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (!K.contains(i)) alpha = std::max(alpha, PV[i] / pair.V.values[i]);
    double theta = 0.0;
    for (std::size_t i = K.i_lo; i <= K.i_hi; ++i)
        theta = std::max(theta, (PV[i] - alpha * pair.V.values[i]) / pair.psi.values[i]);
    theta = std::max(theta, 0.0);

    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double rhs = alpha * pair.V.values[i] + (K.contains(i) ? theta * pair.psi.values[i] : 0.0);
        margin = std::min(margin, (rhs - PV[i]) / pair.V.values[i]);
    }
    CheckResult r;
    r.name = "A1";
    r.constants = {{"alpha", alpha}, {"theta", theta}};
    r.margin = margin;
    r.pass = alpha < 1.0;
    return r;
}

CheckResult check_A2(const Propagator& Pk, const WeightPair& pair, double alpha_from_A1) {
    const std::vector<double> Ppsi = Pk.matrix.apply(pair.psi.values);
    double beta = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < Ppsi.size(); ++i)
        beta = std::min(beta, Ppsi[i] / pair.psi.values[i]);
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < Ppsi.size(); ++i)
        margin = std::min(margin, (Ppsi[i] - beta * pair.psi.values[i]) / pair.psi.values[i]);
    CheckResult r;
    r.name = "A2";
    r.constants = {{"beta", beta}, {"alpha_ref", alpha_from_A1}};
    r.margin = margin;
    r.pass = beta > alpha_from_A1 && beta > 0.0;
    return r;
}

CheckResult check_A3(const Propagator& Pk, const WeightPair& pair, const SmallSet& K,
                     const MinorizationMeasure& nu) {
    const std::vector<double> Ppsi = Pk.matrix.apply(pair.psi.values);
    for (std::size_t i = K.i_lo; i <= K.i_hi; ++i)
        if (!(Ppsi[i] > 0.0))
            throw std::runtime_error("check_A3: M^k psi vanishes on K (positivity broken)");
    double c = std::numeric_limits<double>::infinity();
    for (std::size_t i = K.i_lo; i <= K.i_hi; ++i) {
        for (std::size_t j = 0; j < nu.weights.size(); ++j) {
            if (nu.weights[j] <= 0.0) continue;
            c = std::min(c, Pk.matrix(i, j) * pair.psi.values[j] / (Ppsi[i] * nu.weights[j]));
        }
    }
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = K.i_lo; i <= K.i_hi; ++i)
        for (std::size_t j = 0; j < nu.weights.size(); ++j) {
            if (nu.weights[j] <= 0.0) continue;
            const double lhs = Pk.matrix(i, j) * pair.psi.values[j];
            const double rhs = c * nu.weights[j] * Ppsi[i];
            margin = std::min(margin, (lhs - rhs) / std::max(rhs, 1e-300));
        }
    CheckResult r;
    r.name = "A3";
    r.constants = {{"c", c}};
    r.margin = margin;
    r.pass = c > 0.0;
    return r;
}

CheckResult check_A4(const Propagator& P_period, const WeightPair& pair, const SmallSet& K,
                     const MinorizationMeasure& nu, int n_max) {
    if (n_max < 2) throw std::invalid_argument("check_A4: n_max must be >= 2");
    std::vector<double> v = pair.psi.values;
    std::vector<double> per_n;
    double d = std::numeric_limits<double>::infinity();
    for (int n = 1; n <= n_max; ++n) {
        v = P_period.matrix.apply(v);
        double top = 0.0;
        for (double x : v) top = std::max(top, std::abs(x));
        if (top > 0.0)
            for (double& x : v) x /= top;  // scale cancels inside d_n
        const std::vector<double> r = ratio_vec(v, pair.psi.values);
        double nu_avg = 0.0;
        for (std::size_t j = 0; j < r.size(); ++j) nu_avg += nu.weights[j] * r[j];
        double sup_K = 0.0;
        for (std::size_t i = K.i_lo; i <= K.i_hi; ++i) sup_K = std::max(sup_K, r[i]);
        const double dn = nu_avg / sup_K;
        per_n.push_back(dn);
        d = std::min(d, dn);
    }
    const double slope = trend_slope(per_n);
    CheckResult r;
    r.name = "A4";
    r.constants = {{"d", d}, {"log_slope", slope}};
    r.margin = d;
    r.pass = d > 0.0 && slope >= -kTrendSlopeTol;
    return r;
}

B5Sigma b5_sigma(const SmModel& model, double x, double y, double s0, double tau, int depth,
                 std::size_t n_u) {
    if (depth < 0 || depth > 1)
        throw std::invalid_argument("b5_sigma: only induction depths 0 and 1 are supported");
    if (!(tau > 0.0)) throw std::invalid_argument("b5_sigma: require tau > 0");
    B5Sigma sig;
    sig.depth = depth;
    if (depth == 0) {
        if (std::abs(y - (x + tau)) > 1e-9 * std::max(1.0, std::abs(y)))
            throw std::invalid_argument("b5_sigma: depth 0 applies only to y = x + tau");
        sig.dirac = true;
        sig.u_point = s0 + tau;
        sig.c = model.exp_int_a(s0, s0 + tau, x);
        return sig;
    }

    const double eps = model.kernel.eps;
    const double kappa0 = model.kernel.kappa0();
    if (!(kappa0 > 0.0)) throw std::invalid_argument("b5_sigma: kernel minorization level is 0");
    const double center = s0 + (y - x);
    const double lo = std::max(center - eps, s0 + tau / static_cast<double>(n_u) * 0.5);
    const double hi = std::min(center + eps, s0 + tau);
    if (!(lo < hi))
        throw std::invalid_argument("b5_sigma: pair (x, y) unreachable at depth 1");

    const double du = tau / static_cast<double>(n_u);
    for (std::size_t j = 1; j <= n_u; ++j) {
        const double u = s0 + du * static_cast<double>(j);
        if (u < lo - 1e-12 || u > hi + 1e-12) continue;
        // w(u) = kappa0 * int_{s0}^{u} E_a(s0,tau',x) E_a(tau',u, y-(u-tau')) dtau'
        const int m = 24;
        double acc = 0.0;
        double prev = model.exp_int_a(s0, s0, x) * model.exp_int_a(s0, u, y - (u - s0), 32);
        for (int k = 1; k <= m; ++k) {
            const double tp = s0 + (u - s0) * k / m;
            const double cur =
                model.exp_int_a(s0, tp, x, 32) * model.exp_int_a(tp, u, y - (u - tp), 32);
            acc += 0.5 * (u - s0) / m * (prev + cur);
            prev = cur;
        }
        sig.u.push_back(u);
        sig.density.push_back(kappa0 * acc);
    }
    if (sig.u.empty()) throw std::invalid_argument("b5_sigma: no quadrature node in the window");
    double c = 0.0;
    for (std::size_t j = 0; j < sig.u.size(); ++j) {
        double w = (j == 0 || j + 1 == sig.u.size()) ? 0.5 * du : du;
        if (sig.u.size() == 1) w = du;
        c += w * sig.density[j];
    }
    if (!(c > 0.0)) throw std::invalid_argument("b5_sigma: degenerate density");
    for (double& v : sig.density) v /= c;
    sig.c = c;
    return sig;
}

HarrisReport check_B_suite(PropagatorProvider& provider, const WeightPair& pair, const SmallSet& K,
                           const MinorizationMeasure& nu, const BSuiteParams& prm,
                           const SmModel* sm) {
    HarrisReport rep;
    const double T = provider.period();
    const double s0 = prm.s0, tau = prm.tau;
    if (!(T > 0.0)) throw std::invalid_argument("check_B_suite: provider must be periodic");
    if (std::abs(std::remainder(tau, T)) > 1e-9 * T)
        throw std::invalid_argument("check_B_suite: tau must be a multiple of the period");
    const std::size_t n = pair.V.size();

    // (B0): uniform bounds over s0 <= s <= t <= s0 + 2 tau
    {
        double up = 0.0, lo = std::numeric_limits<double>::infinity();
        const int m = 4;
        for (int i = 0; i <= m; ++i) {
            const double s = s0 + 2.0 * tau * i / m;
            for (int j = i; j <= m; ++j) {
                const double t = s0 + 2.0 * tau * j / m;
                const Propagator& P = provider.get(s, t);
                const std::vector<double> PV = P.matrix.apply(pair.V.values);
                const std::vector<double> Pp = P.matrix.apply(pair.psi.values);
                for (std::size_t q = 0; q < n; ++q) {
                    up = std::max(up, PV[q] / pair.V.values[q]);
                    lo = std::min(lo, Pp[q] / pair.psi.values[q]);
                }
            }
        }
        CheckResult r;
        r.name = "B0";
        r.constants = {{"sup_MV_over_V", up}, {"inf_Mpsi_over_psi", lo}};
        r.margin = lo;
        r.pass = lo > 0.0 && std::isfinite(up);
        rep.checks.push_back(std::move(r));
    }

    // (B1)/(B2) across sampled phases
    double alpha = 0.0, theta = 0.0;
    double beta = std::numeric_limits<double>::infinity();
    {
        double margin1 = std::numeric_limits<double>::infinity();
        double margin2 = std::numeric_limits<double>::infinity();
        std::vector<std::vector<double>> PVs, Pps;
        std::vector<double> phases;
        for (int mth = 0; mth < prm.time_samples; ++mth) {
            const double s = s0 + T * mth / prm.time_samples;
            const Propagator& P = provider.get(s, s + tau);
            PVs.push_back(P.matrix.apply(pair.V.values));
            Pps.push_back(P.matrix.apply(pair.psi.values));
            phases.push_back(s);
        }
        for (const auto& PV : PVs)
            for (std::size_t i = 0; i < n; ++i)
                if (!K.contains(i)) alpha = std::max(alpha, PV[i] / pair.V.values[i]);
        for (const auto& PV : PVs)
            for (std::size_t i = K.i_lo; i <= K.i_hi; ++i)
                theta = std::max(theta, (PV[i] - alpha * pair.V.values[i]) / pair.psi.values[i]);
        theta = std::max(theta, 0.0);
        for (const auto& PV : PVs)
            for (std::size_t i = 0; i < n; ++i) {
                const double rhs =
                    alpha * pair.V.values[i] + (K.contains(i) ? theta * pair.psi.values[i] : 0.0);
                margin1 = std::min(margin1, (rhs - PV[i]) / pair.V.values[i]);
            }
        for (const auto& Pp : Pps)
            for (std::size_t i = 0; i < n; ++i)
                beta = std::min(beta, Pp[i] / pair.psi.values[i]);
        for (const auto& Pp : Pps)
            for (std::size_t i = 0; i < n; ++i)
                margin2 = std::min(margin2, (Pp[i] - beta * pair.psi.values[i]) / pair.psi.values[i]);

        CheckResult r1;
        r1.name = "B1";
        r1.constants = {{"alpha", alpha}, {"theta", theta}};
        r1.margin = margin1;
        r1.pass = alpha < 1.0;
        rep.checks.push_back(std::move(r1));

        CheckResult r2;
        r2.name = "B2";
        r2.constants = {{"beta", beta}, {"alpha_ref", alpha}};
        r2.margin = margin2;
        r2.pass = beta > alpha && beta > 0.0;
        rep.checks.push_back(std::move(r2));
    }

    // (B3) at s0
    {
        CheckResult r = check_A3(provider.get(s0, s0 + tau), pair, K, nu);
        r.name = "B3";
        rep.checks.push_back(std::move(r));
    }

    // (B4): C = max over s, n, K of M_{s0,s0+n tau} psi / M_{s,s+n tau} psi
    {
        std::vector<double> per_n(prm.n_max, 0.0);
        std::vector<double> base = pair.psi.values;
        std::vector<std::vector<double>> others;
        std::vector<const Propagator*> ops;
        const Propagator& P0 = provider.get(s0, s0 + tau);
        for (int mth = 1; mth <= prm.time_samples; ++mth) {
            const double s = s0 + tau * mth / (prm.time_samples + 1);
            ops.push_back(&provider.get(s, s + tau));
            others.push_back(pair.psi.values);
        }
        double logscale_base = 0.0;
        std::vector<double> logscale(others.size(), 0.0);
        for (int nn = 1; nn <= prm.n_max; ++nn) {
            base = P0.matrix.apply(base);
            double tb = *std::max_element(base.begin(), base.end());
            logscale_base += std::log(tb);
            for (double& v : base) v /= tb;
            double cn = 0.0;
            for (std::size_t o = 0; o < others.size(); ++o) {
                others[o] = ops[o]->matrix.apply(others[o]);
                double to = *std::max_element(others[o].begin(), others[o].end());
                logscale[o] += std::log(to);
                for (double& v : others[o]) v /= to;
                for (std::size_t i = K.i_lo; i <= K.i_hi; ++i) {
                    const double lr = (std::log(base[i]) + logscale_base) -
                                      (std::log(others[o][i]) + logscale[o]);
                    cn = std::max(cn, std::exp(lr));
                }
            }
            per_n[nn - 1] = cn;
        }
        const double slope = trend_slope(per_n);
        CheckResult r;
        r.name = "B4";
        r.constants = {{"C_B4", *std::max_element(per_n.begin(), per_n.end())},
                       {"log_slope", slope}};
        r.margin = kTrendSlopeTol - slope;
        r.pass = slope <= kTrendSlopeTol;
        rep.checks.push_back(std::move(r));
    }

    // (B5): depth-1 certificates on reachable sampled pairs
    if (sm != nullptr) {
        const SpaceGrid& g = provider.grid();
        const Propagator& P0 = provider.get(s0, s0 + tau);
        int evaluated = 0, skipped = 0;
        double d_b5 = std::numeric_limits<double>::infinity();
        double c_min = std::numeric_limits<double>::infinity();
        std::vector<std::size_t> picks;
        for (int a = 0; a < prm.b5_pair_samples; ++a)
            picks.push_back(K.i_lo + (K.i_hi - K.i_lo) * a / std::max(1, prm.b5_pair_samples - 1));
        const double du = tau / static_cast<double>(prm.b5_u_nodes);
        for (std::size_t ix : picks) {
            for (std::size_t iy : picks) {
                const double x = g.node(ix), y = g.node(iy);
                B5Sigma sig;
                try {
                    sig = b5_sigma(*sm, x, y, s0, tau, 1, prm.b5_u_nodes);
                } catch (const std::invalid_argument&) {
                    ++skipped;
                    continue;
                }
                ++evaluated;
                c_min = std::min(c_min, sig.c * pair.psi.values[iy] / pair.psi.values[ix]);
                // RHS_i = int M_{u, s0+tau} e_i (y) / psi(y) sigma(du)
                for (std::size_t i = 0; i < n; ++i) {
                    double rhs = 0.0;
                    for (std::size_t j = 0; j < sig.u.size(); ++j) {
                        double w = (j == 0 || j + 1 == sig.u.size()) ? 0.5 * du : du;
                        if (sig.u.size() == 1) w = du;
                        const Propagator& Pu = provider.get(sig.u[j], s0 + tau);
                        rhs += w * sig.density[j] * Pu.matrix(iy, i);
                    }
                    rhs /= pair.psi.values[iy];
                    const double lhs = P0.matrix(ix, i) / pair.psi.values[ix];
                    if (rhs > 0.0) d_b5 = std::min(d_b5, lhs / rhs);
                }
            }
        }
        CheckResult r;
        r.name = "B5";
        r.constants = {{"d_B5", evaluated ? d_b5 : 0.0},
                       {"c_certificate_min", evaluated ? c_min : 0.0},
                       {"pairs_evaluated", static_cast<double>(evaluated)},
                       {"pairs_unreachable", static_cast<double>(skipped)}};
        r.margin = evaluated ? d_b5 : -1.0;
        r.pass = evaluated > 0 && d_b5 > 0.0;
        r.note = "depth-1 certificates cover pairs with y - x in (-eps, tau + eps)";
        rep.checks.push_back(std::move(r));
    } else {
        CheckResult r;
        r.name = "B5";
        r.margin = 0.0;
        r.pass = true;
        r.note = "skipped: no selection-mutation model attached";
        rep.checks.push_back(std::move(r));
    }
    return rep;
}

SinModel SinModel::make(SpaceGrid grid) {
    if (std::abs(grid.x_min()) > 1e-12 || std::abs(grid.x_max() - kTwoPi) > 1e-9)
        throw std::invalid_argument("SinModel: grid must span [0, 2 pi]");
    SinModel m{grid, kTwoPi};
    return m;
}

Propagator SinModel::propagator(double s, double t) const {
    if (t < s) throw std::invalid_argument("SinModel: require t >= s");
    const std::size_t n = grid.size();
    const std::size_t np = n - 1;  // node n-1 is the periodic duplicate of node 0
    DenseMatrix M(n);
    const double dx = grid.dx();
    for (std::size_t i = 0; i < n; ++i) {
        const double w = std::exp((t - s) * std::sin(grid.node(i) - s));
        double y = std::fmod(grid.node(i) + (t - s), T);
        if (y < 0.0) y += T;
        const double r = y / dx;
        auto j = static_cast<std::size_t>(r);
        const double th = r - static_cast<double>(j);
        M(i, j % np) += w * (1.0 - th);
        M(i, (j + 1) % np) += w * th;
    }
    return Propagator(grid, s, t, std::move(M));
}

DiscreteFunction sin_model_exact(const SinModel& model, double s, double t,
                                 const DiscreteFunction& f) {
    detail::require_same_grid(model.grid, f.grid, "sin_model_exact");
    const std::size_t n = model.grid.size();
    const std::size_t np = n - 1;
    const double dx = model.grid.dx();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double y = std::fmod(model.grid.node(i) + (t - s), model.T);
        if (y < 0.0) y += model.T;
        const double r = y / dx;
        auto j = static_cast<std::size_t>(r);
        const double th = r - static_cast<double>(j);
        const double fv = (1.0 - th) * f.values[j % np] + th * f.values[(j + 1) % np];
        out[i] = fv * std::exp((t - s) * std::sin(model.grid.node(i) - s));
    }
    return DiscreteFunction(model.grid, std::move(out));
}

double sin_b4_ratio(double x, double s, double u, int k, double T) {
    if (std::abs(T - kTwoPi) > 1e-9) throw std::invalid_argument("sin_b4_ratio: requires T = 2 pi");
    return std::exp(k * T * (std::sin(x - s) - std::sin(x - u)));
}

const Propagator& SinProvider::get(double a, double b) {
    auto key = std::make_pair(a, b);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    auto [ins, ok] = cache_.emplace(key, model_.propagator(a, b));
    return ins->second;
}

} // namespace semiflow
