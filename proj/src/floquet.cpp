#include "semiflow/floquet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace semiflow {

namespace detail {
std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_line: need >= 2 points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double den = n * sxx - sx * sx;
    if (den == 0.0) return {sy / n, 0.0};
    const double b = (n * sxy - sx * sy) / den;
    const double a = (sy - b * sx) / n;
    return {a, b};
}
} // namespace detail

PeriodMapEigen power_iterate(const Propagator& P, const DiscreteFunction& V, double tol,
                             int max_iter) {
    detail::require_same_grid(P.grid, V.grid, "power_iterate");
    const std::size_t n = V.size();
    for (double v : V.values)
        if (!(v > 0.0)) throw std::invalid_argument("power_iterate: V must be positive");

    PeriodMapEigen out{0.0, V, DiscreteMeasure::zero(P.grid), 0.0, 0.0, 0, false};

    // forward (function side), started at V for guaranteed Perron overlap
    DiscreteFunction f = V;
    double lambda = 0.0;
    int it = 0;
    bool conv_f = false;
    for (; it < max_iter; ++it) {
        DiscreteFunction Pf = apply_dual(P, f);
        const double norm = weighted_sup_norm(Pf, V);
        if (!(norm > 0.0)) throw std::runtime_error("power_iterate: P annihilated the iterate");
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            Pf.values[i] /= norm;
            change = std::max(change, std::abs(Pf.values[i] - f.values[i]) / V.values[i]);
        }
        f = std::move(Pf);
        lambda = norm;
        if (change < tol) {
            conv_f = true;
            ++it;
            break;
        }
    }
    out.Lambda = lambda;
    out.h = f;
    out.iterations = it;
    {
        const DiscreteFunction Ph = apply_dual(P, out.h);
        double r = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            r = std::max(r, std::abs(Ph.values[i] - lambda * out.h.values[i]) / V.values[i]);
        out.residual = r;
    }
    if (!(lambda > 0.0)) throw std::runtime_error("power_iterate: nonpositive Lambda");

    // transpose (measure side), started at the quadrature-weighted Lebesgue mass
    DiscreteMeasure mu = DiscreteMeasure::lebesgue_on(P.grid, P.grid.x_min(), P.grid.x_max());
    bool conv_g = false;
    for (int jt = 0; jt < max_iter; ++jt) {
        DiscreteMeasure muP = push_forward(mu, P);
        const double norm = weighted_tv_norm(muP, V);
        if (!(norm > 0.0)) throw std::runtime_error("power_iterate: transpose iterate vanished");
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            muP.masses[i] /= norm;
            change = std::max(change, std::abs(muP.masses[i] - mu.masses[i]) * V.values[i]);
        }
        mu = std::move(muP);
        if (change < tol) {
            conv_g = true;
            break;
        }
    }
    const double overlap = pairing(mu, out.h);
    if (!(overlap > 0.0)) throw std::runtime_error("power_iterate: <gamma, h> <= 0");
    for (double& m : mu.masses) m /= overlap;
    out.gamma = std::move(mu);
    {
        DiscreteMeasure gP = push_forward(out.gamma, P);
        for (std::size_t i = 0; i < n; ++i) gP.masses[i] -= lambda * out.gamma.masses[i];
        out.gamma_residual = weighted_tv_norm(gP, V);
    }
    out.converged = conv_f && conv_g;
    return out;
}

std::size_t FloquetFamily::nearest_sample(double t) const {
    if (times.empty()) throw std::logic_error("FloquetFamily: empty");
    double r = std::fmod(t - s0, T);
    if (r < 0.0) r += T;
    const double step = T / static_cast<double>(times.size() - 1);
    auto k = static_cast<std::size_t>(std::llround(r / step));
    if (k >= times.size()) k = times.size() - 1;
    return k;
}

FloquetFamily extend_family(PropagatorProvider& provider, const PeriodMapEigen& eig, double s0,
                            double T, std::size_t n_samples, const DiscreteFunction& V) {
    if (n_samples < 2) throw std::invalid_argument("extend_family: n_samples must be >= 2");
    if (!eig.converged) throw std::invalid_argument("extend_family: eigen input not converged");
    FloquetFamily fam;
    fam.lambda_F = std::log(eig.Lambda) / T;
    fam.s0 = s0;
    fam.T = T;
    for (std::size_t k = 0; k < n_samples; ++k) {
        const double t = s0 + T * static_cast<double>(k) / static_cast<double>(n_samples - 1);
        DiscreteFunction h_t = apply_dual(provider.get(t, s0 + T), eig.h);
        const double disc_h = std::exp(-fam.lambda_F * (s0 + T - t));
        for (double& v : h_t.values) v *= disc_h;

        DiscreteMeasure g_t = push_forward(eig.gamma, provider.get(s0, t));
        const double disc_g = std::exp(-fam.lambda_F * (t - s0));
        for (double& v : g_t.masses) v *= disc_g;

        const double hn = weighted_sup_norm(h_t, V);
        if (!(hn > 0.0)) throw std::runtime_error("extend_family: degenerate sample");
        for (double& v : h_t.values) v /= hn;
        const double ov = pairing(g_t, h_t);
        if (!(ov > 0.0)) throw std::runtime_error("extend_family: <gamma_t, h_t> <= 0");
        for (double& v : g_t.masses) v /= ov;

        fam.times.push_back(t);
        fam.h.push_back(std::move(h_t));
        fam.gamma.push_back(std::move(g_t));
    }
    return fam;
}

ConvergenceRate convergence_rate(PropagatorProvider& provider, const FloquetFamily& family,
                                 const DiscreteMeasure& mu0, double s, double horizon,
                                 std::size_t n_checkpoints, const DiscreteFunction& V) {
    if (n_checkpoints < 3) throw std::invalid_argument("convergence_rate: need >= 3 checkpoints");
    const double T = family.T;
    if (std::abs(std::remainder(horizon, T)) > 1e-9 * T)
        throw std::invalid_argument("convergence_rate: horizon must be a multiple of T");

    ConvergenceRate out;
    const DiscreteFunction& h_s = family.h[family.nearest_sample(s)];
    const double weight = pairing(mu0, h_s);
    const double mu0_norm = weighted_tv_norm(mu0, V);

    DiscreteMeasure mu = mu0;  // tracks e^{-lambda_F (t-s)} mu M_{s,t}
    double t_prev = s;
    for (std::size_t k = 1; k <= n_checkpoints; ++k) {
        const double t_k = s + horizon * static_cast<double>(k) / static_cast<double>(n_checkpoints);
        mu = push_forward(mu, provider.get(t_prev, t_k));
        const double disc = std::exp(-family.lambda_F * (t_k - t_prev));
        for (double& v : mu.masses) v *= disc;
        t_prev = t_k;

        const DiscreteMeasure& g_t = family.gamma[family.nearest_sample(t_k)];
        DiscreteMeasure diff = mu;
        for (std::size_t i = 0; i < diff.size(); ++i) diff.masses[i] -= weight * g_t.masses[i];
        out.times.push_back(t_k);
        out.distances.push_back(weighted_tv_norm(diff, V));
    }
    out.final_rescaled = mu.masses;

    bool all_tiny = true;
    for (double d : out.distances)
        if (d > 1e-14 * mu0_norm) all_tiny = false;
    if (all_tiny) {
        out.already_converged = true;
        out.omega_hat = std::numeric_limits<double>::infinity();
        out.C_hat = 0.0;
        return out;
    }

    // fit the post-transient tail: drop the first 20% of checkpoints
    std::vector<double> xs, ys;
    const std::size_t skip = n_checkpoints / 5;
    for (std::size_t k = skip; k < out.times.size(); ++k) {
        if (out.distances[k] <= 0.0) continue;
        xs.push_back(out.times[k] - s);
        ys.push_back(std::log(out.distances[k]));
    }
    if (xs.size() >= 2) {
        auto [a, b] = detail::fit_line(xs, ys);
        out.C_hat = std::exp(a);
        out.omega_hat = -b;
    }
    return out;
}

} // namespace semiflow
