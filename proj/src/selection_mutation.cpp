#include "semiflow/selection_mutation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace semiflow {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double reduce_mod(double t, double T) {
    double r = std::fmod(t, T);
    if (r < 0.0) r += T;
    return r;
}

// linear interpolation with zero-gradient extrapolation on the right;
// dual characteristics never read left of x
double interp_right(const SpaceGrid& g, const std::vector<double>& f, double x) {
    if (x >= g.x_max()) return f.back();
    if (x <= g.x_min()) return f.front();
    const double r = (x - g.x_min()) / g.dx();
    auto j = static_cast<std::size_t>(r);
    if (j + 1 >= f.size()) return f.back();
    const double th = r - static_cast<double>(j);
    return (1.0 - th) * f[j] + th * f[j + 1];
}
} // namespace

FitnessField FitnessField::sqrt_shift() {
    FitnessField f;
    f.kind = Kind::sqrt_shift;
    f.period = kTwoPi;
    return f;
}

FitnessField FitnessField::power_confine(double a0, double a1, double p, double phi,
                                         double period) {
    if (!(a1 > 0.0)) throw std::invalid_argument("power_confine: a1 must be > 0 (confinement)");
    if (!(p >= 1.0)) throw std::invalid_argument("power_confine: p must be >= 1");
    if (!(period > 0.0)) throw std::invalid_argument("power_confine: period must be > 0");
    FitnessField f;
    f.kind = Kind::power_confine;
    f.a0 = a0;
    f.a1 = a1;
    f.p = p;
    f.phi = phi;
    f.period = period;
    return f;
}

double FitnessField::operator()(double t, double x) const {
    const double tm = reduce_mod(t, period);
    if (kind == Kind::sqrt_shift) return -std::sqrt(std::abs(x + std::sin(tm)));
    const double c = phi * std::sin(kTwoPi * tm / period);
    return a0 - a1 * std::pow(std::abs(x - c), p);
}

double FitnessField::lower(double x) const {
    if (kind == Kind::sqrt_shift) return -std::sqrt(std::abs(x) + 1.0);
    return a0 - a1 * std::pow(std::abs(x) + std::abs(phi), p);
}

double FitnessField::upper(double x) const {
    if (kind == Kind::sqrt_shift) return -std::sqrt(std::max(std::abs(x) - 1.0, 0.0));
    return a0 - a1 * std::pow(std::max(std::abs(x) - std::abs(phi), 0.0), p);
}

double FitnessField::sup_upper() const { return kind == Kind::sqrt_shift ? 0.0 : a0; }

MutationKernel MutationKernel::uniform_window(double q, double eps) {
    if (q < 0.0) throw std::invalid_argument("uniform_window: q must be >= 0");
    if (!(eps > 0.0)) throw std::invalid_argument("uniform_window: eps must be > 0");
    MutationKernel k;
    k.kind = Kind::uniform_window;
    k.q = q;
    k.eps = eps;
    return k;
}

MutationKernel MutationKernel::decaying_uniform(double kappa_lo, double kappa_hi, double eps) {
    if (!(kappa_lo > 0.0))
        throw std::invalid_argument("decaying_uniform: kappa_lo must be > 0 (minorization)");
    if (kappa_hi < 0.0) throw std::invalid_argument("decaying_uniform: kappa_hi must be >= 0");
    if (!(eps > 0.0)) throw std::invalid_argument("decaying_uniform: eps must be > 0");
    MutationKernel k;
    k.kind = Kind::decaying_uniform;
    k.kappa_lo = kappa_lo;
    k.kappa_hi = kappa_hi;
    k.eps = eps;
    return k;
}

double MutationKernel::level(double x) const {
    if (kind == Kind::uniform_window) return q;
    return kappa_lo + kappa_hi * std::exp(-std::abs(x));
}

double MutationKernel::kappa0() const { return kind == Kind::uniform_window ? q : kappa_lo; }

double MutationKernel::qhat() const {
    const double top = kind == Kind::uniform_window ? q : kappa_lo + kappa_hi;
    return 2.0 * eps * top;
}

std::optional<double> MutationKernel::shift_domination_c1() const {
    // Both catalog kernels have shifted compact windows: Q(x+alpha, y) > 0 at
    // points where Q(x, y) = 0, so no finite C1 exists.
    return std::nullopt;
}

SmModel SmModel::make(FitnessField fitness, MutationKernel kernel, SpaceGrid grid) {
    std::ostringstream err;
    const double L = grid.x_max();
    if (std::abs(grid.x_min() + L) > 1e-9 * std::max(1.0, L))
        err << "grid must be symmetric (x_min = -x_max); ";
    if (!(kernel.eps < L)) err << "kernel window must fit inside the domain; ";
    if (!(fitness.period > 0.0)) err << "fitness period must be > 0; ";
    if (!err.str().empty()) throw std::invalid_argument("SmModel: " + err.str());
    return SmModel(fitness, kernel, grid);
}

SmModel::SmModel(FitnessField f, MutationKernel k, SpaceGrid grid)
    : fitness(f), kernel(k), grid_(grid) {
    double a_min = 0.0;
    for (std::size_t i = 0; i < grid_.size(); ++i)
        a_min = std::min(a_min, fitness.lower(grid_.node(i)));
    a_neg_max_ = std::max(0.0, -a_min);
    build_pattern();
}

void SmModel::build_pattern() {
    const std::size_t n = grid_.size();
    const double dx = grid_.dx();
    row_ptr_.assign(n + 1, 0);
    col_.clear();
    val_.clear();
    diag_static_.assign(n, 0.0);

    for (std::size_t i = 0; i < n; ++i) {
        const double xi = grid_.node(i);
        double diag = (i + 1 < n) ? -1.0 / dx : 0.0;  // zero-gradient ghost at the right edge

        // window [x_i - eps, x_i + eps] intersected with the grid, trapezoid weights
        const double lvl = kernel.level(xi);
        long lo = static_cast<long>(std::ceil((xi - kernel.eps - grid_.x_min()) / dx - 1e-12));
        long hi = static_cast<long>(std::floor((xi + kernel.eps - grid_.x_min()) / dx + 1e-12));
        lo = std::max(lo, 0L);
        hi = std::min(hi, static_cast<long>(n) - 1);
        for (long j = lo; j <= hi; ++j) {
            double w = (j == lo || j == hi) ? 0.5 * dx : dx;
            if (lo == hi) w = dx;
            const double entry = lvl * w;
            if (entry == 0.0) continue;
            if (static_cast<std::size_t>(j) == i) {
                diag += entry;
            } else {
                col_.push_back(static_cast<std::size_t>(j));
                val_.push_back(entry);
            }
        }
        if (i + 1 < n) {
            col_.push_back(i + 1);
            val_.push_back(1.0 / dx);
        }
        diag_static_[i] = diag;
        row_ptr_[i + 1] = col_.size();
    }
}

void SmModel::generator_matrix(double t, GeneratorMatrix& out) const {
    const std::size_t n = grid_.size();
    out.n = n;
    out.row_ptr.assign(row_ptr_.begin(), row_ptr_.end());
    out.col.assign(col_.begin(), col_.end());
    out.val.assign(val_.begin(), val_.end());
    out.diag.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.diag[i] = diag_static_[i] + fitness(t, grid_.node(i));
}

void SmLowerEnvelope::generator_matrix(double /*t*/, GeneratorMatrix& out) const {
    const SpaceGrid& g = model_.grid();
    out.n = g.size();
    out.row_ptr.assign(model_.row_ptr_.begin(), model_.row_ptr_.end());
    out.col.assign(model_.col_.begin(), model_.col_.end());
    out.val.assign(model_.val_.begin(), model_.val_.end());
    out.diag.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        out.diag[i] = model_.diag_static_[i] + model_.fitness.lower(g.node(i));
}

double SmModel::max_step() const {
    // unit transport speed plus the worst negative reaction
    return 1.0 / (1.0 / grid_.dx() + a_neg_max_);
}

double SmModel::exp_int_a(double s, double t, double x, std::size_t n_sub) const {
    if (t < s) throw std::invalid_argument("exp_int_a: require t >= s");
    if (t == s) return 1.0;
    const double h = (t - s) / static_cast<double>(n_sub);
    double acc = 0.0;
    double prev = fitness(s, x);
    for (std::size_t k = 1; k <= n_sub; ++k) {
        const double tau = s + h * static_cast<double>(k);
        const double cur = fitness(tau, x + (tau - s));
        acc += 0.5 * h * (prev + cur);
        prev = cur;
    }
    return std::exp(acc);
}

DiscreteFunction generator_apply_sm(const SmModel& model, const DiscreteFunction& f, double t) {
    detail::require_same_grid(model.grid(), f.grid, "generator_apply_sm");
    return DiscreteFunction(f.grid, model.apply(t, f.values));
}

DiscreteFunction step_dual_sm(const SmModel& model, const DiscreteFunction& f, double t, double dt,
                              const StepScheme& scheme) {
    detail::require_same_grid(model.grid(), f.grid, "step_dual_sm");
    return DiscreteFunction(f.grid, step_dual(model, f.values, t, dt, scheme));
}

DiscreteFunction duhamel_iterate_sm(const SmModel& model, const DiscreteFunction& f, double s,
                                    double t, double tol, int max_iter,
                                    std::size_t strip_time_nodes) {
    detail::require_same_grid(model.grid(), f.grid, "duhamel_iterate_sm");
    if (!(t > s)) throw std::invalid_argument("duhamel_iterate_sm: require t > s");
    const SpaceGrid& g = model.grid();
    const std::size_t n = g.size();
    const double A = model.fitness.sup_upper();
    const double Qhat = model.kernel.qhat();

    // largest strip width with eps * e^{eps A} * Qhat <= 1/2 (contraction factor 1/2)
    double strip = t - s;
    if (Qhat > 0.0) {
        const auto gfun = [&](double e) { return e * std::exp(e * A) * Qhat; };
        double lo = 0.0, hi = 64.0;
        if (gfun(hi) > 0.5) {
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                // gfun increases until e = -1/A for A < 0; conservative bisection
                (gfun(mid) <= 0.5 ? lo : hi) = mid;
            }
            strip = std::min(strip, lo);
        }
    }
    const auto n_strips = static_cast<std::size_t>(std::ceil((t - s) / strip - 1e-12));
    const std::size_t M = std::max<std::size_t>(strip_time_nodes, 4);

    GeneratorMatrix kernel_only;  // Q alone: strip the transport and reaction parts
    model.generator_matrix(0.0, kernel_only);
    {
        const double dx = g.dx();
        for (std::size_t i = 0; i < n; ++i) {
            double d = kernel_only.diag[i] - model.fitness(0.0, g.node(i));
            if (i + 1 < n) d += 1.0 / dx;
            kernel_only.diag[i] = d;
            // remove the transport superdiagonal entry (pushed last in its row)
            for (std::size_t e = kernel_only.row_ptr[i + 1]; e-- > kernel_only.row_ptr[i];)
                if (kernel_only.col[e] == i + 1) {
                    kernel_only.val[e] -= 1.0 / dx;
                    break;
                }
        }
    }

    std::vector<double> fb = f.values;  // final condition of the current strip
    double b = t;
    for (std::size_t sidx = 0; sidx < n_strips; ++sidx) {
        const double a = std::max(s, b - strip);
        const double h = (b - a) / static_cast<double>(M);
        std::vector<double> times(M + 1);
        for (std::size_t q = 0; q <= M; ++q) times[q] = a + h * static_cast<double>(q);

        // E(q, r, i) = exp(trapz of a along the characteristic through (times[q], x_i))
        std::vector<double> E((M + 1) * (M + 1) * n, 1.0);
        const auto eidx = [&](std::size_t q_, std::size_t r, std::size_t i) {
            return (q_ * (M + 1) + r) * n + i;
        };
        for (std::size_t q = 0; q <= M; ++q) {
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                double prev = model.fitness(times[q], g.node(i));
                for (std::size_t r = q + 1; r <= M; ++r) {
                    const double cur = model.fitness(times[r], g.node(i) + (times[r] - times[q]));
                    acc += 0.5 * h * (prev + cur);
                    prev = cur;
                    E[eidx(q, r, i)] = std::exp(acc);
                }
            }
        }

        // initial guess: free-transport Duhamel head
        std::vector<std::vector<double>> psi(M + 1, std::vector<double>(n));
        for (std::size_t q = 0; q <= M; ++q)
            for (std::size_t i = 0; i < n; ++i)
                psi[q][i] = interp_right(g, fb, g.node(i) + (b - times[q])) * E[eidx(q, M, i)];
        psi[M] = fb;

        double prev_change = std::numeric_limits<double>::infinity();
        bool done = false;
        std::vector<std::vector<double>> qpsi(M + 1, std::vector<double>(n));
        for (int iter = 0; iter < max_iter; ++iter) {
            for (std::size_t r = 0; r <= M; ++r) kernel_only.apply(psi[r], qpsi[r]);
            double change = 0.0;
            for (std::size_t q = 0; q < M; ++q) {
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = g.node(i);
                    double val = interp_right(g, fb, x + (b - times[q])) * E[eidx(q, M, i)];
                    for (std::size_t r = q; r <= M; ++r) {
                        double w = (r == q || r == M) ? 0.5 * h : h;
                        val += w * E[eidx(q, r, i)] *
                               interp_right(g, qpsi[r], x + (times[r] - times[q]));
                    }
                    change = std::max(change, std::abs(val - psi[q][i]));
                    psi[q][i] = val;
                }
            }
            if (change < tol) {
                done = true;
                break;
            }
            if (iter > 0 && change >= prev_change)
                throw std::runtime_error("duhamel_iterate_sm: iteration is not contracting");
            prev_change = change;
        }
        if (!done) throw std::runtime_error("duhamel_iterate_sm: max_iter exceeded");
        fb = psi[0];
        b = a;
    }
    return DiscreteFunction(g, std::move(fb));
}

DiscreteFunction bump_psi0(const SpaceGrid& grid, double x0) {
    if (!(x0 > 0.0)) throw std::invalid_argument("bump_psi0: x0 must be > 0");
    return DiscreteFunction::from(grid, [x0](double x) {
        if (std::abs(x) >= x0) return 0.0;
        const double u = 1.0 - (x / x0) * (x / x0);
        return u * u;
    });
}

WeightPair lyapunov_pair_sm(const SmModel& model, const StepScheme& scheme, double x0) {
    const SpaceGrid& g = model.grid();
    if (!(x0 > 0.0) || !(x0 < g.x_max()))
        throw std::invalid_argument("lyapunov_pair_sm: x0 out of range (0, L)");
    const DiscreteFunction psi0 = bump_psi0(g, x0);
    SmLowerEnvelope lower(model);
    const Propagator Mbar = assemble(lower, 0.0, model.period(), scheme);
    DiscreteFunction psi = apply_dual(Mbar, psi0);
    double top = 0.0, bottom = std::numeric_limits<double>::infinity();
    for (double v : psi.values) {
        top = std::max(top, v);
        bottom = std::min(bottom, v);
    }
    if (!(bottom > 0.0))
        throw std::runtime_error("lyapunov_pair_sm: psi is not strictly positive on the grid");
    for (double& v : psi.values) v /= top;
    return WeightPair(DiscreteFunction::constant(g, 1.0), std::move(psi));
}

SmDriftRecord drift_constants_sm(const SmModel& model, const WeightPair& pair, double x0) {
    const SpaceGrid& g = model.grid();
    detail::require_same_grid(g, pair.V.grid, "drift_constants_sm");
    SmDriftRecord rec;
    const double kappa0 = model.kernel.kappa0();
    const double eps = model.kernel.eps;
    const double Qhat = model.kernel.qhat();
    const double A = model.fitness.sup_upper();
    if (!(kappa0 > 0.0)) throw std::invalid_argument("drift_constants_sm: kernel floor kappa0 = 0");

    rec.beta_drift = -30.0 / (kappa0 * eps * eps * eps) + model.fitness.lower(x0);
    rec.theta0 = 4.0 * (A + Qhat);
    rec.alpha0 = rec.beta_drift - 1.0;

    // smallest grid radius with a_upper <= -Qhat + alpha0 outside
    rec.r0 = std::numeric_limits<double>::infinity();
    for (std::size_t i = g.size(); i-- > 0;) {
        const double x = std::abs(g.node(i));
        if (model.fitness.upper(x) <= -Qhat + rec.alpha0)
            rec.r0 = x;
        else if (x >= rec.r0)
            break;
    }

    const DiscreteFunction psi0 = bump_psi0(g, x0);
    SmLowerEnvelope lower(model);
    const std::vector<double> lpsi0 = lower.apply(0.0, psi0.values);
    double m1 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < g.size(); ++i)
        m1 = std::min(m1, lpsi0[i] - rec.beta_drift * psi0.values[i]);
    rec.margin_psi_drift = m1;

    double m2 = std::numeric_limits<double>::infinity();
    const double T = model.period();
    for (double sfrac : {0.0, 0.25, 0.5, 0.75}) {
        const std::vector<double> lv = model.apply(sfrac * T, pair.V.values);
        for (std::size_t i = 0; i + 1 < g.size(); ++i)
            m2 = std::min(m2, rec.alpha0 * pair.V.values[i] + rec.theta0 * psi0.values[i] - lv[i]);
    }
    rec.margin_v_drift = m2;
    rec.holds = rec.margin_psi_drift >= -1e-8 && rec.margin_v_drift >= -1e-8;
    return rec;
}

double minorization_window_sm(const SmModel& model, const StepScheme& scheme, double s, double t,
                              double x1, double x2, double y1, double y2) {
    if (!(t > s)) throw std::invalid_argument("minorization_window_sm: require t > s");
    if (!(x1 < x2) || !(y1 < y2))
        throw std::invalid_argument("minorization_window_sm: empty interval");
    const SpaceGrid& g = model.grid();
    const Propagator P = assemble(model, s, t, scheme);
    const DiscreteFunction ind = DiscreteFunction::from(
        g, [&](double x) { return (x >= x1 && x <= x2) ? 1.0 : 0.0; });
    const DiscreteFunction v = apply_dual(P, ind);
    double eta = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.node(i);
        if (x >= y1 && x <= y2) eta = std::min(eta, v.values[i]);
    }
    if (!std::isfinite(eta))
        throw std::invalid_argument("minorization_window_sm: [y1,y2] contains no grid node");
    return eta;
}

double fitness_shift_constant(const SmModel& model, double R, int samples) {
    const double T = model.period();
    double worst = 0.0;
    for (int it = 0; it <= samples; ++it) {
        const double t = 3.0 * T * it / samples;
        for (int ix = 0; ix <= samples; ++ix) {
            const double x = -R + 2.0 * R * ix / samples;
            for (int ia = 0; ia <= samples; ++ia) {
                const double alpha = T * ia / samples;
                const int m = 64;
                double acc = 0.0;
                double prev = model.fitness(alpha, x) - model.fitness(0.0, x);
                for (int k = 1; k <= m; ++k) {
                    const double tau = t * k / m;
                    const double cur =
                        model.fitness(tau + alpha, x + tau) - model.fitness(tau, x + tau);
                    acc += 0.5 * (t / m) * (prev + cur);
                    prev = cur;
                }
                worst = std::max(worst, acc);
            }
        }
    }
    return worst;
}

} // namespace semiflow
