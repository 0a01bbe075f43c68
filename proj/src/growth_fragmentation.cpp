#include "semiflow/growth_fragmentation.hpp"

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

double reduce_mod(double t, double T) {
    double r = std::fmod(t, T);
    if (r < 0.0) r += T;
    return r;
}

// Adaptive Simpson on a smooth integrand.
double simpson(const auto& f, double a, double b, double fa, double fm, double fb, double whole,
               double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const auto& f, double a, double b, double tol) {
    if (a == b) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}
} // namespace

double PeriodicCoefficient::value(double t) const {
    if (sin_amp == 0.0) return mean;
    const double tm = reduce_mod(t, period);
    return mean + sin_amp * std::sin(kTwoPi * tm / period + sin_phase);
}

double PeriodicCoefficient::integral(double a, double b) const {
    double s = mean * (b - a);
    if (sin_amp != 0.0) {
        const double w = kTwoPi / period;
        s -= sin_amp / w * (std::cos(w * b + sin_phase) - std::cos(w * a + sin_phase));
    }
    return s;
}

FragmentationDistribution FragmentationDistribution::uniform_binary() {
    FragmentationDistribution k;
    k.kind = Kind::uniform_binary;
    k.c0 = 2.0;
    k.c1 = k.c2 = 0.0;
    k.kappa_floor = 2.0;
    return k;
}

FragmentationDistribution FragmentationDistribution::floor_plus_bump(double kappa_floor) {
    if (!(kappa_floor > 0.0) || kappa_floor > 2.0)
        throw std::invalid_argument("floor_plus_bump: need 0 < kappa_floor <= 2 for eta_1 = 1");
    FragmentationDistribution k;
    k.kind = Kind::floor_plus_bump;
    const double cb = 12.0 - 6.0 * kappa_floor;  // forces eta_1 = 1
    k.c0 = kappa_floor;
    k.c1 = cb;
    k.c2 = -cb;
    k.kappa_floor = kappa_floor;
    if (std::abs(kappa_moment(k, 1.0) - 1.0) > 1e-12)
        throw std::logic_error("floor_plus_bump: eta_1 != 1");
    return k;
}

double kappa_moment(const FragmentationDistribution& kappa, double k) {
    if (k < 0.0) throw std::invalid_argument("kappa_moment: require k >= 0");
    return kappa.c0 / (k + 1.0) + kappa.c1 / (k + 2.0) + kappa.c2 / (k + 3.0);
}

double characteristic_flow(const PeriodicCoefficient& g0, const PeriodicCoefficient& g1, double s,
                           double t, double x) {
    if (t < s) throw std::invalid_argument("characteristic_flow: require t >= s");
    if (t == s) return x;
    const double head = x * std::exp(g1.integral(s, t));
    const auto integrand = [&](double tau) { return g0.value(tau) * std::exp(g1.integral(tau, t)); };
    return head + integrate(integrand, s, t, 1e-13);
}

GfModel GfModel::make(PeriodicCoefficient g0, PeriodicCoefficient g1, PeriodicCoefficient b0,
                      PeriodicCoefficient b1, FragmentationDistribution kappa, SpaceGrid grid,
                      double alpha_weight, int z_nodes) {
    std::ostringstream err;
    if (std::abs(grid.x_min()) > 1e-12) err << "grid.x_min must be 0 for growth-fragmentation; ";
    if (!(alpha_weight > 1.0)) err << "alpha_weight must be > 1; ";
    if (z_nodes < 4) err << "z_nodes must be >= 4; ";
    const double T = g0.period;
    if (!(T > 0.0)) err << "period must be > 0; ";
    if (g1.period != T || b0.period != T || b1.period != T)
        err << "all coefficients must share one period; ";
    if (!(g0.min_value() > 0.0)) err << "g0 positivity floor violated; ";
    if (!(b1.min_value() > 0.0)) err << "b1 positivity floor violated; ";
    if (b0.min_value() < 0.0) err << "b0 must be nonnegative; ";
    // g(t,x) = g0 + g1 x must stay >= 0 on the grid (upwind direction).
    if (g1.min_value() < 0.0 && g0.min_value() + g1.min_value() * grid.x_max() < 0.0)
        err << "g(t,x) becomes negative on the grid; ";
    if (!err.str().empty()) throw std::invalid_argument("GfModel: " + err.str());
    return GfModel(g0, g1, b0, b1, kappa, grid, alpha_weight, z_nodes);
}

GfModel::GfModel(PeriodicCoefficient g0_, PeriodicCoefficient g1_, PeriodicCoefficient b0_,
                 PeriodicCoefficient b1_, FragmentationDistribution kappa_, SpaceGrid grid,
                 double alpha, int mz)
    : g0(g0_), g1(g1_), b0(b0_), b1(b1_), kappa(kappa_), alpha_weight(alpha), z_nodes(mz),
      grid_(grid) {
    g_max_ = g0.max_value() + std::max(0.0, g1.max_value()) * grid_.x_max();
    beta_max_ = b0.max_value() + b1.max_value() * grid_.x_max();
    build_pattern();
}

void GfModel::build_pattern() {
    const std::size_t n = grid_.size();
    const double dx = grid_.dx();
    const std::size_t mz = static_cast<std::size_t>(z_nodes);
    diag_gc_.assign(n, 0.0);
    diag_bc_.assign(n, 0.0);
    row_ptr_.assign(n + 1, 0);
    col_.clear();
    gc_.clear();
    bc_.clear();

    // z-quadrature: trapezoid nodes on [0,1], weight w_m, with kappa folded in.
    std::vector<double> zq(mz), wq(mz);
    for (std::size_t m = 0; m < mz; ++m) {
        zq[m] = static_cast<double>(m) / static_cast<double>(mz - 1);
        double w = 1.0 / static_cast<double>(mz - 1);
        if (m == 0 || m + 1 == mz) w *= 0.5;
        wq[m] = w * kappa(zq[m]);
    }

    const auto V = [&](double x) { return 1.0 + std::pow(x, alpha_weight); };
    std::vector<double> row_g(n, 0.0), row_b(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(row_g.begin(), row_g.end(), 0.0);
        std::fill(row_b.begin(), row_b.end(), 0.0);
        double dg = 0.0, db = -1.0;  // -beta f on the diagonal

        if (i + 1 < n) {
            dg -= 1.0 / dx;
            row_g[i + 1] += 1.0 / dx;
        } else {
            // last node: ghost value f(x_max + dx) = f(x_max) V(x_max+dx)/V(x_max)
            const double c_ext = V(grid_.x_max() + dx) / V(grid_.x_max());
            dg += (c_ext - 1.0) / dx;
        }

        const double xi = grid_.node(i);
        for (std::size_t m = 0; m < mz; ++m) {
            const double y = zq[m] * xi;  // always inside [0, x_i]
            double r = y / dx;
            auto j = static_cast<std::size_t>(r);
            if (j + 1 >= n) j = n - 2;
            const double th = r - static_cast<double>(j);
            row_b[j] += wq[m] * (1.0 - th);
            row_b[j + 1] += wq[m] * th;
        }
        db += row_b[i];
        row_b[i] = 0.0;

        diag_gc_[i] = dg;
        diag_bc_[i] = db;
        for (std::size_t j = 0; j < n; ++j) {
            if (row_g[j] != 0.0 || row_b[j] != 0.0) {
                col_.push_back(j);
                gc_.push_back(row_g[j]);
                bc_.push_back(row_b[j]);
            }
        }
        row_ptr_[i + 1] = col_.size();
    }
}

void GfModel::generator_matrix(double t, GeneratorMatrix& out) const {
    const std::size_t n = grid_.size();
    out.n = n;
    out.row_ptr.assign(row_ptr_.begin(), row_ptr_.end());
    out.col.assign(col_.begin(), col_.end());
    out.diag.resize(n);
    out.val.resize(col_.size());
    const double g0t = g0.value(t), g1t = g1.value(t);
    const double b0t = b0.value(t), b1t = b1.value(t);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = grid_.node(i);
        const double gi = g0t + g1t * x;
        const double bi = b0t + b1t * x;
        out.diag[i] = gi * diag_gc_[i] + bi * diag_bc_[i];
        for (std::size_t e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e)
            out.val[e] = gi * gc_[e] + bi * bc_[e];
    }
}

double GfModel::max_step() const {
    // transport plus reaction keeps 1 + dt*diag >= 0
    return 1.0 / (g_max_ / grid_.dx() + beta_max_);
}

DiscreteFunction GfModel::weight_V() const {
    const double a = alpha_weight;
    return DiscreteFunction::from(grid_, [a](double x) { return 1.0 + std::pow(x, a); });
}

DiscreteFunction generator_apply_gf(const GfModel& model, const DiscreteFunction& f, double t) {
    detail::require_same_grid(model.grid(), f.grid, "generator_apply_gf");
    return DiscreteFunction(f.grid, model.apply(t, f.values));
}

DiscreteFunction step_dual_gf(const GfModel& model, const DiscreteFunction& f, double t, double dt,
                              const StepScheme& scheme) {
    detail::require_same_grid(model.grid(), f.grid, "step_dual_gf");
    return DiscreteFunction(f.grid, step_dual(model, f.values, t, dt, scheme));
}

namespace {
Mat2 mat2_mul(const Mat2& a, const Mat2& b) {
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3]};
}

Mat2 rk4_step(const GfModel& model, const Mat2& y, double t, double h) {
    const auto rhs = [&](double tau, const Mat2& w) { return mat2_mul(floquet_matrix(model, tau), w); };
    const auto axpy = [](const Mat2& a, double c, const Mat2& b) {
        return Mat2{a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2], a[3] + c * b[3]};
    };
    const Mat2 k1 = rhs(t, y);
    const Mat2 k2 = rhs(t + 0.5 * h, axpy(y, 0.5 * h, k1));
    const Mat2 k3 = rhs(t + 0.5 * h, axpy(y, 0.5 * h, k2));
    const Mat2 k4 = rhs(t + h, axpy(y, h, k3));
    Mat2 out;
    for (int q = 0; q < 4; ++q)
        out[q] = y[q] + h / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
    return out;
}
} // namespace

Mat2 floquet_matrix(const GfModel& model, double t) {
    const double eta0 = kappa_moment(model.kappa, 0.0);
    const double tm = -t;
    return {model.b0.value(tm) * (eta0 - 1.0), model.g0.value(tm),
            model.b1.value(tm) * (eta0 - 1.0), model.g1.value(tm)};
}

MonodromyData monodromy(const GfModel& model, std::size_t n_steps) {
    if (n_steps < 4) throw std::invalid_argument("monodromy: n_steps must be >= 4");
    MonodromyData md;
    md.T = model.period();
    md.n_steps = n_steps;
    md.xi.reserve(n_steps + 1);
    const double h = md.T / static_cast<double>(n_steps);
    Mat2 y{1.0, 0.0, 0.0, 1.0};
    md.xi.push_back(y);
    for (std::size_t k = 0; k < n_steps; ++k) {
        y = rk4_step(model, y, static_cast<double>(k) * h, h);
        md.xi.push_back(y);
    }
    return md;
}

Mat2 MonodromyData::xi_at(const GfModel& model, double t) const {
    if (t < 0.0 || t > T * (1.0 + 1e-12)) throw std::invalid_argument("xi_at: t outside [0, T]");
    const double h = T / static_cast<double>(n_steps);
    auto k = static_cast<std::size_t>(t / h);
    if (k > n_steps) k = n_steps;
    const double rem = t - static_cast<double>(k) * h;
    Mat2 y = xi[k];
    if (rem > 1e-14 * T) y = rk4_step(model, y, static_cast<double>(k) * h, rem);
    return y;
}

FloquetEigen2x2 perron_floquet(const GfModel& model, std::size_t n_steps) {
    FloquetEigen2x2 out;
    out.mono = monodromy(model, n_steps);
    const Mat2& m = out.mono.xi.back();
    for (double v : m)
        if (!(v > 0.0))
            throw std::runtime_error(
                "perron_floquet: Xi_T is not entrywise positive (coefficient floor broken?)");
    const double tr = m[0] + m[3];
    const double det = m[0] * m[3] - m[1] * m[2];
    const double disc = tr * tr - 4.0 * det;
    if (disc < 0.0) throw std::runtime_error("perron_floquet: complex dominant root");
    out.Lambda = 0.5 * (tr + std::sqrt(disc));
    if (!(out.Lambda > 0.0)) throw std::runtime_error("perron_floquet: nonpositive Perron root");
    const double w0 = m[1];                 // Xi_12 > 0
    const double w1 = out.Lambda - m[0];    // > 0 for positive matrices
    if (!(w1 > 0.0)) throw std::runtime_error("perron_floquet: degenerate eigenvector");
    out.u0 = w0 / (w0 + w1);
    out.v0 = w1 / (w0 + w1);
    out.lambda_F = std::log(out.Lambda) / out.mono.T;
    return out;
}

double floquet_h(const GfModel& model, const FloquetEigen2x2& eig, double s, double x) {
    const double T = eig.mono.T;
    const double tneg = reduce_mod(-s, T);
    const Mat2 xi = eig.mono.xi_at(model, tneg);
    const double scale = std::exp(-eig.lambda_F * tneg);
    const double u = scale * (xi[0] * eig.u0 + xi[1] * eig.v0);
    const double v = scale * (xi[2] * eig.u0 + xi[3] * eig.v0);
    return u + v * x;
}

DoeblinCertificate doeblin_certificate_gf(const GfModel& model, const StepScheme& scheme, double s,
                                          double t, double R, bool verify) {
    if (!(t > s)) throw std::invalid_argument("doeblin_certificate_gf: require t > s");
    if (!(R > 0.0) || R > model.grid().x_max())
        throw std::invalid_argument("doeblin_certificate_gf: R outside (0, x_max]");
    DoeblinCertificate cert;

    const int mt = 9, mx = 9;
    const double Xst_R = model.flow(s, t, R);
    const double Xst_0 = model.flow(s, t, 0.0);
    double a1 = std::numeric_limits<double>::infinity(), a2 = 0.0;
    for (int i = 0; i < mt; ++i) {
        const double t1 = s + (t - s) * i / (mt - 1);
        for (int j = i; j < mt; ++j) {
            const double t2 = s + (t - s) * j / (mt - 1);
            for (int q = 0; q < mx; ++q) {
                const double x = R * q / (mx - 1);
                const double num = model.flow(t1, t2, x);
                const double den = model.flow(s, t, x);
                a1 = std::min(a1, num / den);
                a2 = std::max(a2, num / den);
            }
        }
    }
    cert.a1 = a1;
    cert.a2 = a2;

    double B = 0.0;
    for (int i = 0; i <= 64; ++i) {
        const double tau = s + (t - s) * i / 64.0;
        B = std::max(B, model.b0.value(tau) + model.b1.value(tau) * model.flow(s, tau, R));
    }
    cert.B = B;

    const double c_floor = std::min(model.g0.min_value(), model.b1.min_value());
    cert.c_st = (t - s) / (cert.a2 * Xst_R) * std::exp((s - t) * B) * model.kappa.min_value() *
                c_floor;
    cert.nu_lo = cert.a1 * Xst_0;
    cert.nu_hi = Xst_0;

    if (verify) {
        const SpaceGrid& g = model.grid();
        if (cert.nu_hi > g.x_max())
            throw std::runtime_error("doeblin_certificate_gf: nu support exceeds the grid");
        const Propagator P = assemble(model, s, t, scheme);
        const DiscreteMeasure nu = DiscreteMeasure::lebesgue_on(g, cert.nu_lo, cert.nu_hi);
        const std::size_t i_hi = g.nearest(R);
        double worst = std::numeric_limits<double>::infinity();
        std::size_t worst_node = 0;
        for (std::size_t j = 0; j < g.size(); ++j) {
            if (nu.masses[j] <= 0.0) continue;
            const double rhs = cert.c_st * nu.masses[j];
            double lhs = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i <= i_hi; ++i) lhs = std::min(lhs, P.matrix(i, j));
            const double m = lhs / rhs - 1.0;
            if (m < worst) {
                worst = m;
                worst_node = j;
            }
        }
        cert.verified = true;
        cert.margin_rel = worst;
        cert.worst_node = worst_node;
    }
    return cert;
}

namespace {
double lambda_constant_rate(const GfModel& proto, const StepScheme& scheme, double g0c,
                            const GabrielParams& p) {
    PeriodicCoefficient g0{g0c, 0.0, 0.0, proto.g0.period};
    GfModel m = GfModel::make(g0, proto.g1, proto.b0, proto.b1, proto.kappa, proto.grid(),
                              proto.alpha_weight, proto.z_nodes);
    // autonomous: unit-time map, then raise to the reference horizon
    Propagator U = assemble(m, 0.0, 1.0, scheme);
    DenseMatrix M = U.matrix;
    for (int k = 1; k < p.t_ref; ++k) M = M.multiply(U.matrix);
    Propagator P(proto.grid(), 0.0, static_cast<double>(p.t_ref), std::move(M));
    const PeriodMapEigen e = power_iterate(P, m.weight_V(), p.power_tol, p.power_max_iter);
    if (!e.converged)
        throw std::runtime_error("gabriel_bounds: power iteration did not converge");
    return std::log(e.Lambda) / static_cast<double>(p.t_ref);
}
} // namespace

GabrielBounds gabriel_bounds(const GfModel& model, const StepScheme& scheme,
                             const GabrielParams& p) {
    if (model.g1.mean != 0.0 || model.g1.sin_amp != 0.0)
        throw std::invalid_argument("gabriel_bounds: requires g1 = 0");
    if (model.b0.mean != 0.0 || model.b0.sin_amp != 0.0)
        throw std::invalid_argument("gabriel_bounds: requires b0 = 0");
    if (model.b1.sin_amp != 0.0)
        throw std::invalid_argument("gabriel_bounds: requires constant b1");
    if (!model.kappa.symmetric())
        throw std::invalid_argument("gabriel_bounds: requires symmetric kappa");
    if (p.t_ref < 1) throw std::invalid_argument("gabriel_bounds: t_ref must be >= 1");

    GabrielBounds out;
    out.lambda_F = perron_floquet(model, p.n_monodromy).lambda_F;

    const double T = model.period();
    double acc = 0.0;
    for (int j = 0; j <= p.n_s; ++j) {
        const double sj = T * j / p.n_s;
        const double lam = lambda_constant_rate(model, scheme, model.g0.value(sj), p);
        out.samples.emplace_back(sj, lam);
        acc += (j == 0 || j == p.n_s) ? 0.5 * lam : lam;
    }
    out.lam_bar_g0 = acc / p.n_s;
    out.lam_g0_bar = lambda_constant_rate(model, scheme, model.g0.mean_value(), p);

    // measured grid bias: two routes to the same constant-coefficient eigenvalue
    PeriodicCoefficient g0c{model.g0.mean_value(), 0.0, 0.0, T};
    GfModel collapsed = GfModel::make(g0c, model.g1, model.b0, model.b1, model.kappa, model.grid(),
                                      model.alpha_weight, model.z_nodes);
    out.allowance =
        std::abs(out.lam_g0_bar - perron_floquet(collapsed, p.n_monodromy).lambda_F);

    const double tol = 1e-6 + out.allowance;
    out.holds = (out.lam_bar_g0 <= out.lambda_F + tol) && (out.lambda_F <= out.lam_g0_bar + tol);
    return out;
}

} // namespace semiflow
