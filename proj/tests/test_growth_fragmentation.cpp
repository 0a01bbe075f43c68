#include <doctest.h>

#include <cmath>

#include "semiflow/growth_fragmentation.hpp"

using namespace semiflow;

namespace {

GfModel constant_model(std::size_t n = 201, double x_max = 6.0) {
    PeriodicCoefficient g0{1.0, 0.0, 0.0, 1.0};
    PeriodicCoefficient g1{0.0, 0.0, 0.0, 1.0};
    PeriodicCoefficient b0{0.0, 0.0, 0.0, 1.0};
    PeriodicCoefficient b1{1.0, 0.0, 0.0, 1.0};
    return GfModel::make(g0, g1, b0, b1, FragmentationDistribution::uniform_binary(),
                         SpaceGrid(0.0, x_max, n));
}

// independent oracle: RK4 on dX/dtau = g0(tau) + g1(tau) X
double rk4_flow(const PeriodicCoefficient& g0, const PeriodicCoefficient& g1, double s, double t,
                double x, int n_steps = 4000) {
    const double h = (t - s) / n_steps;
    const auto f = [&](double tau, double y) { return g0.value(tau) + g1.value(tau) * y; };
    double y = x;
    for (int k = 0; k < n_steps; ++k) {
        const double tau = s + k * h;
        const double k1 = f(tau, y);
        const double k2 = f(tau + 0.5 * h, y + 0.5 * h * k1);
        const double k3 = f(tau + 0.5 * h, y + 0.5 * h * k2);
        const double k4 = f(tau + h, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return y;
}

} // namespace

TEST_CASE("kappa moments of the catalog") {
    const auto ub = FragmentationDistribution::uniform_binary();
    CHECK(std::abs(kappa_moment(ub, 1.0) - 1.0) < 1e-12);
    CHECK(std::abs(kappa_moment(ub, 0.0) - 2.0) < 1e-12);
    CHECK(std::abs(kappa_moment(ub, 2.0) - 2.0 / 3.0) < 1e-12);
    for (double a : {1.5, 2.0, 3.0}) CHECK(kappa_moment(ub, a) < 1.0);

    const auto fb = FragmentationDistribution::floor_plus_bump(1.0);
    CHECK(std::abs(kappa_moment(fb, 1.0) - 1.0) < 1e-12);
    CHECK(kappa_moment(fb, 0.0) > 1.0);
    for (double a : {1.5, 2.0, 3.0}) CHECK(kappa_moment(fb, a) < 1.0);
    CHECK(fb.min_value() == 1.0);
    CHECK(fb.symmetric());

    // quadrature cross-check of the closed-form moments
    for (double k : {0.0, 1.0, 1.5, 2.0}) {
        const int m = 20000;
        double acc = 0.0;
        for (int i = 0; i <= m; ++i) {
            const double z = static_cast<double>(i) / m;
            const double w = (i == 0 || i == m) ? 0.5 : 1.0;
            acc += w * std::pow(z, k) * fb(z) / m;
        }
        CHECK(std::abs(acc - kappa_moment(fb, k)) < 1e-6);
    }
    CHECK_THROWS_AS(FragmentationDistribution::floor_plus_bump(2.5), std::invalid_argument);
}

TEST_CASE("characteristic flow: closed forms and RK4 oracle") {
    PeriodicCoefficient one{1.0, 0.0, 0.0, 1.0};
    PeriodicCoefficient zero{0.0, 0.0, 0.0, 1.0};
    // g1 = 0, g0 = 1: pure translation
    CHECK(characteristic_flow(one, zero, 0.2, 1.7, 0.5) == doctest::Approx(0.5 + 1.5).epsilon(1e-13));
    // g0 = 0 (formula-level), g1 = 1: exponential growth
    CHECK(characteristic_flow(zero, one, 0.0, 2.0, 1.5) ==
          doctest::Approx(1.5 * std::exp(2.0)).epsilon(1e-12));

    // sinusoidal coefficients vs the RK4 oracle
    PeriodicCoefficient g0{1.0, 0.4, 0.7, 1.0};
    PeriodicCoefficient g1{0.2, 0.15, -0.3, 1.0};
    for (double x : {0.0, 0.3, 2.0}) {
        const double ours = characteristic_flow(g0, g1, 0.1, 1.9, x);
        const double oracle = rk4_flow(g0, g1, 0.1, 1.9, x);
        CHECK(std::abs(ours - oracle) < 1e-9);
    }
}

TEST_CASE("flow cocycle X_{s,t} = X_{u,t} o X_{s,u}") {
    PeriodicCoefficient g0{1.0, 0.4, 0.7, 1.0};
    PeriodicCoefficient g1{0.2, 0.15, -0.3, 1.0};
    const double s = 0.05, u = 0.6, t = 1.45;
    for (double x : {0.0, 0.8, 3.0}) {
        const double direct = characteristic_flow(g0, g1, s, t, x);
        const double through = characteristic_flow(g0, g1, u, t, characteristic_flow(g0, g1, s, u, x));
        CHECK(std::abs(direct - through) < 1e-10 * std::max(1.0, std::abs(direct)));
    }
}

TEST_CASE("generator: analytic eigenpair L(1+x) = 1+x for the constant model") {
    GfModel model = constant_model(401);
    DiscreteFunction f = DiscreteFunction::from(model.grid(), [](double x) { return 1.0 + x; });
    const DiscreteFunction Lf = generator_apply_gf(model, f, 0.3);
    // interior nodes: forward difference, linear interpolation and the
    // z-trapezoid are all exact on affine data
    for (std::size_t i = 0; i + 1 < model.grid().size(); ++i)
        CHECK(Lf.values[i] == doctest::Approx(f.values[i]).epsilon(1e-10));
}

TEST_CASE("generator: f = 0 and transport-only reductions") {
    GfModel model = constant_model(101);
    const DiscreteFunction zero = DiscreteFunction::constant(model.grid(), 0.0);
    for (double v : generator_apply_gf(model, zero, 0.0).values) CHECK(v == 0.0);

    // beta ~ 0: L f reduces to g f', exact for affine f away from the boundary
    PeriodicCoefficient g0{1.0, 0.0, 0.0, 1.0};
    PeriodicCoefficient z{0.0, 0.0, 0.0, 1.0};
    GfModel m2 = GfModel::make(g0, z, z, PeriodicCoefficient{1e-12, 0.0, 0.0, 1.0},
                               FragmentationDistribution::uniform_binary(), SpaceGrid(0.0, 4.0, 101));
    DiscreteFunction lin = DiscreteFunction::from(m2.grid(), [](double x) { return 2.0 * x + 1.0; });
    const DiscreteFunction Lf = generator_apply_gf(m2, lin, 0.5);
    for (std::size_t i = 0; i + 1 < m2.grid().size(); ++i)
        CHECK(Lf.values[i] == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("step_dual_gf basics") {
    GfModel model = constant_model(101);
    DiscreteFunction f = DiscreteFunction::from(model.grid(), [](double x) { return 1.0 + 0.5 * x; });
    CHECK(step_dual_gf(model, f, 0.0, 0.0, StepScheme{}).values == f.values);

    const double dt = 0.9 * model.max_step();
    const DiscreteFunction g = step_dual_gf(model, f, 0.0, dt, StepScheme(1.0, StepMethod::heun, 0.95));
    for (double v : g.values) CHECK(v >= -1e-12);
    CHECK_THROWS_AS(step_dual_gf(model, f, 0.0, 10.0 * model.max_step(), StepScheme{}),
                    std::invalid_argument);
}

TEST_CASE("floquet matrix entries from the coefficient closures") {
    GfModel model = constant_model();
    const Mat2 A = floquet_matrix(model, 0.37);
    CHECK(A[0] == 0.0);  // b0 (eta0 - 1)
    CHECK(A[1] == 1.0);  // g0
    CHECK(A[2] == 1.0);  // b1 (eta0 - 1), eta0 = 2
    CHECK(A[3] == 0.0);  // g1

    // periodicity in t
    PeriodicCoefficient g0{1.0, 0.3, 0.2, 1.0};
    GfModel pm = GfModel::make(g0, PeriodicCoefficient{0.0, 0.0, 0.0, 1.0},
                               PeriodicCoefficient{0.1, 0.05, 0.0, 1.0},
                               PeriodicCoefficient{1.0, 0.2, 0.0, 1.0},
                               FragmentationDistribution::uniform_binary(), SpaceGrid(0.0, 5.0, 51));
    const Mat2 A1 = floquet_matrix(pm, 0.25);
    const Mat2 A2 = floquet_matrix(pm, 1.25);
    for (int q = 0; q < 4; ++q) CHECK(A1[q] == A2[q]);
}

TEST_CASE("monodromy: A = [[0,1],[1,0]] gives exp(A) to 1e-10, RK4 order ~16x") {
    GfModel model = constant_model();
    const MonodromyData md = monodromy(model, 200);
    const double ch = std::cosh(1.0), sh = std::sinh(1.0);
    const Mat2& X = md.xi.back();
    CHECK(std::abs(X[0] - ch) < 1e-10);
    CHECK(std::abs(X[1] - sh) < 1e-10);
    CHECK(std::abs(X[2] - sh) < 1e-10);
    CHECK(std::abs(X[3] - ch) < 1e-10);

    const auto err = [&](std::size_t n) {
        const Mat2& Y = monodromy(model, n).xi.back();
        return std::max(std::abs(Y[0] - ch), std::abs(Y[1] - sh));
    };
    const double ratio = err(25) / err(50);
    CHECK(ratio > 10.0);
    CHECK(ratio < 25.0);
}

TEST_CASE("perron_floquet: constant model Lambda = e, eigenvector (1,1)/2") {
    GfModel model = constant_model();
    const FloquetEigen2x2 eig = perron_floquet(model, 200);
    CHECK(std::abs(eig.Lambda - std::exp(1.0)) < 1e-9);
    CHECK(std::abs(eig.lambda_F - 1.0) < 1e-9);
    CHECK(eig.u0 == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(eig.v0 == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("perron eigen extraction on a hand 2x2 and scaling homogeneity") {
    // Xi_T = [[2,1],[1,2]]: Lambda = 3, eigenvector (1/2, 1/2)
    const Mat2 m{2.0, 1.0, 1.0, 2.0};
    const double tr = m[0] + m[3], det = m[0] * m[3] - m[1] * m[2];
    const double lam = 0.5 * (tr + std::sqrt(tr * tr - 4.0 * det));
    CHECK(lam == doctest::Approx(3.0));
    const double w0 = m[1], w1 = lam - m[0];
    CHECK(w0 / (w0 + w1) == doctest::Approx(0.5));

    // scaling: c * Xi scales Lambda by c, eigenvector unchanged
    const double c = 2.5;
    const Mat2 ms{c * m[0], c * m[1], c * m[2], c * m[3]};
    const double trs = ms[0] + ms[3], dets = ms[0] * ms[3] - ms[1] * ms[2];
    const double lams = 0.5 * (trs + std::sqrt(trs * trs - 4.0 * dets));
    CHECK(lams == doctest::Approx(c * lam));
    CHECK(ms[1] / (ms[1] + lams - ms[0]) == doctest::Approx(0.5));
}

TEST_CASE("floquet_h: constant model gives h proportional to 1+x, periodic in s") {
    GfModel model = constant_model();
    const FloquetEigen2x2 eig = perron_floquet(model, 400);
    for (double s : {0.0, 0.31, 0.77}) {
        const double h0 = floquet_h(model, eig, s, 0.0);
        CHECK(h0 > 0.0);  // u_{-s} > 0
        for (double x : {0.5, 1.0, 3.0}) {
            const double ratio = floquet_h(model, eig, s, x) / (h0 * (1.0 + x));
            CHECK(std::abs(ratio - 1.0) < 1e-8);
        }
        const double diff = std::abs(floquet_h(model, eig, s + 1.0, 2.0) -
                                     floquet_h(model, eig, s, 2.0));
        CHECK(diff < 1e-9);
    }
}

TEST_CASE("floquet_h periodic model stays positive and periodic") {
    PeriodicCoefficient g0{1.0, 0.3, 0.0, 1.0};
    PeriodicCoefficient g1{0.0, 0.0, 0.0, 1.0};
    PeriodicCoefficient b0{0.0, 0.0, 0.0, 1.0};
    PeriodicCoefficient b1{1.0, 0.3, 1.0, 1.0};
    GfModel model = GfModel::make(g0, g1, b0, b1, FragmentationDistribution::uniform_binary(),
                                  SpaceGrid(0.0, 5.0, 51));
    const FloquetEigen2x2 eig = perron_floquet(model, 400);
    const MonodromyData& md = eig.mono;
    for (std::size_t k = 1; k < md.xi.size(); ++k)
        for (double v : md.xi[k]) CHECK(v > 0.0);  // Xi_t entrywise positive
    for (double s : {0.0, 0.2, 0.9}) {
        CHECK(floquet_h(model, eig, s, 0.0) > 0.0);
        CHECK(std::abs(floquet_h(model, eig, s + 1.0, 1.3) - floquet_h(model, eig, s, 1.3)) < 1e-9);
    }
}

TEST_CASE("doeblin certificate: formula pieces and shrink factor") {
    GfModel model = constant_model(301, 6.0);
    const DoeblinCertificate c0 = doeblin_certificate_gf(model, StepScheme{}, 0.0, 0.5, 2.0, false);
    CHECK(c0.c_st > 0.0);
    CHECK(c0.a1 == doctest::Approx(0.0));  // t1 = t2, x = 0 corner
    CHECK(c0.a2 >= 1.0);
    CHECK(c0.B >= model.b1.min_value() * 2.0);

    const double ca = doeblin_certificate_gf(model, StepScheme{}, 0.0, 0.05, 2.0, false).c_st;
    const double cb = doeblin_certificate_gf(model, StepScheme{}, 0.0, 0.025, 2.0, false).c_st;
    CHECK(std::abs(ca / cb / 2.0 - 1.0) < 0.05);  // linear in (t - s)
}

TEST_CASE("doeblin certificate verifies on the assembled propagator") {
    GfModel model = constant_model(241, 6.0);
    const DoeblinCertificate cert =
        doeblin_certificate_gf(model, StepScheme(0.01, StepMethod::heun, 0.9), 0.0, 0.5, 2.0, true);
    CHECK(cert.verified);
    CHECK(cert.margin_rel >= 0.0);
    CHECK(cert.nu_hi > cert.nu_lo);
}

TEST_CASE("gabriel bounds: degenerate constant g0 collapses, shape is validated") {
    GfModel model = constant_model(241, 6.0);
    GabrielParams p;
    p.n_s = 4;
    p.t_ref = 6;
    const GabrielBounds gb = gabriel_bounds(model, StepScheme(0.02, StepMethod::heun, 0.9), p);
    CHECK(gb.holds);
    CHECK(std::abs(gb.lam_bar_g0 - gb.lam_g0_bar) < 1e-9);  // same constant everywhere
    CHECK(std::abs(gb.lambda_F - 1.0) < 1e-8);
    CHECK(std::abs(gb.lam_g0_bar - 1.0) < 5e-3);  // grid route near the analytic value

    PeriodicCoefficient g1_bad{0.1, 0.0, 0.0, 1.0};
    GfModel bad = GfModel::make(model.g0, g1_bad, model.b0, model.b1, model.kappa, model.grid());
    CHECK_THROWS_AS(gabriel_bounds(bad, StepScheme{}, p), std::invalid_argument);
}

TEST_CASE("model validation rejects broken floors") {
    PeriodicCoefficient bad_g0{0.1, 0.5, 0.0, 1.0};
    PeriodicCoefficient z{0.0, 0.0, 0.0, 1.0};
    PeriodicCoefficient b1{1.0, 0.0, 0.0, 1.0};
    CHECK_THROWS_AS(GfModel::make(bad_g0, z, z, b1, FragmentationDistribution::uniform_binary(),
                                  SpaceGrid(0.0, 5.0, 11)),
                    std::invalid_argument);
    CHECK_THROWS_AS(GfModel::make(b1, z, z, z, FragmentationDistribution::uniform_binary(),
                                  SpaceGrid(0.0, 5.0, 11)),
                    std::invalid_argument);
    CHECK_THROWS_AS(GfModel::make(b1, z, z, b1, FragmentationDistribution::uniform_binary(),
                                  SpaceGrid(-1.0, 5.0, 11)),
                    std::invalid_argument);
}
