#include <doctest.h>

#include <cmath>
#include <random>

#include "semiflow/measure_space.hpp"

using namespace semiflow;

TEST_CASE("grid construction and invariants") {
    CHECK_THROWS_AS(SpaceGrid(0.0, 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(SpaceGrid(1.0, 0.0, 10), std::invalid_argument);
    SpaceGrid g(0.0, 1.0, 101);
    CHECK(g.dx() == doctest::Approx(0.01));
    CHECK(g.node(0) == 0.0);
    CHECK(g.node(100) == doctest::Approx(1.0));
    CHECK(g.nearest(0.503) == 50);
}

TEST_CASE("pairing: dirac, zero, trapezoid Lebesgue") {
    SpaceGrid g(0.0, 1.0, 101);
    DiscreteFunction f = DiscreteFunction::from(g, [](double x) { return x; });

    DiscreteMeasure d = DiscreteMeasure::dirac(g, 37);
    CHECK(pairing(d, f) == f.values[37]);

    CHECK(pairing(DiscreteMeasure::zero(g), f) == 0.0);

    // trapezoid weights integrate linear functions exactly: int_0^1 x dx = 1/2
    DiscreteMeasure leb = DiscreteMeasure::from_density(g, [](double) { return 1.0; });
    CHECK(std::abs(pairing(leb, f) - 0.5) < 1e-12);
}

TEST_CASE("pairing rejects mismatched grids") {
    SpaceGrid g1(0.0, 1.0, 11), g2(0.0, 1.0, 12);
    CHECK_THROWS_AS(pairing(DiscreteMeasure::zero(g1), DiscreteFunction::constant(g2, 1.0)),
                    std::invalid_argument);
}

TEST_CASE("weighted TV norm on atoms") {
    SpaceGrid g(-1.0, 1.0, 21);
    DiscreteFunction V = DiscreteFunction::from(g, [](double x) { return 1.0 + x * x; });

    CHECK(weighted_tv_norm(DiscreteMeasure::dirac(g, 5), V) == doctest::Approx(V.values[5]));

    // delta_a - delta_b: mutually singular parts add
    DiscreteMeasure mu = DiscreteMeasure::zero(g);
    mu.masses[3] = 1.0;
    mu.masses[15] = -1.0;
    CHECK(weighted_tv_norm(mu, V) == doctest::Approx(V.values[3] + V.values[15]));

    for (double& m : mu.masses) m *= 2.5;
    CHECK(weighted_tv_norm(mu, V) == doctest::Approx(2.5 * (V.values[3] + V.values[15])));
}

TEST_CASE("weighted sup norm") {
    SpaceGrid g(-1.0, 1.0, 21);
    DiscreteFunction V = DiscreteFunction::from(g, [](double x) { return 2.0 + std::sin(x); });
    CHECK(weighted_sup_norm(V, V) == doctest::Approx(1.0));
    CHECK(weighted_sup_norm(DiscreteFunction::constant(g, 0.0), V) == 0.0);
    DiscreteFunction f = V;
    f.values[7] *= 2.0;
    CHECK(weighted_sup_norm(f, V) == doctest::Approx(2.0));
}

TEST_CASE("Hoelder, norm axioms, bilinearity on random data") {
    SpaceGrid g(-2.0, 2.0, 41);
    DiscreteFunction V = DiscreteFunction::from(g, [](double x) { return 1.0 + x * x; });
    std::mt19937 rng(12345);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> mv(g.size()), fv(g.size()), m2(g.size()), f2(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            mv[i] = U(rng);
            fv[i] = U(rng);
            m2[i] = U(rng);
            f2[i] = U(rng);
        }
        DiscreteMeasure mu(g, mv), nu(g, m2);
        DiscreteFunction f(g, fv), h(g, f2);

        CHECK(std::abs(pairing(mu, f)) <=
              weighted_tv_norm(mu, V) * weighted_sup_norm(f, V) * (1.0 + 1e-12));

        // triangle inequality and positive homogeneity
        DiscreteMeasure sum = mu;
        for (std::size_t i = 0; i < g.size(); ++i) sum.masses[i] += nu.masses[i];
        CHECK(weighted_tv_norm(sum, V) <=
              weighted_tv_norm(mu, V) + weighted_tv_norm(nu, V) + 1e-12);
        DiscreteMeasure sc = mu;
        for (double& m : sc.masses) m *= 3.5;
        CHECK(weighted_tv_norm(sc, V) == doctest::Approx(3.5 * weighted_tv_norm(mu, V)));

        // bilinearity
        const double lhs = pairing(mu, DiscreteFunction(g, [&] {
                                       std::vector<double> v(g.size());
                                       for (std::size_t i = 0; i < g.size(); ++i)
                                           v[i] = 2.0 * f.values[i] - 3.0 * h.values[i];
                                       return v;
                                   }()));
        CHECK(lhs == doctest::Approx(2.0 * pairing(mu, f) - 3.0 * pairing(mu, h)).epsilon(1e-12));
    }
}

TEST_CASE("weight pair validation") {
    SpaceGrid g(-1.0, 1.0, 11);
    DiscreteFunction V = DiscreteFunction::constant(g, 1.0);
    CHECK_THROWS_AS(WeightPair(V, DiscreteFunction::constant(g, 2.0)), std::invalid_argument);
    CHECK_THROWS_AS(WeightPair(V, DiscreteFunction::constant(g, 0.0)), std::invalid_argument);
    CHECK_NOTHROW(WeightPair(V, DiscreteFunction::constant(g, 0.5)));
}
