#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace semiflow {

/// Uniform 1-d grid on [x_min, x_max] with n_nodes inclusive endpoints.
/// Value type: two grids are "the same" iff bounds and node count match.
class SpaceGrid {
public:
    SpaceGrid(double x_min, double x_max, std::size_t n_nodes);

    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    std::size_t size() const { return n_; }
    double dx() const { return dx_; }
    double node(std::size_t i) const { return x_min_ + static_cast<double>(i) * dx_; }
    std::vector<double> nodes() const;

    /// Index of the nearest node to x (clamped to the grid).
    std::size_t nearest(double x) const;

    bool operator==(const SpaceGrid& o) const {
        return x_min_ == o.x_min_ && x_max_ == o.x_max_ && n_ == o.n_;
    }

private:
    double x_min_, x_max_, dx_;
    std::size_t n_;
};

/// Nodal values f(x_i); the discrete stand-in for a weightedly bounded function.
struct DiscreteFunction {
    SpaceGrid grid;
    std::vector<double> values;

    DiscreteFunction(SpaceGrid g, std::vector<double> v);
    static DiscreteFunction constant(const SpaceGrid& g, double c);
    static DiscreteFunction from(const SpaceGrid& g, const auto& fn) {
        std::vector<double> v(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) v[i] = fn(g.node(i));
        return DiscreteFunction(g, std::move(v));
    }

    double operator[](std::size_t i) const { return values[i]; }
    std::size_t size() const { return values.size(); }
};

/// Signed nodal masses; quadrature weights are already folded in, so the
/// pairing with functions is a plain dot product and transpose duality is
/// exact at the matrix level.
struct DiscreteMeasure {
    SpaceGrid grid;
    std::vector<double> masses;

    DiscreteMeasure(SpaceGrid g, std::vector<double> m);
    static DiscreteMeasure zero(const SpaceGrid& g);
    static DiscreteMeasure dirac(const SpaceGrid& g, std::size_t node, double mass = 1.0);
    /// Trapezoid discretization of density(x)dx (dx weights, dx/2 at endpoints).
    static DiscreteMeasure from_density(const SpaceGrid& g, const auto& density) {
        std::vector<double> m(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            double w = (i == 0 || i + 1 == g.size()) ? 0.5 * g.dx() : g.dx();
            m[i] = w * density(g.node(i));
        }
        return DiscreteMeasure(g, std::move(m));
    }
    /// Lebesgue measure restricted to [a, b] (trapezoid weights on the nodes inside).
    static DiscreteMeasure lebesgue_on(const SpaceGrid& g, double a, double b);

    double operator[](std::size_t i) const { return masses[i]; }
    std::size_t size() const { return masses.size(); }
};

/// The (V, psi) weight couple, 0 < psi <= V nodewise.
struct WeightPair {
    DiscreteFunction V;
    DiscreteFunction psi;

    WeightPair(DiscreteFunction V_, DiscreteFunction psi_);
};

/// <mu, f> = sum_i mu_i f_i.
double pairing(const DiscreteMeasure& mu, const DiscreteFunction& f);

/// ||mu||_M(V) = sum_i |mu_i| V_i.
double weighted_tv_norm(const DiscreteMeasure& mu, const DiscreteFunction& V);

/// ||f||_B(V) = max_i |f_i| / V_i.
double weighted_sup_norm(const DiscreteFunction& f, const DiscreteFunction& V);

namespace detail {
void require_same_grid(const SpaceGrid& a, const SpaceGrid& b, const char* where);
}

} // namespace semiflow
