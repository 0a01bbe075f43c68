#include "semiflow/measure_space.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace semiflow {

SpaceGrid::SpaceGrid(double x_min, double x_max, std::size_t n_nodes)
    : x_min_(x_min), x_max_(x_max), n_(n_nodes) {
    if (n_nodes < 2) throw std::invalid_argument("SpaceGrid: n_nodes must be >= 2");
    if (!(x_min < x_max)) throw std::invalid_argument("SpaceGrid: require x_min < x_max");
    dx_ = (x_max - x_min) / static_cast<double>(n_nodes - 1);
    if (!(dx_ > 0.0) || !std::isfinite(dx_))
        throw std::invalid_argument("SpaceGrid: degenerate spacing");
}

std::vector<double> SpaceGrid::nodes() const {
    std::vector<double> xs(n_);
    for (std::size_t i = 0; i < n_; ++i) xs[i] = node(i);
    return xs;
}

std::size_t SpaceGrid::nearest(double x) const {
    double r = (x - x_min_) / dx_;
    long k = std::lround(r);
    if (k < 0) k = 0;
    if (k >= static_cast<long>(n_)) k = static_cast<long>(n_) - 1;
    return static_cast<std::size_t>(k);
}

DiscreteFunction::DiscreteFunction(SpaceGrid g, std::vector<double> v)
    : grid(g), values(std::move(v)) {
    if (values.size() != grid.size())
        throw std::invalid_argument("DiscreteFunction: length does not match grid");
}

DiscreteFunction DiscreteFunction::constant(const SpaceGrid& g, double c) {
    return DiscreteFunction(g, std::vector<double>(g.size(), c));
}

DiscreteMeasure::DiscreteMeasure(SpaceGrid g, std::vector<double> m)
    : grid(g), masses(std::move(m)) {
    if (masses.size() != grid.size())
        throw std::invalid_argument("DiscreteMeasure: length does not match grid");
    for (double v : masses)
        if (!std::isfinite(v)) throw std::invalid_argument("DiscreteMeasure: non-finite mass");
}

DiscreteMeasure DiscreteMeasure::zero(const SpaceGrid& g) {
    return DiscreteMeasure(g, std::vector<double>(g.size(), 0.0));
}

DiscreteMeasure DiscreteMeasure::dirac(const SpaceGrid& g, std::size_t node, double mass) {
    if (node >= g.size()) throw std::invalid_argument("DiscreteMeasure::dirac: node out of range");
    std::vector<double> m(g.size(), 0.0);
    m[node] = mass;
    return DiscreteMeasure(g, std::move(m));
}

DiscreteMeasure DiscreteMeasure::lebesgue_on(const SpaceGrid& g, double a, double b) {
    if (!(a < b)) throw std::invalid_argument("lebesgue_on: empty interval");
    std::vector<double> m(g.size(), 0.0);
    std::size_t lo = g.size(), hi = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        double x = g.node(i);
        if (x >= a - 1e-12 && x <= b + 1e-12) {
            lo = std::min(lo, i);
            hi = std::max(hi, i);
        }
    }
    if (lo > hi) throw std::invalid_argument("lebesgue_on: no grid nodes inside interval");
    for (std::size_t i = lo; i <= hi; ++i)
        m[i] = (i == lo || i == hi) ? 0.5 * g.dx() : g.dx();
    if (lo == hi) m[lo] = g.dx();
    return DiscreteMeasure(g, std::move(m));
}

WeightPair::WeightPair(DiscreteFunction V_, DiscreteFunction psi_)
    : V(std::move(V_)), psi(std::move(psi_)) {
    detail::require_same_grid(V.grid, psi.grid, "WeightPair");
    for (std::size_t i = 0; i < V.size(); ++i) {
        if (!(psi.values[i] > 0.0))
            throw std::invalid_argument("WeightPair: psi must be strictly positive");
        if (psi.values[i] > V.values[i] * (1.0 + 1e-12))
            throw std::invalid_argument("WeightPair: require psi <= V at every node");
    }
}

double pairing(const DiscreteMeasure& mu, const DiscreteFunction& f) {
    detail::require_same_grid(mu.grid, f.grid, "pairing");
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) s += mu.masses[i] * f.values[i];
    return s;
}

double weighted_tv_norm(const DiscreteMeasure& mu, const DiscreteFunction& V) {
    detail::require_same_grid(mu.grid, V.grid, "weighted_tv_norm");
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) s += std::abs(mu.masses[i]) * V.values[i];
    return s;
}

double weighted_sup_norm(const DiscreteFunction& f, const DiscreteFunction& V) {
    detail::require_same_grid(f.grid, V.grid, "weighted_sup_norm");
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s = std::max(s, std::abs(f.values[i]) / V.values[i]);
    return s;
}

namespace detail {
void require_same_grid(const SpaceGrid& a, const SpaceGrid& b, const char* where) {
    if (!(a == b))
        throw std::invalid_argument(std::string(where) + ": grid mismatch");
}
} // namespace detail

} // namespace semiflow
