#include "semiflow/propagator.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace semiflow {

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

std::vector<double> DenseMatrix::apply(std::span<const double> x) const {
    if (x.size() != n) throw std::invalid_argument("DenseMatrix::apply: size mismatch");
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* r = row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += r[j] * x[j];
        y[i] = s;
    }
    return y;
}

std::vector<double> DenseMatrix::apply_transpose(std::span<const double> x) const {
    if (x.size() != n) throw std::invalid_argument("DenseMatrix::apply_transpose: size mismatch");
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* r = row(i);
        const double xi = x[i];
        if (xi == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) y[j] += xi * r[j];
    }
    return y;
}

DenseMatrix DenseMatrix::multiply(const DenseMatrix& rhs) const {
    if (rhs.n != n) throw std::invalid_argument("DenseMatrix::multiply: size mismatch");
    DenseMatrix c(n);
    for (std::size_t i = 0; i < n; ++i) {
        double* ci = c.row(i);
        const double* ai = row(i);
        for (std::size_t k = 0; k < n; ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            const double* bk = rhs.row(k);
            for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

double DenseMatrix::max_abs() const {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

void GeneratorMatrix::apply(std::span<const double> f, std::span<double> out) const {
    for (std::size_t i = 0; i < n; ++i) {
        double s = diag[i] * f[i];
        for (std::size_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) s += val[e] * f[col[e]];
        out[i] = s;
    }
}

std::vector<double> DualGenerator::apply(double t, std::span<const double> f) const {
    GeneratorMatrix L;
    generator_matrix(t, L);
    std::vector<double> out(f.size());
    L.apply(f, out);
    return out;
}

StepScheme::StepScheme(double dt_max_, StepMethod m, double safety)
    : dt_max(dt_max_), method(m), cfl_safety(safety) {
    if (!(dt_max > 0.0)) throw std::invalid_argument("StepScheme: dt_max must be > 0");
    if (!(cfl_safety > 0.0 && cfl_safety <= 1.0))
        throw std::invalid_argument("StepScheme: cfl_safety must lie in (0, 1]");
}

Propagator::Propagator(SpaceGrid g, double s_, double t_, DenseMatrix m, std::size_t clamps)
    : grid(g), s(s_), t(t_), matrix(std::move(m)), clamp_count(clamps) {
    if (!(t >= s)) throw std::invalid_argument("Propagator: require t >= s");
    if (matrix.n != grid.size()) throw std::invalid_argument("Propagator: matrix/grid size mismatch");
}

Propagator Propagator::identity(const SpaceGrid& g, double s) {
    return Propagator(g, s, s, DenseMatrix::identity(g.size()));
}

DiscreteFunction apply_dual(const Propagator& P, const DiscreteFunction& f) {
    detail::require_same_grid(P.grid, f.grid, "apply_dual");
    return DiscreteFunction(P.grid, P.matrix.apply(f.values));
}

DiscreteMeasure push_forward(const DiscreteMeasure& mu, const Propagator& P) {
    detail::require_same_grid(P.grid, mu.grid, "push_forward");
    return DiscreteMeasure(P.grid, P.matrix.apply_transpose(mu.masses));
}

Propagator compose(const Propagator& P1, const Propagator& P2) {
    detail::require_same_grid(P1.grid, P2.grid, "compose");
    if (std::abs(P1.t - P2.s) > 1e-12 * (1.0 + std::abs(P1.t)))
        throw std::invalid_argument("compose: P1.t != P2.s");
    return Propagator(P1.grid, P1.s, P2.t, P1.matrix.multiply(P2.matrix),
                      P1.clamp_count + P2.clamp_count);
}

namespace {

// out = (I + dt L) X, factored so every contribution is nonnegative when the
// step matrix is (1 + dt*diag >= 0 under CFL, off-diagonals >= 0).
void apply_step_matrix(const GeneratorMatrix& L, double dt, const DenseMatrix& X, DenseMatrix& out) {
    const std::size_t n = L.n;
    for (std::size_t i = 0; i < n; ++i) {
        const double di = 1.0 + dt * L.diag[i];
        const double* xi = X.row(i);
        double* oi = out.row(i);
        for (std::size_t j = 0; j < n; ++j) oi[j] = di * xi[j];
        for (std::size_t e = L.row_ptr[i]; e < L.row_ptr[i + 1]; ++e) {
            const double w = dt * L.val[e];
            const double* xk = X.row(L.col[e]);
            for (std::size_t j = 0; j < n; ++j) oi[j] += w * xk[j];
        }
    }
}

void apply_step_vector(const GeneratorMatrix& L, double dt, const std::vector<double>& x,
                       std::vector<double>& out) {
    const std::size_t n = L.n;
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = (1.0 + dt * L.diag[i]) * x[i];
        for (std::size_t e = L.row_ptr[i]; e < L.row_ptr[i + 1]; ++e)
            s += dt * L.val[e] * x[L.col[e]];
        out[i] = s;
    }
}

std::size_t derive_steps(const DualGenerator& model, double horizon, const StepScheme& scheme) {
    const double bound = std::min(scheme.dt_max, scheme.cfl_safety * model.max_step());
    if (!(bound > 0.0)) throw std::runtime_error("assemble: model CFL bound is not positive");
    double raw = horizon / bound;
    auto steps = static_cast<std::size_t>(std::ceil(raw - 1e-12));
    return std::max<std::size_t>(steps, 1);
}

} // namespace

std::size_t step_count(const DualGenerator& model, double horizon, const StepScheme& scheme) {
    if (horizon <= 0.0) return 0;
    return derive_steps(model, horizon, scheme);
}

Propagator assemble(const DualGenerator& model, double s, double t, const StepScheme& scheme) {
    if (t < s) throw std::invalid_argument("assemble: require t >= s");
    const SpaceGrid& g = model.grid();
    const std::size_t n = g.size();
    if (t == s) return Propagator::identity(g, s);

    const std::size_t steps = derive_steps(model, t - s, scheme);
    const double dt = (t - s) / static_cast<double>(steps);

    DenseMatrix M = DenseMatrix::identity(n);
    DenseMatrix buf1(n), buf2(n);
    GeneratorMatrix L1, L2;

    for (std::size_t k = 0; k < steps; ++k) {
        const double tau = t - static_cast<double>(k) * dt;
        model.generator_matrix(tau, L1);
        if (scheme.method == StepMethod::euler) {
            apply_step_matrix(L1, dt, M, buf1);
            std::swap(M, buf1);
        } else {
            // Heun as 1/2 M + 1/2 (I + dt L_{tau-dt})(I + dt L_tau) M:
            // algebraically identical to the two-stage average, and every
            // factor is a nonnegative matrix under CFL.
            model.generator_matrix(tau - dt, L2);
            apply_step_matrix(L1, dt, M, buf1);
            apply_step_matrix(L2, dt, buf1, buf2);
            double* m = M.a.data();
            const double* b = buf2.a.data();
            for (std::size_t q = 0; q < M.a.size(); ++q) m[q] = 0.5 * m[q] + 0.5 * b[q];
        }
    }

    std::size_t clamps = 0;
    double worst = 0.0;
    for (double& v : M.a) {
        if (!std::isfinite(v))
            throw std::runtime_error("assemble: non-finite entries produced (CFL violation?)");
        if (v < 0.0) {
            worst = std::min(worst, v);
            if (v >= -1e-12) {
                v = 0.0;
                ++clamps;
            }
        }
    }
    if (worst < -1e-12) {
        std::ostringstream msg;
        msg << "assemble: negative entry " << worst << " below clamp threshold; "
            << "dt=" << dt << " over [" << s << ", " << t << "] looks CFL-unstable";
        throw std::runtime_error(msg.str());
    }
    return Propagator(g, s, t, std::move(M), clamps);
}

std::vector<double> step_dual(const DualGenerator& model, std::span<const double> f, double t,
                              double dt, const StepScheme& scheme) {
    if (f.size() != model.grid().size()) throw std::invalid_argument("step_dual: grid mismatch");
    if (dt < 0.0) throw std::invalid_argument("step_dual: dt must be >= 0");
    std::vector<double> x(f.begin(), f.end());
    if (dt == 0.0) return x;
    const double bound = std::min(scheme.dt_max, scheme.cfl_safety * model.max_step());
    if (dt > bound * (1.0 + 1e-12))
        throw std::invalid_argument("step_dual: dt exceeds the CFL bound for this model");
    GeneratorMatrix L1, L2;
    model.generator_matrix(t, L1);
    std::vector<double> y, z;
    if (scheme.method == StepMethod::euler) {
        apply_step_vector(L1, dt, x, y);
        return y;
    }
    model.generator_matrix(t - dt, L2);
    apply_step_vector(L1, dt, x, y);
    apply_step_vector(L2, dt, y, z);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.5 * x[i] + 0.5 * z[i];
    return x;
}

void dump_csv(const Propagator& P, const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw std::runtime_error("dump_csv: cannot open " + path);
    std::fprintf(fp, "n,s,t\n%zu,%.15g,%.15g\n", P.grid.size(), P.s, P.t);
    for (std::size_t i = 0; i < P.matrix.n; ++i) {
        const double* r = P.matrix.row(i);
        for (std::size_t j = 0; j < P.matrix.n; ++j)
            std::fprintf(fp, j + 1 == P.matrix.n ? "%.15g\n" : "%.15g,", r[j]);
    }
    std::fclose(fp);
}

Propagator load_csv(const SpaceGrid& g, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open " + path);
    std::string line;
    std::getline(in, line); // header
    std::getline(in, line);
    std::size_t n = 0;
    double s = 0, t = 0;
    {
        std::istringstream hs(line);
        std::string tok;
        std::getline(hs, tok, ',');
        n = std::stoul(tok);
        std::getline(hs, tok, ',');
        s = std::stod(tok);
        std::getline(hs, tok, ',');
        t = std::stod(tok);
    }
    if (n != g.size()) throw std::runtime_error("load_csv: grid size mismatch");
    DenseMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw std::runtime_error("load_csv: truncated file");
        std::istringstream ls(line);
        std::string tok;
        for (std::size_t j = 0; j < n; ++j) {
            if (!std::getline(ls, tok, ',')) throw std::runtime_error("load_csv: short row");
            m(i, j) = std::stod(tok);
        }
    }
    return Propagator(g, s, t, std::move(m));
}

CachingAssembler::CachingAssembler(const DualGenerator& model, StepScheme scheme)
    : model_(model), scheme_(scheme) {}

const Propagator& CachingAssembler::get(double a, double b) {
    auto key = std::make_pair(a, b);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    auto [ins, ok] = cache_.emplace(key, assemble(model_, a, b, scheme_));
    return ins->second;
}

} // namespace semiflow
