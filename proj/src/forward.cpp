#include "modescatter/forward.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "modescatter/errors.hpp"

namespace modescatter {

namespace {
constexpr cd I(0.0, 1.0);
}  // namespace

cd discrete_lambda(double z, double h, double k) {
    const double s = 0.5 * h * std::sqrt(std::abs(z));
    if (z > 0.0) {
        if (s >= 1.0) throw ThresholdError("x2 spacing does not resolve a propagating mode");
        const double th = 2.0 * std::asin(s) / h;
        return k < 0.0 ? -th : th;
    }
    return I * (2.0 * std::asinh(s) / h);
}

int Exterior::column_of(int label) const {
    const auto it = std::find(labels.begin(), labels.end(), label);
    return it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
}

cd Exterior::rho(int q, Branch side) const {
    const cd r = std::exp(I * lambda[static_cast<std::size_t>(q)] * h2);
    return side == Branch::outgoing ? r : std::conj(r);
}

Exterior make_exterior(const Scenario& s, double k) {
    const Grid& g = s.grid;
    Exterior ext;
    ext.k = k;
    ext.h2 = g.h2;
    const int n = g.n1;
    const double guard = kGuardRelative;
    if (is_grating(s.geometry)) {
        ext.synthesis.resize(n, n);
        ext.analysis.resize(n, n);
        for (int q = 0; q < n; ++q) {
            const int m = q - n / 2;
            const double p = m + s.alpha;
            if (near_threshold(k, std::abs(p))) {
                std::ostringstream os;
                os << "k=" << k << " hits the threshold of mode m=" << m;
                throw ThresholdError(os.str());
            }
            const double z = k * k - grating_kappa2(m, s.alpha, g.h1);
            if ((z > 0.0) != (k * k > p * p) || std::abs(z) < guard * std::max(1.0, k * k)) {
                std::ostringstream os;
                os << "mode m=" << m << " is at its discrete threshold for k=" << k << "; refine x1";
                throw ThresholdError(os.str());
            }
            ext.labels.push_back(m);
            ext.z.push_back(z);
            ext.lambda.push_back(discrete_lambda(z, g.h2, k));
            for (int i = 0; i < n; ++i) {
                const cd e = std::exp(I * p * g.x1(i));
                ext.synthesis(i, q) = e;
                ext.analysis(q, i) = std::conj(e) / static_cast<double>(n);
            }
        }
    } else {
        const ModalBasis basis = sl_eigensystem(s.c0, s.B, k, n, n);
        ext.synthesis.resize(n, n);
        ext.analysis.resize(n, n);
        for (int q = 0; q < n; ++q) {
            const auto& mode = basis.modes[static_cast<std::size_t>(q)];
            if (std::abs(mode.mu) < guard * std::max(1.0, k * k)) {
                std::ostringstream os;
                os << "k=" << k << " hits the threshold of waveguide mode " << mode.m;
                throw ThresholdError(os.str());
            }
            ext.labels.push_back(mode.m);
            ext.z.push_back(mode.mu);
            ext.lambda.push_back(discrete_lambda(mode.mu, g.h2, k));
            for (int i = 0; i < n; ++i) {
                ext.synthesis(i, q) = mode.phi[static_cast<std::size_t>(i)];
                ext.analysis(q, i) = mode.phi[static_cast<std::size_t>(i)] * basis.weights[static_cast<std::size_t>(i)];
            }
        }
    }
    return ext;
}

// ---------------------------------------------------------------------------
// stencil coefficients

namespace {

double face_beta(const Scenario& s, int p, int q) {
    if (s.polarization != Polarization::TM) return 1.0;
    return 2.0 / (s.medium[static_cast<std::size_t>(p)] + s.medium[static_cast<std::size_t>(q)]);
}

}  // namespace

// Rows j +/- 1 outside the grid take the background face coefficient.
StencilCoeffs stencil_coefficients(const Scenario& s, double k, int i, int j) {
    const Grid& g = s.grid;
    const int n = g.n1;
    const int p = g.index(i, j);
    const double ih1 = 1.0 / (g.h1 * g.h1), ih2 = 1.0 / (g.h2 * g.h2);
    StencilCoeffs c;
    c.diag = -k * k * s.weight(p);
    if (is_grating(s.geometry)) {
        const cd phase = std::exp(I * (2.0 * M_PI * s.alpha));
        const int e = (i + 1) % n, w = (i + n - 1) % n;
        const double be = face_beta(s, p, g.index(e, j)), bw = face_beta(s, p, g.index(w, j));
        c.nb[0] = e;
        c.c_nb[0] = -be * ih1 * (i + 1 == n ? phase : cd(1.0));
        c.nb[1] = w;
        c.c_nb[1] = -bw * ih1 * (i == 0 ? std::conj(phase) : cd(1.0));
        c.diag += (be + bw) * ih1;
    } else {
        c.scale = g.lateral_weight(i) / g.h1;
        c.diag += 2.0 * ih1;
        if (i == n - 1) {
            c.nb[0] = n - 2;
            c.c_nb[0] = -2.0 * ih1;
        } else {
            c.nb[0] = i + 1;
            c.c_nb[0] = -ih1;
            if (i > 0) {
                c.nb[1] = i - 1;
                c.c_nb[1] = -ih1;
            }
        }
    }
    const double bn = j + 1 < g.n2 ? face_beta(s, p, g.index(i, j + 1)) : 1.0;
    const double bs = j > 0 ? face_beta(s, p, g.index(i, j - 1)) : 1.0;
    c.north = -bn * ih2;
    c.south = -bs * ih2;
    c.diag += (bn + bs) * ih2;
    return c;
}

cd apply_stencil(const Scenario& s, double k, const Field& u, int i, int j) {
    const StencilCoeffs c = stencil_coefficients(s, k, i, j);
    cd r = c.diag * u(i, j) + c.north * u(i, j + 1) + c.south * u(i, j - 1);
    for (int t = 0; t < 2; ++t)
        if (c.nb[t] >= 0) r += c.c_nb[t] * u(c.nb[t], j);
    return r;
}

// ---------------------------------------------------------------------------

struct LinearSystem::Factor {
    Eigen::SparseLU<Eigen::SparseMatrix<cd>, Eigen::COLAMDOrdering<int>> lu;
};

LinearSystem::~LinearSystem() = default;
LinearSystem::LinearSystem(LinearSystem&&) noexcept = default;
LinearSystem& LinearSystem::operator=(LinearSystem&&) noexcept = default;

bool LinearSystem::factorized() const { return lu_ != nullptr; }

LinearSystem::LinearSystem(const Scenario& s, double k, DomainRows rows, Exterior ext, SolveOptions opts)
    : s_(&s), k_(k), rows_(rows), ext_(std::move(ext)) {
    const Grid& g = s.grid;
    const int n = g.n1;
    if (rows.lo < 0 || rows.hi >= g.n2 || rows.hi - rows.lo < 2) throw std::invalid_argument("LinearSystem: bad row range");
    if (rows.below == Closure::dirichlet && rows.lo == 0) throw std::invalid_argument("LinearSystem: no Dirichlet row below");
    if (rows.above == Closure::dirichlet && rows.hi == g.n2 - 1)
        throw std::invalid_argument("LinearSystem: no Dirichlet row above");

    auto ghost = [&](Closure c) {
        // u_ghost = P diag(rho) Q u_row
        const Branch side = c == Closure::outgoing ? Branch::outgoing : Branch::incoming;
        Eigen::VectorXcd r(n);
        for (int q = 0; q < n; ++q) r[q] = ext_.rho(q, side);
        return Eigen::MatrixXcd(ext_.synthesis * r.asDiagonal() * ext_.analysis);
    };
    Eigen::MatrixXcd G_top, G_bot;
    if (rows.above != Closure::dirichlet) G_top = ghost(rows.above);
    if (rows.below != Closure::dirichlet) G_bot = ghost(rows.below);

    const int N = (rows.hi - rows.lo + 1) * n;
    std::vector<Eigen::Triplet<cd>> trip;
    trip.reserve(static_cast<std::size_t>(N) * 5 + static_cast<std::size_t>(2 * n * n));
    for (int j = rows.lo; j <= rows.hi; ++j) {
        for (int i = 0; i < n; ++i) {
            const int row = unknown(i, j);
            if (s.is_conductor(g.index(i, j))) {
                trip.emplace_back(row, row, 1.0);
                continue;
            }
            const StencilCoeffs c = stencil_coefficients(s, k, i, j);
            trip.emplace_back(row, row, c.scale * c.diag);
            for (int t = 0; t < 2; ++t)
                if (c.nb[t] >= 0) trip.emplace_back(row, unknown(c.nb[t], j), c.scale * c.c_nb[t]);
            if (j < rows.hi) {
                trip.emplace_back(row, unknown(i, j + 1), c.scale * c.north);
            } else if (rows.above != Closure::dirichlet) {
                for (int l = 0; l < n; ++l)
                    trip.emplace_back(row, unknown(l, j), c.scale * c.north * G_top(i, l));
            }
            if (j > rows.lo) {
                trip.emplace_back(row, unknown(i, j - 1), c.scale * c.south);
            } else if (rows.below != Closure::dirichlet) {
                for (int l = 0; l < n; ++l)
                    trip.emplace_back(row, unknown(l, j), c.scale * c.south * G_bot(i, l));
            }
        }
    }
    A_.resize(N, N);
    A_.setFromTriplets(trip.begin(), trip.end());
    A_.makeCompressed();

    lu_ = std::make_unique<Factor>();
    lu_->lu.analyzePattern(A_);
    lu_->lu.factorize(A_);
    if (lu_->lu.info() != Eigen::Success)
        throw SingularSystemError("sparse factorization failed (k=" + std::to_string(k) + ")",
                                  std::numeric_limits<double>::infinity());

    if (opts.estimate_condition) {
        // power iteration on (A^H A)^{-1}: ||A^{-1}||_2^2
        std::mt19937 rng(12345u);
        std::normal_distribution<double> nd;
        Eigen::VectorXcd x(N);
        for (int p = 0; p < N; ++p) x[p] = cd(nd(rng), nd(rng));
        x.normalize();
        double sigma2 = 0.0;
        for (int it = 0; it < std::max(1, opts.power_iterations); ++it) {
            Eigen::VectorXcd y = lu_->lu.adjoint().solve(x);
            y = lu_->lu.solve(y);
            sigma2 = y.norm();
            if (!std::isfinite(sigma2) || sigma2 == 0.0) {
                sigma2 = std::numeric_limits<double>::infinity();
                break;
            }
            x = y / sigma2;
        }
        condition_ = std::sqrt(sigma2) * std::max(1.0, k * k * s.max_weight());
        if (condition_ > opts.abort_condition) {
            std::ostringstream os;
            os << "condition estimate " << condition_ << " exceeds " << opts.abort_condition << " at k=" << k
               << " (k^2=" << k * k << "); near the exceptional set";
            throw SingularSystemError(os.str(), condition_);
        }
    }
}

Field LinearSystem::solve(const Field& rhs, const Field& known) const {
    const Scenario& s = *s_;
    const Grid& g = s.grid;
    const int n = g.n1;
    const int N = static_cast<int>(A_.rows());
    Eigen::VectorXcd b(N);
    for (int j = rows_.lo; j <= rows_.hi; ++j) {
        for (int i = 0; i < n; ++i) {
            const int row = unknown(i, j);
            if (s.is_conductor(g.index(i, j))) {
                b[row] = known(i, j);
                continue;
            }
            const StencilCoeffs c = stencil_coefficients(s, k_, i, j);
            cd v = rhs(i, j);
            if (j == rows_.hi && rows_.above == Closure::dirichlet) v -= c.north * known(i, j + 1);
            if (j == rows_.lo && rows_.below == Closure::dirichlet) v -= c.south * known(i, j - 1);
            b[row] = c.scale * v;
        }
    }
    const Eigen::VectorXcd x = lu_->lu.solve(b);
    Field out(g);
    for (int j = rows_.lo; j <= rows_.hi; ++j)
        for (int i = 0; i < n; ++i) out(i, j) = x[unknown(i, j)];
    if (rows_.below == Closure::dirichlet) out.set_row(rows_.lo - 1, known.row(rows_.lo - 1));
    if (rows_.above == Closure::dirichlet) out.set_row(rows_.hi + 1, known.row(rows_.hi + 1));
    return out;
}

cd LinearSystem::smallest_eigenvalue(int iterations) const {
    const int N = static_cast<int>(A_.rows());
    std::mt19937 rng(777u);
    std::normal_distribution<double> nd;
    Eigen::VectorXcd x(N);
    for (int p = 0; p < N; ++p) x[p] = cd(nd(rng), nd(rng));
    x.normalize();
    for (int it = 0; it < iterations; ++it) {
        Eigen::VectorXcd y = lu_->lu.solve(x);
        const double nrm = y.norm();
        if (!std::isfinite(nrm) || nrm == 0.0) return 0.0;
        x = y / nrm;
    }
    return x.dot(A_ * x);  // x^H A x
}

namespace {

DomainRows strip_rows(const Scenario& s, Closure open) {
    DomainRows r;
    r.hi = s.grid.n2 - 1;
    r.above = open;
    if (s.geometry == Geometry::grating_case2) {
        r.lo = 1;
        r.below = Closure::dirichlet;
    } else {
        r.lo = 0;
        r.below = open;
    }
    return r;
}

}  // namespace

LinearSystem assemble_operator(const Scenario& s, double k, Branch side, SolveOptions opts) {
    const Closure c = side == Branch::outgoing ? Closure::outgoing : Closure::incoming;
    return LinearSystem(s, k, strip_rows(s, c), make_exterior(s, k), opts);
}

// ---------------------------------------------------------------------------

std::vector<cd> FieldSolution::scattered_trace(double x2) const {
    const int j = total.grid.row_of(x2);
    std::vector<cd> r = total.row(j);
    const std::vector<cd> inc = incident.row(j);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= inc[i];
    return r;
}

std::vector<cd> FieldSolution::normal_derivative(double x2) const {
    const int j = total.grid.row_of(x2);
    if (j < 2) throw std::invalid_argument("normal_derivative: need two rows below");
    const double h = total.grid.h2;
    std::vector<cd> d(static_cast<std::size_t>(total.grid.n1));
    for (int i = 0; i < total.grid.n1; ++i)
        d[static_cast<std::size_t>(i)] = (3.0 * total(i, j) - 4.0 * total(i, j - 1) + total(i, j - 2)) / (2.0 * h);
    return d;
}

Field incident_wave(const Scenario& s, const Exterior& ext, int n) {
    const int q = ext.column_of(n);
    if (q < 0) throw std::invalid_argument("incident_wave: mode " + std::to_string(n) + " not in the exterior basis");
    Field u(s.grid);
    const cd lam = ext.lambda[static_cast<std::size_t>(q)];
    for (int j = 0; j < s.grid.n2; ++j) {
        const cd e = std::exp(-I * lam * s.grid.x2(j));
        for (int i = 0; i < s.grid.n1; ++i) u(i, j) = ext.synthesis(i, q) * e;
    }
    return u;
}

namespace {

FieldSolution distorted_from_system(const Scenario& s, const LinearSystem& sys, int n, bool generalized) {
    const Exterior& ext = sys.exterior();
    const int q = ext.column_of(n);
    if (q < 0) throw ModeCutoffError("incident mode " + std::to_string(n) + " is not resolved by the grid");
    if (!generalized && !ext.propagating(q))
        throw std::invalid_argument("incident mode " + std::to_string(n) +
                                    " is evanescent; use the generalized distorted wave");
    const Grid& g = s.grid;
    const double k = sys.k();
    Field inc = incident_wave(s, ext, n);
    Field rhs(g), known(g);
    const DomainRows& r = sys.rows();
    for (int j = r.lo; j <= r.hi; ++j) {
        if (j == 0 || j == g.n2 - 1) continue;  // exterior rows: the incident wave is exact there
        for (int i = 0; i < g.n1; ++i) rhs(i, j) = -apply_stencil(s, k, inc, i, j);
    }
    for (int p = 0; p < g.size(); ++p)
        if (s.is_conductor(p)) known.values[static_cast<std::size_t>(p)] = -inc.values[static_cast<std::size_t>(p)];
    // wall row: total field vanishes
    if (r.below == Closure::dirichlet)
        for (int i = 0; i < g.n1; ++i) known(i, r.lo - 1) = -inc(i, r.lo - 1);
    Field v = sys.solve(rhs, known);

    FieldSolution sol;
    sol.incident = inc;
    sol.total = inc + v;
    sol.k = k;
    sol.n = n;
    sol.geometry = s.geometry;
    sol.alpha = s.alpha;
    sol.T = s.T;
    sol.condition = sys.condition();
    return sol;
}

}  // namespace

FieldSolution solve_distorted_wave(const Scenario& s, int n, double k, bool generalized, SolveOptions opts) {
    return solve_distorted_waves(s, {n}, k, generalized, opts).front();
}

std::vector<FieldSolution> solve_distorted_waves(const Scenario& s, const std::vector<int>& ns, double k,
                                                 bool generalized, SolveOptions opts) {
    const LinearSystem sys = assemble_operator(s, k, Branch::outgoing, opts);
    std::vector<FieldSolution> out;
    out.reserve(ns.size());
    for (int n : ns) out.push_back(distorted_from_system(s, sys, n, generalized));
    return out;
}

FieldSolution incoming_line_source_solve(const Scenario& s, const LineSource& f, double k, SolveOptions opts) {
    const Grid& g = s.grid;
    if (static_cast<int>(f.f.size()) != g.n1) throw std::invalid_argument("line source size does not match x1 grid");
    const LinearSystem sys = assemble_operator(s, k, Branch::incoming, opts);
    Field rhs(g), known(g);
    const int jT = s.row_T();
    for (int i = 0; i < g.n1; ++i) rhs(i, jT) = s.weight(g.index(i, jT)) * f.f[static_cast<std::size_t>(i)] / g.h2;
    FieldSolution sol;
    sol.total = sys.solve(rhs, known);
    sol.incident = Field(g);
    sol.k = k;
    sol.n = 0;
    sol.geometry = s.geometry;
    sol.alpha = s.alpha;
    sol.T = s.T;
    sol.condition = sys.condition();
    return sol;
}

// ---------------------------------------------------------------------------

std::vector<BoundState> schrodinger_spectrum(const Potential& V, const Grid& grid, int count) {
    const int n = grid.n2;
    if (count < 1 || count > n) throw std::invalid_argument("schrodinger_spectrum: bad count");
    const double ih2 = 1.0 / (grid.h2 * grid.h2);
    Eigen::VectorXd diag(n), sub(n - 1);
    for (int j = 0; j < n; ++j) {
        diag[j] = 2.0 * ih2 + V(grid.x2(j));
        if (j + 1 < n) sub[j] = -ih2;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw ConvergenceError("1-D Schrodinger eigensolve failed");
    std::vector<BoundState> out;
    for (int c = 0; c < count; ++c) {
        BoundState b;
        b.energy = es.eigenvalues()[c];
        b.u.resize(static_cast<std::size_t>(n));
        double sign = 0.0;
        for (int j = 0; j < n; ++j) sign += es.eigenvectors()(j, c);
        sign = sign >= 0.0 ? 1.0 : -1.0;
        for (int j = 0; j < n; ++j) b.u[static_cast<std::size_t>(j)] = sign * es.eigenvectors()(j, c) / std::sqrt(grid.h2);
        out.push_back(std::move(b));
    }
    return out;
}

Scenario embedded_eigen_scenario(const Potential& V, double E, int m, double alpha, double T, double T_prime,
                                 GridSpec spec) {
    const double h1 = 2.0 * M_PI / spec.n1;
    const double K = grating_kappa2(m, alpha, h1) + E;

    // bound-state check on a padded line so the Dirichlet ends do not shift E
    Grid line;
    line.h2 = spec.h2;
    const double pad = 10.0;
    line.x2_min = -T_prime - pad;
    line.n2 = static_cast<int>(std::lround((2.0 * (T_prime + pad)) / spec.h2)) + 1;
    line.n1 = 1;
    const auto spec_1d = schrodinger_spectrum(V, line, std::min(8, line.n2));
    bool found = false;
    for (const auto& b : spec_1d)
        if (b.energy < 0.0 && std::abs(b.energy - E) <= 1e-6) found = true;
    if (!found) {
        std::ostringstream os;
        os << "no discrete bound state within 1e-6 of E=" << E;
        if (!spec_1d.empty()) os << " (lowest eigenvalue " << spec_1d.front().energy << ")";
        throw NoBoundStateError(os.str());
    }

    for (int j = 0; j < line.n2; ++j) {
        const double x2 = line.x2(j);
        if (!(K - V(x2) > 0.0)) {
            std::ostringstream os;
            os << "(m+alpha)^2+E-V = " << K - V(x2) << " <= 0 at x2=" << x2;
            throw PositivityError(os.str());
        }
    }

    Scenario s = make_grating(Geometry::grating_case1, Polarization::TE, alpha, T, T_prime, spec,
                              [&](double, double x2) { return (K - V(x2)) / K; });
    s.predicted_exceptional_k2 = K;
    s.label = "embedded_eigen";
    return s;
}

ExceptionalProbe locate_exceptional_k2(const Scenario& s, double k2_guess, double window, int max_iter) {
    SolveOptions quiet;
    quiet.estimate_condition = false;
    auto f = [&](double k2) {
        const LinearSystem sys(s, std::sqrt(k2), strip_rows(s, Closure::outgoing), make_exterior(s, std::sqrt(k2)),
                               quiet);
        return sys.smallest_eigenvalue();
    };
    const double lo = k2_guess - window, hi = k2_guess + window;
    double x0 = k2_guess - 0.1 * window, x1 = k2_guess;
    cd f0 = f(x0), f1 = f(x1);
    ExceptionalProbe probe;
    for (int it = 0; it < max_iter; ++it) {
        probe.iterations = it + 1;
        const cd df = f1 - f0;
        if (std::abs(df) == 0.0) break;
        double x2 = x1 - (f1 * (x1 - x0) / df).real();
        x2 = std::clamp(x2, lo, hi);
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f(x1);
        if (std::abs(x1 - x0) < 1e-12 * std::max(1.0, std::abs(x1))) break;
    }
    probe.k2 = x1;
    SolveOptions loud;
    loud.abort_condition = std::numeric_limits<double>::infinity();
    loud.power_iterations = 8;
    probe.condition =
        LinearSystem(s, std::sqrt(x1), strip_rows(s, Closure::outgoing), make_exterior(s, std::sqrt(x1)), loud)
            .condition();
    return probe;
}

}  // namespace modescatter
