#include "modescatter/dtn.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "modescatter/errors.hpp"

namespace modescatter {

namespace {

constexpr cd I(0.0, 1.0);

// symbol of the one-sided stencil on e^{i s lambda x2}: s = +1 up-going, -1 down-going
cd stencil_symbol(cd lambda, double h, double sgn) {
    const cd e = std::exp(-I * sgn * lambda * h);
    return (3.0 - 4.0 * e + e * e) / (2.0 * h);
}

}  // namespace

std::vector<cd> one_sided_derivative(const std::vector<cd>& uJ, const std::vector<cd>& uJ1, const std::vector<cd>& uJ2,
                                     double h2) {
    std::vector<cd> d(uJ.size());
    for (std::size_t i = 0; i < uJ.size(); ++i) d[i] = (3.0 * uJ[i] - 4.0 * uJ1[i] + uJ2[i]) / (2.0 * h2);
    return d;
}

TraceBasis trace_basis(const Scenario& s, double k, int M) {
    const Grid& g = s.grid;
    TraceBasis b;
    if (is_grating(s.geometry)) {
        if (2 * M + 1 > g.n1) throw ModeCutoffError("trace basis larger than the x1 resolution");
        b.synthesis.resize(g.n1, 2 * M + 1);
        b.analysis.resize(2 * M + 1, g.n1);
        for (int m = -M; m <= M; ++m) {
            b.labels.push_back(m);
            for (int i = 0; i < g.n1; ++i) {
                const cd e = std::exp(I * (m + s.alpha) * g.x1(i));
                b.synthesis(i, m + M) = e;
                b.analysis(m + M, i) = std::conj(e) / double(g.n1);
            }
        }
    } else {
        if (M < 1 || M > g.n1) throw ModeCutoffError("trace basis size outside [1, n1]");
        const ModalBasis mb = sl_eigensystem(s.c0, s.B, k, M, g.n1);
        b.synthesis.resize(g.n1, M);
        b.analysis.resize(M, g.n1);
        for (int q = 0; q < M; ++q) {
            b.labels.push_back(q + 1);
            for (int i = 0; i < g.n1; ++i) {
                b.synthesis(i, q) = mb.modes[static_cast<std::size_t>(q)].phi[static_cast<std::size_t>(i)];
                b.analysis(q, i) = mb.modes[static_cast<std::size_t>(q)].phi[static_cast<std::size_t>(i)] *
                                   mb.weights[static_cast<std::size_t>(i)];
            }
        }
    }
    return b;
}

DtNMatrix dtn_direct(const Scenario& s, double k, int M, SolveOptions opts) {
    const Grid& g = s.grid;
    const int J = s.row_T();
    DomainRows rows;
    rows.hi = J - 1;
    rows.above = Closure::dirichlet;
    Exterior ext;
    if (s.geometry == Geometry::grating_case2) {
        rows.lo = 1;
        rows.below = Closure::dirichlet;
        ext.k = k;
        ext.h2 = g.h2;
    } else {
        rows.lo = 0;
        rows.below = Closure::outgoing;
        ext = make_exterior(s, k);
    }
    if (J - rows.lo < 3) throw InvalidScenarioError("lower domain needs at least three rows below T");

    std::optional<LinearSystem> sys;
    try {
        sys.emplace(s, k, rows, std::move(ext), opts);
    } catch (const SingularSystemError& e) {
        std::ostringstream os;
        os << "lower-domain Dirichlet problem is near-singular at k=" << k << " (k^2=" << k * k
           << "); k^2 is close to the set S_T";
        throw STConditionError(os.str(), e.condition());
    }

    const TraceBasis tb = trace_basis(s, k, M);
    const int nb = static_cast<int>(tb.labels.size());
    DtNMatrix d;
    d.k = k;
    d.geometry = s.geometry;
    d.alpha = s.alpha;
    d.basis = tb.labels;
    d.entries.resize(nb, nb);
    d.condition = sys->condition();
    Field rhs(g), known(g);
    for (int q = 0; q < nb; ++q) {
        for (int i = 0; i < g.n1; ++i) known(i, J) = tb.synthesis(i, q);
        const Field u = sys->solve(rhs, known);
        const auto der = one_sided_derivative(u.row(J), u.row(J - 1), u.row(J - 2), g.h2);
        const Eigen::Map<const Eigen::VectorXcd> dv(der.data(), g.n1);
        d.entries.col(q) = tb.analysis * dv;
    }
    return d;
}

ExteriorModel make_exterior_model(const Scenario& s, double k) {
    ExteriorModel e;
    e.grid = s.grid;
    e.T = s.T;
    e.k = k;
    if (s.geometry == Geometry::waveguide) e.basis = sl_eigensystem(s.c0, s.B, k, s.grid.n1, s.grid.n1);
    return e;
}

namespace {

struct Span {
    std::vector<int> ns;
    Eigen::MatrixXcd traces;       // n1 x N, unit weighted norm columns
    Eigen::MatrixXcd derivatives;  // scaled alike
    Eigen::VectorXd sqrt_w;
};

double closest_k(const ScatteringDataset& ds, double k) {
    double best = std::numeric_limits<double>::quiet_NaN(), dist = std::numeric_limits<double>::infinity();
    for (double kk : ds.k_values())
        if (std::abs(kk - k) < dist) {
            dist = std::abs(kk - k);
            best = kk;
        }
    if (!(dist <= 1e-12 * std::max(1.0, std::abs(k))))
        throw IncompleteDataError("dataset has no amplitudes at k=" + std::to_string(k));
    return best;
}

Span build_span(const ScatteringDataset& ds, const ExteriorModel& ext, const FromModesOptions& opt) {
    const Grid& g = ext.grid;
    const double k = closest_k(ds, ext.k);
    const bool grating = is_grating(g.geometry);
    auto lateral = [&](int m, int i) -> cd {
        if (grating) return std::exp(I * (m + g.alpha) * g.x1(i));
        return ext.basis->modes[static_cast<std::size_t>(m - 1)].phi[static_cast<std::size_t>(i)];
    };
    Span sp;
    for (int n : ds.incident_indices(k)) {
        if (opt.n_span >= 0 && (grating ? std::abs(n) : n) > opt.n_span) continue;
        sp.ns.push_back(n);
    }
    if (sp.ns.empty()) throw IncompleteDataError("no incident indices in the requested span");
    const int N = static_cast<int>(sp.ns.size());
    sp.sqrt_w.resize(g.n1);
    for (int i = 0; i < g.n1; ++i) sp.sqrt_w[i] = std::sqrt(g.lateral_weight(i));
    sp.traces = Eigen::MatrixXcd::Zero(g.n1, N);
    sp.derivatives = Eigen::MatrixXcd::Zero(g.n1, N);
    const double h = g.h2, T = ext.T;
    auto dfac = [&](cd lam, double sgn) { return ext.stencil_derivative ? stencil_symbol(lam, h, sgn) : sgn * I * lam; };

    for (int c = 0; c < N; ++c) {
        const int n = sp.ns[static_cast<std::size_t>(c)];
        const auto inc = ds.reflected.find({n, n, k});
        if (inc == ds.reflected.end()) throw IncompleteDataError("missing a_n(n) entry for the incident exponent");
        const cd ln = inc->second.lambda;
        const cd ein = std::exp(-I * ln * T);
        for (int i = 0; i < g.n1; ++i) {
            sp.traces(i, c) += lateral(n, i) * ein;
            sp.derivatives(i, c) += lateral(n, i) * ein * dfac(ln, -1.0);
        }
        for (auto it = ds.reflected.lower_bound({n, std::numeric_limits<int>::min(), k});
             it != ds.reflected.end() && it->first.n == n && it->first.k == k; ++it) {
            const int m = it->first.m;
            if (opt.m_ext >= 0 && (grating ? std::abs(m) : m) > opt.m_ext) continue;
            const cd lm = it->second.lambda;
            const cd coef = it->second.value * std::exp(I * lm * T);
            const cd fac = dfac(lm, 1.0);
            for (int i = 0; i < g.n1; ++i) {
                sp.traces(i, c) += coef * lateral(m, i);
                sp.derivatives(i, c) += coef * fac * lateral(m, i);
            }
        }
        const double nrm = (sp.sqrt_w.asDiagonal() * sp.traces.col(c)).norm();
        if (nrm > 0.0) {
            sp.traces.col(c) /= nrm;
            sp.derivatives.col(c) /= nrm;
        }
    }
    return sp;
}

Eigen::MatrixXcd basis_matrix(const ExteriorModel& ext, int M, std::vector<int>& labels, Eigen::MatrixXcd& analysis) {
    const Grid& g = ext.grid;
    Eigen::MatrixXcd B;
    labels.clear();
    if (is_grating(g.geometry)) {
        B.resize(g.n1, 2 * M + 1);
        analysis.resize(2 * M + 1, g.n1);
        for (int m = -M; m <= M; ++m) {
            labels.push_back(m);
            for (int i = 0; i < g.n1; ++i) {
                const cd e = std::exp(I * (m + g.alpha) * g.x1(i));
                B(i, m + M) = e;
                analysis(m + M, i) = std::conj(e) / double(g.n1);
            }
        }
    } else {
        B.resize(g.n1, M);
        analysis.resize(M, g.n1);
        for (int q = 0; q < M; ++q) {
            labels.push_back(q + 1);
            for (int i = 0; i < g.n1; ++i) {
                const double phi = ext.basis->modes[static_cast<std::size_t>(q)].phi[static_cast<std::size_t>(i)];
                B(i, q) = phi;
                analysis(q, i) = phi * ext.basis->weights[static_cast<std::size_t>(i)];
            }
        }
    }
    return B;
}

// ridge least squares for every basis trace; returns coefficients and residuals
Eigen::MatrixXcd expand(const Span& sp, const Eigen::MatrixXcd& B, double reg, std::vector<double>& residual) {
    const int n1 = static_cast<int>(B.rows()), N = static_cast<int>(sp.traces.cols());
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(n1 + N, N);
    A.topRows(n1) = sp.sqrt_w.asDiagonal() * sp.traces;
    A.bottomRows(N) = std::sqrt(std::max(reg, 0.0)) * Eigen::MatrixXcd::Identity(N, N);
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::MatrixXcd rhs = Eigen::MatrixXcd::Zero(n1 + N, B.cols());
    rhs.topRows(n1) = sp.sqrt_w.asDiagonal() * B;
    const Eigen::MatrixXcd C = svd.solve(rhs);
    residual.resize(static_cast<std::size_t>(B.cols()));
    for (int p = 0; p < B.cols(); ++p) {
        const Eigen::VectorXcd target = sp.sqrt_w.asDiagonal() * B.col(p);
        const Eigen::VectorXcd fit = sp.sqrt_w.asDiagonal() * (sp.traces * C.col(p));
        residual[static_cast<std::size_t>(p)] = (fit - target).norm() / target.norm();
    }
    return C;
}

}  // namespace

std::vector<double> span_residuals(const ScatteringDataset& ds, const ExteriorModel& ext, int M, FromModesOptions opt) {
    const Span sp = build_span(ds, ext, opt);
    std::vector<int> labels;
    Eigen::MatrixXcd analysis;
    const Eigen::MatrixXcd B = basis_matrix(ext, M, labels, analysis);
    std::vector<double> res;
    expand(sp, B, opt.reg, res);
    return res;
}

DtNMatrix dtn_from_modes(const ScatteringDataset& ds, const ExteriorModel& ext, int M, FromModesOptions opt) {
    if (ds.geometry != ext.grid.geometry) throw BasisMismatchError("dataset and exterior model geometries differ");
    const Span sp = build_span(ds, ext, opt);
    DtNMatrix d;
    d.k = ext.k;
    d.geometry = ext.grid.geometry;
    d.alpha = ext.grid.alpha;
    Eigen::MatrixXcd analysis;
    const Eigen::MatrixXcd B = basis_matrix(ext, M, d.basis, analysis);
    const Eigen::MatrixXcd C = expand(sp, B, opt.reg, d.span_residual);
    if (opt.check_span) {
        for (std::size_t p = 0; p < d.span_residual.size(); ++p)
            if (d.span_residual[p] > opt.span_threshold) {
                std::ostringstream os;
                os << "basis trace " << d.basis[p] << " has expansion residual " << d.span_residual[p] << " > "
                   << opt.span_threshold << " with " << sp.ns.size() << " incident waves";
                throw IllConditionedSpanError(os.str());
            }
    }
    d.entries = analysis * (sp.derivatives * C);
    return d;
}

double dtn_symmetry_defect(const DtNMatrix& d) {
    const Eigen::MatrixXcd& L = d.entries;
    const double nrm = L.norm();
    if (nrm == 0.0) return 0.0;
    if (d.geometry == Geometry::waveguide) return (L - L.transpose()).norm() / nrm;
    if (std::abs(d.alpha) > 1e-14) throw std::invalid_argument("grating symmetry check needs alpha = 0");
    const int n = static_cast<int>(L.rows());
    // L_{m n} = L_{-n, -m} for a symmetric basis -M..M
    Eigen::MatrixXcd F(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) F(r, c) = L(n - 1 - c, n - 1 - r);
    return (L - F).norm() / nrm;
}

// ---------------------------------------------------------------------------
// frequency-to-time synthesis

namespace {

struct Fft {
    int n;
    fftw_complex* buf;
    fftw_plan fwd;  // e^{-i}
    fftw_plan bwd;  // e^{+i}
    explicit Fft(int n_) : n(n_) {
        buf = fftw_alloc_complex(static_cast<std::size_t>(n));
        fwd = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd = fftw_plan_dft_1d(n, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~Fft() {
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
        fftw_free(buf);
    }
    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;
    cd get(int j) const { return {buf[j][0], buf[j][1]}; }
    void set(int j, cd v) {
        buf[j][0] = v.real();
        buf[j][1] = v.imag();
    }
};

double omega_of(int j, int N, double dt) {
    const int jj = j <= N / 2 ? j : j - N;
    return 2.0 * M_PI * jj / (N * dt);
}

// cubic Lagrange interpolation of the family entries at omega
Eigen::MatrixXcd interpolate(const std::vector<const DtNMatrix*>& fam, double w) {
    const int n = static_cast<int>(fam.size());
    auto it = std::lower_bound(fam.begin(), fam.end(), w, [](const DtNMatrix* d, double x) { return d->k < x; });
    int hi = static_cast<int>(it - fam.begin());
    if (hi < n && std::abs(fam[static_cast<std::size_t>(hi)]->k - w) < 1e-10 * std::max(1.0, std::abs(w)))
        return fam[static_cast<std::size_t>(hi)]->entries;
    if (hi > 0 && std::abs(fam[static_cast<std::size_t>(hi - 1)]->k - w) < 1e-10 * std::max(1.0, std::abs(w)))
        return fam[static_cast<std::size_t>(hi - 1)]->entries;
    const int np = std::min(4, n);
    int lo = std::clamp(hi - 2, 0, n - np);
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(fam.front()->entries.rows(), fam.front()->entries.cols());
    for (int a = lo; a < lo + np; ++a) {
        double l = 1.0;
        for (int b = lo; b < lo + np; ++b)
            if (b != a) l *= (w - fam[static_cast<std::size_t>(b)]->k) / (fam[static_cast<std::size_t>(a)]->k - fam[static_cast<std::size_t>(b)]->k);
        out += l * fam[static_cast<std::size_t>(a)]->entries;
    }
    return out;
}

}  // namespace

std::vector<double> synthesis_frequencies(const TimeTraceSet& g, double lo, double hi, int pad_factor) {
    const int N = pad_factor * g.nt();
    std::vector<double> out;
    for (int j = 0; j < N; ++j) {
        const double w = omega_of(j, N, g.dt);
        if (w >= lo && w <= hi) out.push_back(w);
    }
    std::sort(out.begin(), out.end());
    return out;
}

SynthesisResult dtn_time_synthesis(const std::vector<DtNMatrix>& family, const TimeTraceSet& g, SynthesisOptions opt) {
    if (family.empty()) throw std::invalid_argument("dtn_time_synthesis: empty family");
    const DtNMatrix& ref = family.front();
    if (!is_grating(ref.geometry))
        throw std::invalid_argument("dtn_time_synthesis: the k-independent Fourier trace basis needs a grating");
    std::vector<const DtNMatrix*> fam;
    for (const auto& d : family) {
        if (d.basis != ref.basis || d.geometry != ref.geometry || std::abs(d.alpha - ref.alpha) > 1e-14)
            throw BasisMismatchError("family members use different trace bases");
        fam.push_back(&d);
    }
    std::sort(fam.begin(), fam.end(), [](const DtNMatrix* a, const DtNMatrix* b) { return a->k < b->k; });
    const double klo = fam.front()->k, khi = fam.back()->k;

    const int nt = g.nt(), n1 = static_cast<int>(g.x1.size());
    const int nb = static_cast<int>(ref.basis.size());
    const int N = std::max(2, opt.pad_factor) * nt;
    SynthesisResult res;
    res.output.dt = g.dt;
    res.output.x1 = g.x1;
    res.output.band_lo = klo;
    res.output.band_hi = khi;
    res.output.values = Eigen::MatrixXcd::Zero(nt, n1);

    // project the input on the trace basis
    Eigen::MatrixXcd an(nb, n1), syn(n1, nb);
    for (int p = 0; p < nb; ++p)
        for (int i = 0; i < n1; ++i) {
            const cd e = std::exp(I * (ref.basis[static_cast<std::size_t>(p)] + ref.alpha) * g.x1[static_cast<std::size_t>(i)]);
            syn(i, p) = e;
            an(p, i) = std::conj(e) / double(n1);
        }
    const Eigen::MatrixXcd G = g.values * an.transpose();  // nt x nb

    Eigen::MatrixXcd Gh = Eigen::MatrixXcd::Zero(N, nb);
    {
        Fft fft(N);
        for (int p = 0; p < nb; ++p) {
            for (int j = 0; j < N; ++j) fft.set(j, j < nt ? G(j, p) : cd(0.0));
            fftw_execute(fft.bwd);  // sum g e^{+i omega t}
            for (int j = 0; j < N; ++j) Gh(j, p) = fft.get(j) * g.dt;
        }
    }
    double e_all = 0.0, e_out = 0.0;
    for (int j = 0; j < N; ++j) {
        const double w = omega_of(j, N, g.dt);
        const double e = Gh.row(j).squaredNorm();
        e_all += e;
        if (w < klo || w > khi) e_out += e;
    }
    res.outside_energy = e_all > 0.0 ? e_out / e_all : 0.0;
    if (res.outside_energy > opt.max_outside_energy) {
        std::ostringstream os;
        os << "input spectrum has " << 100.0 * res.outside_energy << "% of its energy outside the family band [" << klo
           << ", " << khi << "]";
        throw BandCoverageError(os.str());
    }
    if (e_all == 0.0) return res;

    Eigen::MatrixXcd Dh = Eigen::MatrixXcd::Zero(N, nb);
    for (int j = 0; j < N; ++j) {
        const double w = omega_of(j, N, g.dt);
        if (w < klo || w > khi) continue;
        const Eigen::MatrixXcd L = interpolate(fam, w);
        Dh.row(j) = (L * Gh.row(j).transpose()).transpose();
    }
    Eigen::MatrixXcd D(nt, nb);
    {
        Fft fft(N);
        for (int p = 0; p < nb; ++p) {
            for (int j = 0; j < N; ++j) fft.set(j, Dh(j, p));
            fftw_execute(fft.fwd);
            for (int t = 0; t < nt; ++t) D(t, p) = fft.get(t) / (N * g.dt);
        }
    }
    res.output.values = D * syn.transpose();

    double peak = 0.0;
    for (int t = 0; t < nt; ++t) peak = std::max(peak, g.values.row(t).cwiseAbs().maxCoeff());
    int onset = 0;
    while (onset < nt && g.values.row(onset).cwiseAbs().maxCoeff() < opt.onset_level * peak) ++onset;
    res.onset_time = onset * g.dt;
    const double tot = res.output.values.squaredNorm();
    res.leakage = tot > 0.0 ? res.output.values.topRows(onset).squaredNorm() / tot : 0.0;
    return res;
}

// ---------------------------------------------------------------------------
// time-domain reference

TimeTraceSet timedomain_reference(const Scenario& s, const TimeTraceSet& g, TimeDomainOptions opt) {
    const Grid& sg = s.grid;
    const int n1 = sg.n1;
    if (static_cast<int>(g.x1.size()) != n1) throw std::invalid_argument("timedomain_reference: input x1 nodes differ");
    const double h2 = sg.h2;
    const bool wall = s.geometry == Geometry::grating_case2;

    // lower domain on its own grid: rows from the bottom (index 0) to x2 = T (top)
    Scenario d = s;
    const double bottom = wall ? -s.R : s.T - opt.depth;
    d.grid.x2_min = bottom;
    d.grid.n2 = static_cast<int>(std::lround((s.T - bottom) / h2)) + 1;
    d.medium.assign(static_cast<std::size_t>(d.grid.size()), 0.0);
    d.conductor.assign(static_cast<std::size_t>(d.grid.size()), 0);
    for (int j = 0; j < d.grid.n2; ++j) {
        const double x2 = d.grid.x2(j);
        const long js = std::lround((x2 - sg.x2_min) / h2);
        for (int i = 0; i < n1; ++i) {
            const int p = d.grid.index(i, j);
            if (js >= 0 && js < sg.n2) {
                d.medium[static_cast<std::size_t>(p)] = s.medium[static_cast<std::size_t>(sg.index(i, static_cast<int>(js)))];
                d.conductor[static_cast<std::size_t>(p)] = s.is_conductor(sg.index(i, static_cast<int>(js))) ? 1 : 0;
            } else {
                d.medium[static_cast<std::size_t>(p)] = s.background(i);
            }
        }
    }
    const int n2 = d.grid.n2, J = n2 - 1;
    const int N = d.grid.size();

    std::vector<StencilCoeffs> coef(static_cast<std::size_t>(N));
    std::vector<double> inv_a(static_cast<std::size_t>(N)), sigma(static_cast<std::size_t>(N), 0.0);
    double lam_max = 0.0;
    for (int j = 1; j < J; ++j)
        for (int i = 0; i < n1; ++i) {
            const int p = d.grid.index(i, j);
            coef[static_cast<std::size_t>(p)] = stencil_coefficients(d, 0.0, i, j);
            inv_a[static_cast<std::size_t>(p)] = 1.0 / d.weight(p);
            const auto& c = coef[static_cast<std::size_t>(p)];
            const double row = std::abs(c.diag) + std::abs(c.north) + std::abs(c.south) + std::abs(c.c_nb[0]) +
                               (c.nb[1] >= 0 ? std::abs(c.c_nb[1]) : 0.0);
            lam_max = std::max(lam_max, row * inv_a[static_cast<std::size_t>(p)]);
            if (!wall) {
                const double x2 = d.grid.x2(j);
                const double depth_in = bottom + opt.sponge - x2;
                if (depth_in > 0.0) {
                    const double r = depth_in / opt.sponge;
                    sigma[static_cast<std::size_t>(p)] = opt.sponge_strength * r * r;
                }
            }
        }
    const double dt = g.dt;
    if (dt * std::sqrt(lam_max) > 2.0) {
        std::ostringstream os;
        os << "time step " << dt << " exceeds the stability bound " << 2.0 / std::sqrt(lam_max);
        throw CFLViolationError(os.str());
    }

    const int nt = g.nt();
    TimeTraceSet out;
    out.dt = dt;
    out.x1 = g.x1;
    out.values = Eigen::MatrixXcd::Zero(nt, n1);
    out.energy.assign(static_cast<std::size_t>(nt), 0.0);
    std::vector<cd> prev(static_cast<std::size_t>(N), 0.0), cur(static_cast<std::size_t>(N), 0.0),
        next(static_cast<std::size_t>(N), 0.0);
    auto Dv = [&](const std::vector<cd>& v, int p, int i, int j) {
        const auto& c = coef[static_cast<std::size_t>(p)];
        cd r = c.diag * v[static_cast<std::size_t>(p)] + c.north * v[static_cast<std::size_t>(p + n1)] +
               c.south * v[static_cast<std::size_t>(p - n1)];
        for (int t = 0; t < 2; ++t)
            if (c.nb[t] >= 0) r += c.c_nb[t] * v[static_cast<std::size_t>(d.grid.index(c.nb[t], j))];
        (void)i;
        return r;
    };
    const double hw = h2;
    for (int n = 0; n < nt; ++n) {
        for (int i = 0; i < n1; ++i) cur[static_cast<std::size_t>(d.grid.index(i, J))] = g.values(n, i);
        // output at t_n
        for (int i = 0; i < n1; ++i) {
            const cd uJ = cur[static_cast<std::size_t>(d.grid.index(i, J))];
            const cd u1 = cur[static_cast<std::size_t>(d.grid.index(i, J - 1))];
            const cd u2 = cur[static_cast<std::size_t>(d.grid.index(i, J - 2))];
            out.values(n, i) = (3.0 * uJ - 4.0 * u1 + u2) / (2.0 * hw);
        }
        double energy = 0.0;
#pragma omp parallel for reduction(+ : energy) schedule(static)
        for (int j = 1; j < J; ++j)
            for (int i = 0; i < n1; ++i) {
                const int p = d.grid.index(i, j);
                const std::size_t sp = static_cast<std::size_t>(p);
                if (d.is_conductor(p)) {
                    next[sp] = 0.0;
                    continue;
                }
                const cd lap = Dv(cur, p, i, j);
                const double sd = 0.5 * sigma[sp] * dt;
                next[sp] = (2.0 * cur[sp] - (1.0 - sd) * prev[sp] - dt * dt * inv_a[sp] * lap) / (1.0 + sd);
                const cd vt = (cur[sp] - prev[sp]) / dt;
                energy += g.x1.size() > 0 ? (std::norm(vt) / inv_a[sp] + std::real(std::conj(cur[sp]) * lap)) : 0.0;
            }
        out.energy[static_cast<std::size_t>(n)] = energy * sg.h1 * h2;
        std::swap(prev, cur);
        std::swap(cur, next);
        for (int i = 0; i < n1; ++i) cur[static_cast<std::size_t>(d.grid.index(i, 0))] = 0.0;
    }
    return out;
}

double relative_l2(const TimeTraceSet& a, const TimeTraceSet& b) {
    if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols())
        throw std::invalid_argument("relative_l2: trace shapes differ");
    const double nb = b.values.norm();
    return nb > 0.0 ? (a.values - b.values).norm() / nb : a.values.norm();
}

}  // namespace modescatter
