#include "modescatter/scatdata.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "modescatter/errors.hpp"
#include "modescatter/kernels.hpp"

namespace modescatter {

namespace {

constexpr cd I(0.0, 1.0);

cd grating_lambda(double k, int m, double alpha, const Grid& g, bool grid_dispersion) {
    if (!grid_dispersion) return lambda_branch(k, m, alpha, Branch::outgoing);
    return discrete_lambda(k * k - grating_kappa2(m, alpha, g.h1), g.h2, k);
}

std::vector<Amplitude> grating_project(const FieldSolution& u, int M, double x2, double sign, ExtractOptions opt) {
    const Grid& g = u.total.grid;
    if (!is_grating(g.geometry)) throw std::invalid_argument("grating amplitudes need a grating field");
    if (2 * M + 1 > g.n1) throw ModeCutoffError("amplitude cutoff exceeds the x1 resolution");
    const std::vector<cd> v = u.scattered_trace(x2);
    std::vector<Amplitude> out;
    for (int m = -M; m <= M; ++m) {
        const double q = m + g.alpha;
        cd acc = 0.0;
        for (int i = 0; i < g.n1; ++i) acc += std::exp(-I * q * g.x1(i)) * v[static_cast<std::size_t>(i)];
        acc /= static_cast<double>(g.n1);
        Amplitude a;
        a.m = m;
        a.lambda = grating_lambda(u.k, m, g.alpha, g, opt.grid_dispersion);
        a.propagating = q * q < u.k * u.k;
        a.value = std::exp(-I * sign * x2 * a.lambda) * acc;
        out.push_back(a);
    }
    return out;
}

void check_basis(const FieldSolution& u, const ModalBasis& basis) {
    const Grid& g = u.total.grid;
    if (g.geometry != Geometry::waveguide) throw std::invalid_argument("waveguide amplitudes need a waveguide field");
    if (std::abs(basis.k - u.k) > 1e-12 * std::max(1.0, std::abs(u.k)))
        throw BasisMismatchError("basis k=" + std::to_string(basis.k) + " differs from field k=" + std::to_string(u.k));
    if (basis.n != g.n1 || std::abs(basis.B - g.width) > 1e-12)
        throw BasisMismatchError("basis nodes differ from the field's x1 grid");
}

std::vector<Amplitude> waveguide_project(const FieldSolution& u, const ModalBasis& basis, double x2, double sign,
                                         ExtractOptions opt) {
    check_basis(u, basis);
    const Grid& g = u.total.grid;
    const std::vector<cd> v = u.scattered_trace(x2);
    std::vector<Amplitude> out;
    for (const auto& mode : basis.modes) {
        cd acc = 0.0;
        for (int i = 0; i < g.n1; ++i)
            acc += basis.weights[static_cast<std::size_t>(i)] * mode.phi[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
        Amplitude a;
        a.m = mode.m;
        a.lambda = opt.grid_dispersion ? discrete_lambda(mode.mu, g.h2, u.k) : branch_sqrt(mode.mu, u.k, Branch::outgoing);
        a.propagating = mode.mu > 0.0;
        a.value = std::exp(-I * sign * x2 * a.lambda) * acc;
        out.push_back(a);
    }
    return out;
}

}  // namespace

std::vector<Amplitude> extract_grating_amplitudes(const FieldSolution& u, int M, ExtractOptions opt) {
    return grating_project(u, M, u.T, 1.0, opt);
}

std::vector<Amplitude> extract_grating_amplitudes_at(const FieldSolution& u, int M, double x2, ExtractOptions opt) {
    return grating_project(u, M, x2, 1.0, opt);
}

std::vector<Amplitude> extract_grating_transmitted(const FieldSolution& u, int M, ExtractOptions opt) {
    if (u.geometry != Geometry::grating_case1) throw std::invalid_argument("transmitted amplitudes need case 1");
    return grating_project(u, M, -u.T, -1.0, opt);
}

std::vector<Amplitude> extract_waveguide_amplitudes(const FieldSolution& u, const ModalBasis& basis, ExtractOptions opt) {
    return waveguide_project(u, basis, u.T, 1.0, opt);
}

std::vector<Amplitude> extract_waveguide_transmitted(const FieldSolution& u, const ModalBasis& basis,
                                                     ExtractOptions opt) {
    return waveguide_project(u, basis, -u.T, -1.0, opt);
}

// ---------------------------------------------------------------------------

void ScatteringDataset::add(int n, double k, const std::vector<Amplitude>& refl, const std::vector<Amplitude>& trans) {
    for (const auto& a : refl) reflected[{n, a.m, k}] = {a.value, a.lambda, a.propagating};
    for (const auto& a : trans) transmitted[{n, a.m, k}] = {a.value, a.lambda, a.propagating};
}

cd ScatteringDataset::a(int n, int m, double k) const {
    const auto it = reflected.find({n, m, k});
    if (it == reflected.end()) {
        std::ostringstream os;
        os << "no amplitude for n=" << n << " m=" << m << " k=" << k;
        throw IncompleteDataError(os.str());
    }
    return it->second.value;
}

std::vector<double> ScatteringDataset::k_values() const {
    std::set<double> ks;
    for (const auto& [key, e] : reflected) ks.insert(key.k);
    return {ks.begin(), ks.end()};
}

std::vector<int> ScatteringDataset::incident_indices(double k) const {
    std::set<int> ns;
    for (const auto& [key, e] : reflected)
        if (key.k == k) ns.insert(key.n);
    return {ns.begin(), ns.end()};
}

ScatteringDataset build_dataset(const Scenario& s, const std::vector<int>& ns, const std::vector<double>& ks, int M,
                                bool generalized, SolveOptions opts, ExtractOptions ex) {
    ScatteringDataset ds;
    ds.geometry = s.geometry;
    ds.alpha = s.alpha;
    {
        std::ostringstream os;
        os << "fdfd n1=" << s.grid.n1 << " h2=" << s.grid.h2 << " T=" << s.T << " Tp=" << s.T_prime
           << " grid_dispersion=" << ex.grid_dispersion;
        ds.provenance = os.str();
    }
    for (double k : ks) {
        const auto sols = solve_distorted_waves(s, ns, k, generalized, opts);
        std::optional<ModalBasis> basis;
        if (s.geometry == Geometry::waveguide) basis = sl_eigensystem(s.c0, s.B, k, std::min(M, s.grid.n1), s.grid.n1);
        for (const auto& u : sols) {
            if (s.geometry == Geometry::waveguide) {
                ds.add(u.n, k, extract_waveguide_amplitudes(u, *basis, ex), extract_waveguide_transmitted(u, *basis, ex));
            } else if (s.geometry == Geometry::grating_case1) {
                ds.add(u.n, k, extract_grating_amplitudes(u, M, ex), extract_grating_transmitted(u, M, ex));
            } else {
                ds.add(u.n, k, extract_grating_amplitudes(u, M, ex));
            }
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------

namespace {

// continuum propagation constant of mode m at k
double flux_weight(const Scenario& s, int m, double k) {
    if (s.geometry == Geometry::waveguide) {
        const auto basis = sl_eigensystem(s.c0, s.B, k, m, s.grid.n1);
        const double mu = basis.modes.back().mu;
        return mu > 0.0 ? std::sqrt(mu) : 0.0;
    }
    const double q = m + s.alpha;
    return q * q < k * k ? std::sqrt(k * k - q * q) : 0.0;
}

std::vector<int> propagating_set(const Scenario& s, double k) {
    std::vector<int> out;
    if (s.geometry == Geometry::waveguide) {
        const auto basis = sl_eigensystem(s.c0, s.B, k, s.grid.n1, s.grid.n1);
        for (const auto& mode : basis.modes)
            if (mode.mu > 0.0) out.push_back(mode.m);
        return out;
    }
    const int R = static_cast<int>(std::abs(k)) + 2;
    for (int m = -R; m <= R; ++m) {
        const double q = m + s.alpha;
        if (q * q < k * k) out.push_back(m);
    }
    return out;
}

}  // namespace

double flux_balance(const ScatteringDataset& ds, int n, double k, const Scenario& s) {
    const auto props = propagating_set(s, k);
    if (std::find(props.begin(), props.end(), n) == props.end())
        throw std::invalid_argument("flux_balance: incident mode must propagate");
    const bool two_sided = s.geometry != Geometry::grating_case2;
    double out = 0.0;
    for (int m : props) {
        const double lm = flux_weight(s, m, k);
        const auto r = ds.reflected.find({n, m, k});
        if (r == ds.reflected.end()) {
            std::ostringstream os;
            os << "missing reflected amplitude m=" << m << " for n=" << n << " at k=" << k;
            throw IncompleteDataError(os.str());
        }
        out += lm * std::norm(r->second.value);
        if (two_sided) {
            const auto t = ds.transmitted.find({n, m, k});
            if (t == ds.transmitted.end()) {
                std::ostringstream os;
                os << "missing transmitted amplitude m=" << m << " for n=" << n << " at k=" << k;
                throw IncompleteDataError(os.str());
            }
            out += lm * std::norm((m == n ? 1.0 : 0.0) + t->second.value);
        }
    }
    const double ln = flux_weight(s, n, k);
    return std::abs(out - ln) / ln;
}

SMatrix flux_normalized_reflection(const ScatteringDataset& ds, double k, const Scenario& s) {
    SMatrix S;
    S.modes = propagating_set(s, k);
    const int p = static_cast<int>(S.modes.size());
    S.S.resize(p, p);
    for (int c = 0; c < p; ++c)
        for (int r = 0; r < p; ++r) {
            const int m = S.modes[static_cast<std::size_t>(r)], n = S.modes[static_cast<std::size_t>(c)];
            S.S(r, c) = std::sqrt(flux_weight(s, m, k) / flux_weight(s, n, k)) * ds.a(n, m, k);
        }
    return S;
}

double reciprocity_defect(const SMatrix& S) {
    const int p = static_cast<int>(S.modes.size());
    auto idx = [&](int m) {
        const auto it = std::find(S.modes.begin(), S.modes.end(), m);
        return it == S.modes.end() ? -1 : static_cast<int>(it - S.modes.begin());
    };
    double worst = 0.0, scale = 0.0;
    for (int r = 0; r < p; ++r)
        for (int c = 0; c < p; ++c) {
            scale = std::max(scale, std::abs(S.S(r, c)));
            const int r2 = idx(-S.modes[static_cast<std::size_t>(c)]), c2 = idx(-S.modes[static_cast<std::size_t>(r)]);
            if (r2 < 0 || c2 < 0) throw std::invalid_argument("reciprocity_defect: propagating set is not symmetric");
            worst = std::max(worst, std::abs(S.S(r, c) - S.S(r2, c2)));
        }
    return scale > 0.0 ? worst / scale : 0.0;
}

// ---------------------------------------------------------------------------

double CutoffSpec::operator()(double x2) const {
    const double a = T + 0.1 * width, b = T + width;
    const double t = std::clamp((std::abs(x2) - a) / (b - a), 0.0, 1.0);
    return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}

Lemma1Terms lemma1_terms(const Scenario& s, const LineSource& f, int m, double k, const CutoffSpec& cutoff,
                         SolveOptions opts) {
    const Grid& g = s.grid;
    if (!is_grating(s.geometry)) throw std::invalid_argument("lemma1: grating scenarios only");
    if (std::abs(cutoff.T - s.T) > 1e-12) throw std::invalid_argument("lemma1: cutoff inner radius must equal T");
    if (cutoff.width < 0.0 || s.T_prime < s.T + cutoff.width + 2.0 * g.h2)
        throw InvalidScenarioError("lemma1: the strip margin must exceed the cutoff width");
    Lemma1Terms out;
    bool zero = true;
    for (const auto& v : f.f)
        if (v != cd(0.0)) zero = false;
    if (zero) return out;

    const FieldSolution up = solve_distorted_wave(s, m, k, false, opts);
    const auto tr = up.trace(s.T);
    for (int i = 0; i < g.n1; ++i) out.lhs += std::conj(f.f[static_cast<std::size_t>(i)]) * tr[static_cast<std::size_t>(i)];
    out.lhs *= g.h1;

    const FieldSolution w = incoming_line_source_solve(s, f, k, opts);
    Field pw(g);
    for (int j = 0; j < g.n2; ++j) {
        const double c = cutoff(g.x2(j));
        for (int i = 0; i < g.n1; ++i) pw(i, j) = c * w.total(i, j);
    }
    const Field Ap = apply_operator(s, k, pw, Exec::parallel);

    // continuum incident wave
    const cd lam = lambda_branch(k, m, s.alpha, Branch::outgoing);
    std::vector<cd> lateral(static_cast<std::size_t>(g.n1));
    for (int i = 0; i < g.n1; ++i) lateral[static_cast<std::size_t>(i)] = std::exp(I * (m + s.alpha) * g.x1(i));
    for (int j = 1; j < g.n2 - 1; ++j) {
        const cd e = std::exp(-I * g.x2(j) * lam);
        for (int i = 0; i < g.n1; ++i)
            out.rhs += g.lateral_weight(i) * g.h2 * lateral[static_cast<std::size_t>(i)] * e * std::conj(Ap(i, j));
    }
    const double den = std::abs(out.lhs) + std::abs(out.rhs);
    out.residual = den > 0.0 ? std::abs(out.lhs - out.rhs) / den : 0.0;
    return out;
}

double lemma1_residual(const Scenario& s, const LineSource& f, int m, double k, const CutoffSpec& cutoff,
                       SolveOptions opts) {
    return lemma1_terms(s, f, m, k, cutoff, opts).residual;
}

}  // namespace modescatter
