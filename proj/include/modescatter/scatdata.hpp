#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "modescatter/forward.hpp"

namespace modescatter {

struct Amplitude {
    int m = 0;
    cd value;
    cd lambda;  // exponent used for the height phase
    bool propagating = false;
};

struct ExtractOptions {
    /// Use the grid-consistent exponent of the discrete exterior for the
    /// e^{-i T lambda} phase (exact for the discrete field). false: continuum lambda.
    bool grid_dispersion = true;
};

/// Reflected amplitudes a_m = e^{-i x2 lambda_m} (1/2 pi) int e^{-i(m+alpha)x1} v(x1, x2) dx1, |m| <= M,
/// read on the line x2 (default T). Periodic trapezoid rule.
std::vector<Amplitude> extract_grating_amplitudes(const FieldSolution& u, int M, ExtractOptions opt = {});
std::vector<Amplitude> extract_grating_amplitudes_at(const FieldSolution& u, int M, double x2, ExtractOptions opt = {});
/// Transmitted amplitudes of the scattered field below the strip (case 1),
/// v = sum t_m e^{i[(m+alpha)x1 - lambda_m x2]} for x2 <= -T.
std::vector<Amplitude> extract_grating_transmitted(const FieldSolution& u, int M, ExtractOptions opt = {});

/// b_m = e^{-i T sqrt(mu_m)} int phi_m v(x1, T) dx1 with the trapezoid
/// weights of the basis. Throws BasisMismatchError.
std::vector<Amplitude> extract_waveguide_amplitudes(const FieldSolution& u, const ModalBasis& basis,
                                                    ExtractOptions opt = {});
std::vector<Amplitude> extract_waveguide_transmitted(const FieldSolution& u, const ModalBasis& basis,
                                                     ExtractOptions opt = {});

/// Amplitudes a_m(n, k) (reflected, x2 > T) and t_m(n, k) (transmitted, x2 < -T).
struct ScatteringDataset {
    struct Key {
        int n;
        int m;
        double k;
        bool operator<(const Key& o) const { return std::tie(k, n, m) < std::tie(o.k, o.n, o.m); }
    };
    struct Entry {
        cd value;
        cd lambda;
        bool propagating = false;
    };

    Geometry geometry = Geometry::grating_case1;
    double alpha = 0.0;
    std::string provenance;
    std::map<Key, Entry> reflected;
    std::map<Key, Entry> transmitted;

    void add(int n, double k, const std::vector<Amplitude>& refl, const std::vector<Amplitude>& trans = {});
    bool has(int n, int m, double k) const { return reflected.count({n, m, k}) != 0; }
    cd a(int n, int m, double k) const;
    std::vector<double> k_values() const;
    std::vector<int> incident_indices(double k) const;
};

/// Solves the distorted waves n in ns at k and records their amplitudes with
/// |m| <= M (grating) or m <= M (waveguide).
ScatteringDataset build_dataset(const Scenario& s, const std::vector<int>& ns, const std::vector<double>& ks, int M,
                                bool generalized = false, SolveOptions opts = {}, ExtractOptions ex = {});

/// |sum_m lambda_m (|a_m|^2 + |delta_mn + t_m|^2) - lambda_n| / lambda_n with
/// the continuum lambda (grating) or sqrt(mu_m) (waveguide) over the
/// propagating set. Case 2 counts only the reflected side. Throws IncompleteDataError.
double flux_balance(const ScatteringDataset& ds, int n, double k, const Scenario& s);

/// Flux-normalized reflection block S_mn = sqrt(lambda_m / lambda_n) a_m(n)
/// over the propagating indices (rows m, columns n, both ascending).
struct SMatrix {
    std::vector<int> modes;
    Eigen::MatrixXcd S;
};
SMatrix flux_normalized_reflection(const ScatteringDataset& ds, double k, const Scenario& s);
/// max |S_mn - S_{-n,-m}| / max |S| (alpha = 0 grating reciprocity).
double reciprocity_defect(const SMatrix& S);

struct CutoffSpec {
    double T = 1.0;
    double width = 1.0;
    /// 0 for |x2| <= T + width/10, 1 for |x2| >= T + width, quintic blend (C^2) between.
    double operator()(double x2) const;
};

struct Lemma1Terms {
    cd lhs;
    cd rhs;
    double residual = 0.0;
};

/// Both sides of the trace identity int conj(f) u_+(x1, T, m, k) dx1 =
/// int int e^{i[(m+alpha)x1 - x2 lambda_m]} conj((L - k^2) psi w) dx with
/// w the incoming line-source solution; (L - k^2) psi w is evaluated with the
/// discrete operator (gratings). residual = |lhs - rhs| / (|lhs| + |rhs|), 0 if both vanish.
Lemma1Terms lemma1_terms(const Scenario& s, const LineSource& f, int m, double k, const CutoffSpec& cutoff,
                         SolveOptions opts = {});
double lemma1_residual(const Scenario& s, const LineSource& f, int m, double k, const CutoffSpec& cutoff,
                       SolveOptions opts = {});

}  // namespace modescatter
