#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "modescatter/scatdata.hpp"

namespace modescatter {

/// Lambda(k) on x2 = T in a truncated trace basis: Fourier modes e^{i(m+alpha)x1},
/// |m| <= M (grating), or waveguide modes phi_m, m = 1..M. entries(p, q) is the
/// p-th coefficient of the normal derivative produced by the q-th basis trace.
struct DtNMatrix {
    double k = 0.0;
    Geometry geometry = Geometry::grating_case1;
    double alpha = 0.0;
    std::vector<int> basis;
    Eigen::MatrixXcd entries;
    double condition = 0.0;            // lower-domain solve (dtn_direct)
    std::vector<double> span_residual;  // per basis element (dtn_from_modes)
};

/// Second-order one-sided derivative from below, (3u_J - 4u_{J-1} + u_{J-2}) / (2 h2).
std::vector<cd> one_sided_derivative(const std::vector<cd>& uJ, const std::vector<cd>& uJ1, const std::vector<cd>& uJ2,
                                     double h2);

/// Trace basis on the x1 nodes of the scenario: synthesis columns and the
/// matching analysis rows (trapezoid / periodic quadrature).
struct TraceBasis {
    std::vector<int> labels;
    Eigen::MatrixXcd synthesis;  // n1 x M'
    Eigen::MatrixXcd analysis;   // M' x n1
};
TraceBasis trace_basis(const Scenario& s, double k, int M);

/// Solves (L - k^2) u = 0 below x2 = T with u = h on x2 = T for every basis
/// trace: outgoing closure at the bottom (case 1, waveguide) or the case 2 wall.
/// Throws STConditionError when the lower-domain condition estimate exceeds
/// opts.abort_condition (k^2 near a lower-domain Dirichlet eigenvalue).
DtNMatrix dtn_direct(const Scenario& s, double k, int M, SolveOptions opts = {});

/// Exterior description used to turn amplitudes into traces and derivatives on x2 = T.
struct ExteriorModel {
    Grid grid;
    double T = 1.0;
    double k = 0.0;
    std::optional<ModalBasis> basis;  // waveguides
    /// Derivatives from the discrete one-sided stencil applied to each exterior
    /// mode (matches dtn_direct exactly where the exterior expansion holds);
    /// false: exact factors +/- i lambda.
    bool stencil_derivative = true;
};
ExteriorModel make_exterior_model(const Scenario& s, double k);

struct FromModesOptions {
    double reg = 1e-8;
    int n_span = -1;            // use incident |n| <= n_span (gratings) or n <= n_span; -1: all in the dataset
    int m_ext = -1;             // amplitude rows |m| <= m_ext; -1: all in the dataset
    bool check_span = true;     // IllConditionedSpanError above the threshold
    double span_threshold = 0.05;
};

/// Reconstructs Lambda(k) from the distorted-wave amplitudes at k: traces t_n
/// and derivatives d_n from the exterior expansion, ridge least-squares
/// expansion of each basis trace in span{t_n}, Lambda h = sum c_n d_n.
DtNMatrix dtn_from_modes(const ScatteringDataset& ds, const ExteriorModel& ext, int M, FromModesOptions opt = {});

/// Relative expansion residual of each basis trace in span{t_n} (|n| <= n_span).
std::vector<double> span_residuals(const ScatteringDataset& ds, const ExteriorModel& ext, int M, FromModesOptions opt);

/// Weighted-pairing symmetry defect ||Lambda - Lambda^T|| / ||Lambda||; for
/// gratings (alpha = 0) the transpose pairs mode m with -m.
double dtn_symmetry_defect(const DtNMatrix& d);

/// Time samples t_i = i dt, i = 0..nt-1, on the x1 nodes.
struct TimeTraceSet {
    double dt = 0.0;
    std::vector<double> x1;
    Eigen::MatrixXcd values;  // nt x n1
    double band_lo = 0.0;
    double band_hi = 0.0;
    std::vector<double> energy;  // time-domain solver: discrete energy per step
    int nt() const { return static_cast<int>(values.rows()); }
};

struct SynthesisOptions {
    int pad_factor = 8;  // periodic extension length / record length
    double max_outside_energy = 0.01;
    double onset_level = 1e-3;  // input onset: first |g| above this fraction of the peak
};

struct SynthesisResult {
    TimeTraceSet output;
    double outside_energy = 0.0;   // fraction of the input energy outside the family band
    double leakage = 0.0;          // output energy before the input onset / total
    double onset_time = 0.0;
};

/// Fourier-Laplace synthesis of the hyperbolic DtN map: transform g in t
/// (convention e^{-i omega t}, omega = k), apply Lambda(omega) interpolated
/// cubically over the family's k-grid, transform back, and keep the causal
/// window [0, nt dt). Throws BandCoverageError.
SynthesisResult dtn_time_synthesis(const std::vector<DtNMatrix>& family, const TimeTraceSet& g,
                                   SynthesisOptions opt = {});

/// Frequencies omega_j = 2 pi j / (N dt) of the padded transform used by
/// dtn_time_synthesis that fall in [lo, hi].
std::vector<double> synthesis_frequencies(const TimeTraceSet& g, double lo, double hi, int pad_factor = 8);

struct TimeDomainOptions {
    double depth = 30.0;       // lower domain extends to x2 = T - depth
    double sponge = 12.0;      // damped layer thickness at the bottom
    double sponge_strength = 3.0;
};

/// Leapfrog for a v_tt = -D v below x2 = T (D the stiffness part of a(L - k^2)),
/// v = g on x2 = T, zero initial data, geometry lateral conditions, sponge
/// layer above a Dirichlet bottom. Returns the one-sided normal derivative
/// trace. Throws CFLViolationError.
TimeTraceSet timedomain_reference(const Scenario& s, const TimeTraceSet& g, TimeDomainOptions opt = {});

/// Relative L2 mismatch over all samples.
double relative_l2(const TimeTraceSet& a, const TimeTraceSet& b);

}  // namespace modescatter
