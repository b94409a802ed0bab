#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "modescatter/scenario.hpp"

namespace modescatter {

/// Lateral eigenbasis of the discrete exterior operator at wavenumber k.
/// Gratings: Bloch modes e^{i(m+alpha)x1}, m in [-n1/2, n1/2). Waveguides: the
/// discrete Sturm-Liouville modes on the same x1 nodes. For each mode the
/// exterior x2 equation is u'' + z u = 0 with z = k^2 - kappa_h^2 or mu_h.
struct Exterior {
    double k = 0.0;
    double h2 = 0.0;
    std::vector<int> labels;      // m (grating) or 1-based mode index (waveguide)
    std::vector<double> z;        // discrete z_m
    std::vector<cd> lambda;       // outgoing grid lambda, e^{i lambda h2} = rho
    Eigen::MatrixXcd synthesis;   // n1 x modes: column q samples mode q on the x1 nodes
    Eigen::MatrixXcd analysis;    // modes x n1: analysis * synthesis = I

    int column_of(int label) const;  // -1 if absent
    bool propagating(int q) const { return z[static_cast<std::size_t>(q)] > 0.0; }
    /// Decay factor of one x2 step for outgoing (or incoming) radiation.
    cd rho(int q, Branch side) const;
};

/// Exponent lambda_h of the outgoing discrete x2 mode for u'' + z u = 0 with
/// spacing h: rho + 1/rho = 2 - h^2 z, rho = e^{i lambda_h h}, |rho| <= 1.
cd discrete_lambda(double z, double h, double k);

/// Builds the exterior basis; throws ThresholdError inside a guard band, and
/// also when the grid shifts a mode across its threshold.
Exterior make_exterior(const Scenario& s, double k);

/// How the row just outside the active row range is treated.
enum class Closure { outgoing, incoming, dirichlet };

struct DomainRows {
    int lo = 0;
    int hi = 0;
    Closure below = Closure::outgoing;
    Closure above = Closure::outgoing;
};

struct SolveOptions {
    bool estimate_condition = true;
    double abort_condition = 1e8;
    int power_iterations = 6;
};

/// Factorized FDFD system a(L - k^2) on the rows [lo, hi] with modal
/// radiation closures (exact discrete DtN of the exterior) or Dirichlet rows.
/// Conductor nodes become identity rows.
class LinearSystem {
public:
    LinearSystem(const Scenario& s, double k, DomainRows rows, Exterior ext, SolveOptions opts = {});
    ~LinearSystem();
    LinearSystem(LinearSystem&&) noexcept;
    LinearSystem& operator=(LinearSystem&&) noexcept;

    /// rhs: operator-unit right-hand side on active rows. known: values on
    /// Dirichlet rows and conductor nodes (ignored elsewhere). Returns a full
    /// grid field; rows outside [lo-1, hi+1] are zero.
    Field solve(const Field& rhs, const Field& known) const;

    /// Dimensionless resolvent estimate ||A^{-1}||_2 * max(1, k^2 max a),
    /// from power iteration on (A^H A)^{-1}.
    double condition() const { return condition_; }
    /// Eigenvalue of A with smallest modulus (inverse iteration).
    cd smallest_eigenvalue(int iterations = 30) const;

    const Eigen::SparseMatrix<cd>& matrix() const { return A_; }
    const Exterior& exterior() const { return ext_; }
    const DomainRows& rows() const { return rows_; }
    double k() const { return k_; }
    bool factorized() const;

private:
    struct Factor;
    const Scenario* s_;
    double k_;
    DomainRows rows_;
    Exterior ext_;
    Eigen::SparseMatrix<cd> A_;
    std::unique_ptr<Factor> lu_;
    double condition_ = 0.0;

    int unknown(int i, int j) const { return (j - rows_.lo) * s_->grid.n1 + i; }
};

/// Five-point coefficients of the unscaled a(L - k^2) at one node: the value
/// is diag u(i,j) + sum c_nb[t] u(nb[t], j) + north u(i,j+1) + south u(i,j-1).
/// Waveguide rows carry the trapezoid row scale used by the assembled matrix.
struct StencilCoeffs {
    cd diag;
    int nb[2] = {-1, -1};
    cd c_nb[2];
    cd north;
    cd south;
    double scale = 1.0;
};
StencilCoeffs stencil_coefficients(const Scenario& s, double k, int i, int j);

/// Row-weighted interior stencil a(L - k^2)u at node (i, j), using the field
/// values of its four neighbours (rows j-1 and j+1 must exist in u).
cd apply_stencil(const Scenario& s, double k, const Field& u, int i, int j);

/// The full-strip operator with radiation closures on the requested side.
LinearSystem assemble_operator(const Scenario& s, double k, Branch side = Branch::outgoing, SolveOptions opts = {});

struct FieldSolution {
    Field total;
    Field incident;
    double k = 0.0;
    int n = 0;
    Geometry geometry = Geometry::grating_case1;
    double alpha = 0.0;
    double T = 1.0;
    double condition = 0.0;

    Field scattered() const { return total - incident; }
    std::vector<cd> trace(double x2) const { return total.row(total.grid.row_of(x2)); }
    std::vector<cd> scattered_trace(double x2) const;
    /// Second-order one-sided derivative from below: (3u_J - 4u_{J-1} + u_{J-2}) / (2 h2).
    std::vector<cd> normal_derivative(double x2) const;
};

/// Discrete incident wave: mode n on the x1 nodes times e^{-i lambda_h x2}.
Field incident_wave(const Scenario& s, const Exterior& ext, int n);

/// Distorted (or generalized distorted) plane wave u = incident + v_+ with
/// outgoing v_+. With generalized = false the incident mode must propagate.
FieldSolution solve_distorted_wave(const Scenario& s, int n, double k, bool generalized = false,
                                   SolveOptions opts = {});
/// Batch of incident indices sharing one factorization.
std::vector<FieldSolution> solve_distorted_waves(const Scenario& s, const std::vector<int>& ns, double k,
                                                 bool generalized, SolveOptions opts = {});

/// f(x1) on the row x2 = T.
struct LineSource {
    std::vector<cd> f;
};

/// Incoming solution of (L - k^2) w = f delta_T: incoming closures at both
/// ends (or the case 2 wall); the source row carries a f / h2.
FieldSolution incoming_line_source_solve(const Scenario& s, const LineSource& f, double k, SolveOptions opts = {});

/// Compactly supported potential V(x2) for the embedded-eigenvalue medium.
using Potential = std::function<double(double x2)>;

struct BoundState {
    double energy = 0.0;
    std::vector<double> u;  // on the grid rows, unit discrete L2 norm
};

/// Eigenpairs of the discrete -d^2/dx2^2 + V on the grid rows (Dirichlet just
/// outside the first and last row), ascending.
std::vector<BoundState> schrodinger_spectrum(const Potential& V, const Grid& grid, int count);

/// Footnote medium with an embedded eigenvalue: eps^{-1} = K / (K - V),
/// K = kappa_h(m)^2 + E, where kappa_h is the discrete transverse wavenumber of
/// mode m. Records the predicted exceptional energy k^2 = K.
/// Throws NoBoundStateError if no discrete eigenvalue lies within 1e-6 of E,
/// PositivityError if K - V <= 0 somewhere.
Scenario embedded_eigen_scenario(const Potential& V, double E, int m, double alpha, double T, double T_prime,
                                 GridSpec spec);

struct ExceptionalProbe {
    double k2 = 0.0;
    double condition = 0.0;
    int iterations = 0;
};

/// Secant search on the smallest eigenvalue of a(L - k^2) in k^2, starting
/// from k2_guess and kept inside [k2_guess - window, k2_guess + window].
ExceptionalProbe locate_exceptional_k2(const Scenario& s, double k2_guess, double window, int max_iter = 12);

}  // namespace modescatter
