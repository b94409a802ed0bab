#pragma once

#include <complex>
#include <utility>
#include <vector>

namespace modescatter {

using cd = std::complex<double>;

/// Radiation side. Outgoing values are the continuous extension from
/// Im k > 0, incoming values from Im k < 0.
enum class Branch { outgoing, incoming };

/// Relative half-width of the band around a threshold inside which branch
/// values and fundamental solutions are refused.
inline constexpr double kGuardRelative = 1e-6;

/// True if |k| lies within the guard band of the threshold magnitude k_thr.
bool near_threshold(double k, double k_thr);

/// Square root with the radiation conventions for a real argument z = z(k):
///   outgoing: sqrt(z) > 0 for z > 0, k > 0; < 0 for z > 0, k < 0; i sqrt|z| for z < 0.
///   incoming: the negation of the outgoing value (-sqrt z, -i sqrt|z|).
/// Incoming wave factors e^{i lambda_in |x|} of propagating modes are the
/// complex conjugates of the outgoing ones; for evanescent modes the incoming
/// value is the conjugate of the outgoing one.
cd branch_sqrt(double z, double k, Branch side);

/// lambda_m(k) = sqrt(k^2 - (m + alpha)^2) with the conventions above.
/// Throws ThresholdError when k is inside the guard band of |m + alpha|.
cd lambda_branch(double k, int m, double alpha, Branch side = Branch::outgoing);

/// Outgoing lambda_m for complex k with Im k > 0 (k sqrt(1 - (m+alpha)^2/k^2),
/// principal root, cut on (-|m+alpha|, |m+alpha|)).
cd lambda_branch_complex(cd k, int m, double alpha);

/// Grid-consistent version of a continuum branch value lambda: the exponent
/// theta/h of the discrete mode rho = e^{i theta} of the three-point x2
/// operator, theta = 2 asin(h lambda / 2). Tends to lambda as h -> 0.
cd grid_lambda(cd lambda, double h2);

/// Eigenvalue of the periodic three-point x1 Laplacian on the Bloch mode m:
/// (2/h1 sin((m+alpha) h1 / 2))^2. Equals (m+alpha)^2 for h1 = 0.
double grating_kappa2(int m, double alpha, double h1);

struct GratingMode {
    int m = 0;
    double alpha = 0.0;
    cd lambda;
    bool propagating = false;
};

/// Modes |m| <= M at wavenumber k, sorted by m.
std::vector<GratingMode> grating_modes(double k, double alpha, int M, Branch side = Branch::outgoing);

/// Smallest cutoff M such that |m| <= M holds every propagating mode plus at
/// least eight evanescent ones.
int grating_default_cutoff(double k, double alpha);

struct Threshold {
    double k = 0.0;
    std::vector<int> modes;  // every p with |p + alpha| == k
};

struct ThresholdSet {
    std::vector<Threshold> values;  // ascending in k
    double guard_band = kGuardRelative;

    /// Nearest threshold to |k|, or nullptr if the set is empty.
    const Threshold* nearest(double k) const;
    bool collides(double k) const;
};

/// All thresholds |p + alpha| <= k_max.
ThresholdSet grating_thresholds(double alpha, double k_max);

/// Laterally varying background sound speed c0(x1) on [0, B].
class Profile {
public:
    enum class Kind { constant, sine_perturbed, sampled };

    static Profile constant(double value);
    /// value * (1 + amplitude * sin(pi x / width)).
    static Profile sine_perturbed(double value, double amplitude, double width);
    /// Piecewise-linear interpolation of (x, value) samples; clamps outside.
    static Profile sampled(std::vector<std::pair<double, double>> points);

    double operator()(double x) const;
    Kind kind() const { return kind_; }
    double value() const { return value_; }
    double amplitude() const { return amplitude_; }
    double width() const { return width_; }
    const std::vector<std::pair<double, double>>& points() const { return points_; }

private:
    Kind kind_ = Kind::constant;
    double value_ = 1.0;
    double amplitude_ = 0.0;
    double width_ = 1.0;
    std::vector<std::pair<double, double>> points_;
};

struct WaveguideMode {
    int m = 1;                  // 1-based
    double mu = 0.0;
    std::vector<double> phi;    // nodes x_i = i h, i = 1..n
    double dmu_dk = 0.0;
};

/// Discrete Sturm-Liouville basis for phi'' + k^2/c0^2 phi = mu phi,
/// phi(0) = 0, phi'(B) = 0, on the uniform grid x_i = i B/n, i = 1..n.
/// The Neumann end uses a ghost point; with trapezoid weights (1/2 at x = B)
/// the discrete problem is symmetric and the modes are exactly orthonormal.
struct ModalBasis {
    double k = 0.0;
    double B = 1.0;
    int n = 0;
    double h = 0.0;
    std::vector<double> x;
    std::vector<double> weights;  // trapezoid weights including h
    std::vector<double> inv_c2;   // c0(x_i)^-2
    std::vector<WaveguideMode> modes;

    /// Unweighted L2 pairing on [0, B] with the trapezoid rule.
    double inner(const std::vector<double>& a, const std::vector<double>& b) const;
    int propagating_count() const;
};

/// M eigenpairs with the largest mu first. Throws ConvergenceError on solver
/// failure. dmu_dk uses Hellmann-Feynman: 2k * int phi^2 / c0^2.
ModalBasis sl_eigensystem(const Profile& c0, double B, double k, int M, int n_grid = 400);

/// Roots of mu_m(k) = 0 in [k_lo, k_hi] by bisection (mu_m is increasing in k).
std::vector<double> waveguide_thresholds(const Profile& c0, double B, int m, double k_lo, double k_hi,
                                         int n_grid = 400);

/// Thresholds of every mode whose root lies in (0, k_max].
ThresholdSet waveguide_threshold_set(const Profile& c0, double B, double k_max, int n_grid = 400);

}  // namespace modescatter
