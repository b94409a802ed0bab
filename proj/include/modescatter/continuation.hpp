#pragma once

#include <complex>
#include <utility>
#include <vector>

namespace modescatter {

using cd = std::complex<double>;

/// Barycentric rational r(z) = sum w_j f_j / (z - z_j) / sum w_j / (z - z_j).
struct Barycentric {
    std::vector<double> support;
    std::vector<cd> values;
    std::vector<cd> weights;

    cd operator()(cd z) const;
    int degree() const { return static_cast<int>(support.size()) - 1; }
    /// Zeros of the denominator.
    std::vector<cd> poles() const;
    cd residue(cd pole) const;
};

struct FitOptions {
    double holdout = 0.25;                  // fraction of samples kept out of the fit
    int max_support = 40;
    double tolerance = 1e-13;               // greedy stop (relative)
    std::vector<double> ill_conditioned;    // k where solver trouble was recorded
    std::vector<std::pair<double, double>> excluded;  // threshold guard bands
};

struct ContinuationModel {
    Barycentric best;
    Barycentric second;  // runner-up degree; spread gives the error estimate
    double window_lo = 0.0;
    double window_hi = 0.0;
    std::vector<std::pair<double, double>> excluded;
    double holdout_residual = 0.0;
    int degree = 0;
    int samples = 0;

    double trust_lo() const { return window_lo - 0.25 * (window_hi - window_lo); }
    double trust_hi() const { return window_hi + 0.25 * (window_hi - window_lo); }
};

/// AAA-type fit: greedy support selection, weights from the SVD of the
/// Loewner matrix, degree chosen by the held-out residual, refit on all
/// samples. Throws InsufficientSamplesError (< 12 samples) and
/// PoleInWindowError (pole with non-negligible residue inside the window).
ContinuationModel fit_rational(const std::vector<std::pair<double, cd>>& samples, FitOptions opt = {});

struct ContinuedValue {
    cd value;
    double error = 0.0;
};

/// Throws ExtrapolationRangeError outside the trust region or inside an excluded band.
ContinuedValue evaluate_continuation(const ContinuationModel& model, double k);

}  // namespace modescatter
