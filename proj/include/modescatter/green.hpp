#pragma once

#include "modescatter/grid.hpp"
#include "modescatter/kernels.hpp"
#include "modescatter/spectral.hpp"

namespace modescatter {

struct GreenApplication {
    Geometry geometry = Geometry::grating_case1;
    double k = 1.0;
    Branch branch = Branch::outgoing;
    int mode_cutoff = 0;  // |m| <= M (grating) or m <= M (waveguide)
    Exec exec = Exec::parallel;
};

struct GreenResult {
    Field u;
    /// Smallest decay rate among the discarded modes and the resulting bound
    /// e^{-delta h2} on their kernel at one grid step of separation.
    double delta = 0.0;
    double truncation_bound = 0.0;
};

/// (-Delta - k^2)^{-1} f for a quasi-periodic grating grid function, as the
/// mode sum of 1-D kernels (i / 2 lambda_m) e^{i lambda_m |x2 - y2|} with the
/// continuum lambda_m. The incoming kernel is conj(G+ conj f).
/// Throws ThresholdError, ModeCutoffError.
GreenResult grating_green_apply(const Field& f, const GreenApplication& app);

/// (-c0^2 Delta - k^2)^{-1} f in the guide: modal sum over the discrete
/// Sturm-Liouville basis with weight f / c0^2 and wavenumbers sqrt(mu_m).
/// Throws ThresholdError, ModeCutoffError, BasisMismatchError.
GreenResult waveguide_green_apply(const Field& f, const GreenApplication& app, const ModalBasis& basis);

}  // namespace modescatter
