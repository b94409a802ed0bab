#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "modescatter/grid.hpp"
#include "modescatter/spectral.hpp"

namespace modescatter {

enum class Polarization { TE, TM, acoustic };

std::string to_string(Geometry g);
std::string to_string(Polarization p);
Geometry geometry_from_string(const std::string& s);
Polarization polarization_from_string(const std::string& s);

struct GridSpec {
    int n1 = 64;        // x1 nodes per period / across the guide
    double h2 = 0.025;  // x2 spacing; T, T' (and R) must be multiples of it
};

/// Geometry and medium of one scattering problem, sampled on its grid.
///
/// Gratings carry eps/eps0 in `medium` (TE or TM); waveguides carry the sound
/// speed c. The contrast vanishes for |x2| >= T: eps = 1 or c = c0(x1) there.
/// Case 2 gratings end at a Dirichlet wall x2 = -R (grid row 0); otherwise the
/// strip is truncated at x2 = -T' with an exact modal radiation closure.
struct Scenario {
    Geometry geometry = Geometry::grating_case1;
    Polarization polarization = Polarization::TE;
    double alpha = 0.0;
    double T = 1.0;
    double T_prime = 3.0;
    double R = 0.0;
    double B = 0.0;
    Profile c0 = Profile::constant(1.0);
    Grid grid;
    std::vector<double> medium;
    std::vector<unsigned char> conductor;
    std::optional<double> predicted_exceptional_k2;
    std::string label;

    /// Symmetrizing weight a(x): TE -> eps, TM -> 1, acoustic -> c^-2.
    double weight(int p) const;
    double max_weight() const;
    bool is_conductor(int p) const { return !conductor.empty() && conductor[static_cast<std::size_t>(p)] != 0; }
    bool has_conductors() const;
    int row_T() const { return grid.row_of(T); }
    int row_minus_T() const { return grid.row_of(-T); }
    /// Background value of `medium` at column i (1 for gratings, c0 for guides).
    double background(int i) const;

    /// Checks the support, inclusion and connectivity conditions; throws
    /// InvalidScenarioError.
    void validate() const;
};

using MediumFn = std::function<double(double x1, double x2)>;
using MaskFn = std::function<bool(double x1, double x2)>;

/// Grating on [0, 2 pi) x [x2_min, T'], x2_min = -T' (case 1) or -R (case 2).
Scenario make_grating(Geometry geometry, Polarization pol, double alpha, double T, double T_prime, GridSpec spec,
                      const MediumFn& eps, const MaskFn& conductor = {}, double R = 0.0);

/// Smooth-contrast reference grating (case 1):
/// eps = 1 + amplitude * smooth_bump(x2, T) * (1 + 0.3 cos x1).
Scenario make_reference_grating(Polarization pol, double alpha, GridSpec spec = {}, double amplitude = 0.5,
                                double T = 1.0, double T_prime = 3.0);

/// Acoustic guide (0, B] x [-T', T'] with sound speed c and background c0.
Scenario make_waveguide(const Profile& c0, double B, double T, double T_prime, GridSpec spec, const MediumFn& c);

/// Smooth compact bump: (1 - (x/w)^2)^3 for |x| < w, zero outside. C^2.
double smooth_bump(double x, double w);

}  // namespace modescatter
