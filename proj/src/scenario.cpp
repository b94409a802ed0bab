#include "modescatter/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "modescatter/errors.hpp"

namespace modescatter {

std::string to_string(Geometry g) {
    switch (g) {
        case Geometry::grating_case1: return "grating_case1";
        case Geometry::grating_case2: return "grating_case2";
        case Geometry::waveguide: return "waveguide";
    }
    return "?";
}

std::string to_string(Polarization p) {
    switch (p) {
        case Polarization::TE: return "TE";
        case Polarization::TM: return "TM";
        case Polarization::acoustic: return "acoustic";
    }
    return "?";
}

Geometry geometry_from_string(const std::string& s) {
    if (s == "grating_case1") return Geometry::grating_case1;
    if (s == "grating_case2") return Geometry::grating_case2;
    if (s == "waveguide") return Geometry::waveguide;
    throw ParseError("unknown geometry '" + s + "'");
}

Polarization polarization_from_string(const std::string& s) {
    if (s == "TE") return Polarization::TE;
    if (s == "TM") return Polarization::TM;
    if (s == "acoustic") return Polarization::acoustic;
    throw ParseError("unknown polarization '" + s + "'");
}

double smooth_bump(double x, double w) {
    const double t = x / w;
    if (std::abs(t) >= 1.0) return 0.0;
    const double u = 1.0 - t * t;
    return u * u * u;
}

double Scenario::weight(int p) const {
    const double v = medium[static_cast<std::size_t>(p)];
    switch (polarization) {
        case Polarization::TE: return v;
        case Polarization::TM: return 1.0;
        case Polarization::acoustic: return 1.0 / (v * v);
    }
    return 1.0;
}

double Scenario::max_weight() const {
    double m = 0.0;
    for (int p = 0; p < grid.size(); ++p) m = std::max(m, weight(p));
    return m;
}

bool Scenario::has_conductors() const {
    return std::any_of(conductor.begin(), conductor.end(), [](unsigned char c) { return c != 0; });
}

double Scenario::background(int i) const {
    return geometry == Geometry::waveguide ? c0(grid.x1(i)) : 1.0;
}

namespace {

bool multiple_of(double x, double h) {
    const double r = x / h;
    return std::abs(r - std::round(r)) < 1e-8;
}

void check_rows(double T, double T_prime, double h2, double R, bool case2) {
    if (!(T > 0.0) || !(T_prime > T)) throw InvalidScenarioError("need 0 < T < T'");
    if (!multiple_of(T, h2) || !multiple_of(T_prime, h2) || (case2 && !multiple_of(R, h2)))
        throw InvalidScenarioError("T, T' and R must be multiples of the x2 spacing");
}

}  // namespace

void Scenario::validate() const {
    if (static_cast<int>(medium.size()) != grid.size()) throw InvalidScenarioError("medium size does not match grid");
    if (!conductor.empty() && static_cast<int>(conductor.size()) != grid.size())
        throw InvalidScenarioError("conductor mask size does not match grid");
    if (alpha < 0.0 || alpha >= 1.0) throw InvalidScenarioError("alpha must lie in [0,1)");
    if (geometry != Geometry::waveguide && polarization == Polarization::acoustic)
        throw InvalidScenarioError("gratings use TE or TM polarization");
    if (geometry == Geometry::waveguide && polarization != Polarization::acoustic)
        throw InvalidScenarioError("waveguides use the acoustic operator");
    if (has_conductors() && polarization != Polarization::TE)
        throw InvalidScenarioError("embedded conductors are supported for TE only");
    if (has_conductors() && geometry == Geometry::waveguide)
        throw InvalidScenarioError("conductors are a grating feature");

    for (int j = 0; j < grid.n2; ++j) {
        const double x2 = grid.x2(j);
        const bool outside = std::abs(x2) >= T - 1e-12;
        for (int i = 0; i < grid.n1; ++i) {
            const int p = grid.index(i, j);
            const double v = medium[static_cast<std::size_t>(p)];
            if (!(v > 0.0)) throw InvalidScenarioError("medium must be strictly positive");
            if (outside && std::abs(v - background(i)) > 1e-12) {
                std::ostringstream os;
                os << "contrast outside |x2|<T at node (" << grid.x1(i) << "," << x2 << ")";
                throw InvalidScenarioError(os.str());
            }
            if (is_conductor(p) && (outside || std::abs(x2) >= T - 1e-12))
                throw InvalidScenarioError("conductor nodes must lie in |x2|<T");
        }
    }

    if (geometry == Geometry::grating_case1 && has_conductors()) {
        // complement of the conductors must stay connected
        std::vector<unsigned char> seen(static_cast<std::size_t>(grid.size()), 0);
        std::queue<int> q;
        q.push(grid.index(0, 0));
        seen[static_cast<std::size_t>(grid.index(0, 0))] = 1;
        int reached = 1;
        while (!q.empty()) {
            const int p = q.front();
            q.pop();
            const int i = p % grid.n1, j = p / grid.n1;
            const int nb[4][2] = {{(i + 1) % grid.n1, j}, {(i + grid.n1 - 1) % grid.n1, j}, {i, j + 1}, {i, j - 1}};
            for (const auto& n : nb) {
                if (n[1] < 0 || n[1] >= grid.n2) continue;
                const int r = grid.index(n[0], n[1]);
                if (seen[static_cast<std::size_t>(r)] || is_conductor(r)) continue;
                seen[static_cast<std::size_t>(r)] = 1;
                ++reached;
                q.push(r);
            }
        }
        const int open = grid.size() - static_cast<int>(std::count_if(conductor.begin(), conductor.end(),
                                                                        [](unsigned char c) { return c != 0; }));
        if (reached != open) throw InvalidScenarioError("case 1 requires a connected complement of the conductors");
    }
}

Scenario make_grating(Geometry geometry, Polarization pol, double alpha, double T, double T_prime, GridSpec spec,
                      const MediumFn& eps, const MaskFn& conductor, double R) {
    if (geometry == Geometry::waveguide) throw std::invalid_argument("make_grating: use make_waveguide");
    const bool case2 = geometry == Geometry::grating_case2;
    check_rows(T, T_prime, spec.h2, R, case2);
    if (case2 && R < 0.0) throw InvalidScenarioError("case 2 needs a wall depth R >= 0");
    if (spec.n1 < 4) throw InvalidScenarioError("need at least four x1 nodes");

    Scenario s;
    s.geometry = geometry;
    s.polarization = pol;
    s.alpha = alpha;
    s.T = T;
    s.T_prime = T_prime;
    s.R = case2 ? R : 0.0;
    s.B = 2.0 * M_PI;
    s.grid.geometry = geometry;
    s.grid.n1 = spec.n1;
    s.grid.h1 = 2.0 * M_PI / spec.n1;
    s.grid.h2 = spec.h2;
    s.grid.x2_min = case2 ? -R : -T_prime;
    s.grid.n2 = static_cast<int>(std::lround((T_prime - s.grid.x2_min) / spec.h2)) + 1;
    s.grid.width = 2.0 * M_PI;
    s.grid.alpha = alpha;

    s.medium.resize(static_cast<std::size_t>(s.grid.size()));
    if (conductor) s.conductor.assign(static_cast<std::size_t>(s.grid.size()), 0);
    for (int j = 0; j < s.grid.n2; ++j)
        for (int i = 0; i < s.grid.n1; ++i) {
            const int p = s.grid.index(i, j);
            const double x1 = s.grid.x1(i), x2 = s.grid.x2(j);
            s.medium[static_cast<std::size_t>(p)] = eps ? eps(x1, x2) : 1.0;
            if (conductor && conductor(x1, x2)) s.conductor[static_cast<std::size_t>(p)] = 1;
        }
    s.validate();
    return s;
}

Scenario make_reference_grating(Polarization pol, double alpha, GridSpec spec, double amplitude, double T,
                                double T_prime) {
    return make_grating(Geometry::grating_case1, pol, alpha, T, T_prime, spec, [=](double x1, double x2) {
        return 1.0 + amplitude * smooth_bump(x2, T) * (1.0 + 0.3 * std::cos(x1));
    });
}

Scenario make_waveguide(const Profile& c0, double B, double T, double T_prime, GridSpec spec, const MediumFn& c) {
    check_rows(T, T_prime, spec.h2, 0.0, false);
    if (!(B > 0.0)) throw InvalidScenarioError("waveguide width must be positive");
    Scenario s;
    s.geometry = Geometry::waveguide;
    s.polarization = Polarization::acoustic;
    s.alpha = 0.0;
    s.T = T;
    s.T_prime = T_prime;
    s.B = B;
    s.c0 = c0;
    s.grid.geometry = Geometry::waveguide;
    s.grid.n1 = spec.n1;
    s.grid.h1 = B / spec.n1;
    s.grid.h2 = spec.h2;
    s.grid.x2_min = -T_prime;
    s.grid.n2 = static_cast<int>(std::lround(2.0 * T_prime / spec.h2)) + 1;
    s.grid.width = B;
    s.medium.resize(static_cast<std::size_t>(s.grid.size()));
    for (int j = 0; j < s.grid.n2; ++j)
        for (int i = 0; i < s.grid.n1; ++i) {
            const double x1 = s.grid.x1(i), x2 = s.grid.x2(j);
            s.medium[static_cast<std::size_t>(s.grid.index(i, j))] = c ? c(x1, x2) : c0(x1);
        }
    s.validate();
    return s;
}

}  // namespace modescatter
