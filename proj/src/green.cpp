#include "modescatter/green.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "modescatter/errors.hpp"

namespace modescatter {

namespace {

constexpr cd I(0.0, 1.0);

// kernel wavenumber for the requested side from the outgoing value
cd kernel_lambda(cd lam_out, Branch side) { return side == Branch::outgoing ? lam_out : -std::conj(lam_out); }

}  // namespace

GreenResult grating_green_apply(const Field& f, const GreenApplication& app) {
    const Grid& g = f.grid;
    if (!is_grating(g.geometry) || !is_grating(app.geometry)) throw std::invalid_argument("grating_green_apply: grating grid expected");
    const int M = app.mode_cutoff;
    const int n1 = g.n1;
    if (2 * M + 1 > n1) throw ModeCutoffError("mode cutoff exceeds the x1 resolution");
    for (int m = -M - 2 - static_cast<int>(std::abs(app.k)); m <= M + 2 + static_cast<int>(std::abs(app.k)); ++m) {
        const double q = m + g.alpha;
        if (std::abs(m) > M && q * q < app.k * app.k) {
            std::ostringstream os;
            os << "cutoff M=" << M << " drops propagating mode m=" << m;
            throw ModeCutoffError(os.str());
        }
    }

    std::vector<std::vector<cd>> an;
    std::vector<cd> lam, pref;
    std::vector<int> ms;
    for (int m = -M; m <= M; ++m) {
        const cd lo = lambda_branch(app.k, m, g.alpha, Branch::outgoing);
        const cd l = kernel_lambda(lo, app.branch);
        std::vector<cd> a(static_cast<std::size_t>(n1));
        for (int i = 0; i < n1; ++i) a[static_cast<std::size_t>(i)] = std::exp(-I * (m + g.alpha) * g.x1(i)) / double(n1);
        an.push_back(std::move(a));
        lam.push_back(l);
        pref.push_back(I / (2.0 * l));
        ms.push_back(m);
    }
    const auto coeff = project_rows(f, an, app.exec);
    const auto conv = mode_convolve(coeff, lam, pref, g.h2, app.exec);

    GreenResult res;
    res.u = Field(g);
    // deterministic reduction, ascending m
    for (std::size_t q = 0; q < ms.size(); ++q)
        for (int j = 0; j < g.n2; ++j) {
            const cd c = conv[q][static_cast<std::size_t>(j)];
            for (int i = 0; i < n1; ++i) res.u(i, j) += c * std::exp(I * (ms[q] + g.alpha) * g.x1(i));
        }
    const double qa = std::min(std::abs(M + 1 + g.alpha), std::abs(-M - 1 + g.alpha));
    res.delta = std::sqrt(std::max(0.0, qa * qa - app.k * app.k));
    res.truncation_bound = std::exp(-res.delta * g.h2);
    return res;
}

GreenResult waveguide_green_apply(const Field& f, const GreenApplication& app, const ModalBasis& basis) {
    const Grid& g = f.grid;
    if (g.geometry != Geometry::waveguide) throw std::invalid_argument("waveguide_green_apply: waveguide grid expected");
    if (std::abs(basis.k - app.k) > 1e-12 * std::max(1.0, std::abs(app.k)))
        throw BasisMismatchError("basis computed at k=" + std::to_string(basis.k) + ", application at k=" +
                                 std::to_string(app.k));
    if (basis.n != g.n1 || std::abs(basis.B - g.width) > 1e-12)
        throw BasisMismatchError("basis grid does not match the field's x1 grid");
    const int M = app.mode_cutoff;
    if (M < 1 || M > static_cast<int>(basis.modes.size())) throw ModeCutoffError("mode cutoff outside the basis size");
    if (M < basis.propagating_count()) throw ModeCutoffError("mode cutoff below the propagating mode count");

    std::vector<std::vector<cd>> an;
    std::vector<cd> lam, pref;
    for (int q = 0; q < M; ++q) {
        const auto& mode = basis.modes[static_cast<std::size_t>(q)];
        if (std::abs(mode.mu) < kGuardRelative * std::max(1.0, app.k * app.k))
            throw ThresholdError("k is at the threshold of waveguide mode " + std::to_string(mode.m));
        const cd lo = branch_sqrt(mode.mu, app.k, Branch::outgoing);
        const cd l = kernel_lambda(lo, app.branch);
        std::vector<cd> a(static_cast<std::size_t>(g.n1));
        for (int i = 0; i < g.n1; ++i)
            a[static_cast<std::size_t>(i)] = mode.phi[static_cast<std::size_t>(i)] * basis.weights[static_cast<std::size_t>(i)] *
                                             basis.inv_c2[static_cast<std::size_t>(i)];
        an.push_back(std::move(a));
        lam.push_back(l);
        pref.push_back(I / (2.0 * l));
    }
    const auto coeff = project_rows(f, an, app.exec);
    const auto conv = mode_convolve(coeff, lam, pref, g.h2, app.exec);
    GreenResult res;
    res.u = Field(g);
    for (int q = 0; q < M; ++q) {
        const auto& phi = basis.modes[static_cast<std::size_t>(q)].phi;
        for (int j = 0; j < g.n2; ++j) {
            const cd c = conv[static_cast<std::size_t>(q)][static_cast<std::size_t>(j)];
            for (int i = 0; i < g.n1; ++i) res.u(i, j) += c * phi[static_cast<std::size_t>(i)];
        }
    }
    if (M < static_cast<int>(basis.modes.size())) {
        res.delta = std::sqrt(std::max(0.0, -basis.modes[static_cast<std::size_t>(M)].mu));
    } else {
        res.delta = std::numeric_limits<double>::infinity();
    }
    res.truncation_bound = std::exp(-res.delta * g.h2);
    return res;
}

}  // namespace modescatter
