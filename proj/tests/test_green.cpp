#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "modescatter/errors.hpp"
#include "modescatter/green.hpp"

using namespace modescatter;

namespace {

constexpr cd I(0.0, 1.0);

Grid strip(int n1, double h2, double half, double alpha) {
    Grid g;
    g.geometry = Geometry::grating_case1;
    g.n1 = n1;
    g.h1 = 2.0 * M_PI / n1;
    g.width = 2.0 * M_PI;
    g.alpha = alpha;
    g.h2 = h2;
    g.x2_min = -half;
    g.n2 = static_cast<int>(std::lround(2.0 * half / h2)) + 1;
    return g;
}

double profile(double x) { return std::exp(-4.0 * x * x); }

// 1-D outgoing solution of -u'' - lam^2 u = g by fine trapezoid quadrature
cd reference(double x, cd lam) {
    const int n = 40000;
    const double a = -3.0, b = 3.0, h = (b - a) / n;
    cd s = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double y = a + i * h;
        const double w = (i == 0 || i == n) ? 0.5 : 1.0;
        s += w * std::exp(I * lam * std::abs(x - y)) * profile(y);
    }
    return I / (2.0 * lam) * s * h;
}

}  // namespace

TEST_CASE("grating Green operator matches the one-mode closed form") {
    const double alpha = 0.2, k = 1.7;
    const Grid g = strip(16, 0.01, 3.0, alpha);
    for (int m : {0, 2}) {  // propagating and evanescent
        Field f(g);
        for (int j = 0; j < g.n2; ++j)
            for (int i = 0; i < g.n1; ++i) f(i, j) = std::exp(I * (m + alpha) * g.x1(i)) * profile(g.x2(j));
        GreenApplication app;
        app.k = k;
        app.mode_cutoff = 7;
        const GreenResult r = grating_green_apply(f, app);
        const cd lam = lambda_branch(k, m, alpha);
        for (double x : {-1.0, 0.0, 0.5, 2.0}) {
            const int j = g.row_of(x);
            const cd want = reference(x, lam);
            for (int i : {0, 5}) CHECK(std::abs(r.u(i, j) - want * std::exp(I * (m + alpha) * g.x1(i))) < 1e-4 * std::abs(want) + 1e-9);
        }
        CHECK(r.truncation_bound < 1.0);
        CHECK(r.delta > 0.0);
    }
}

TEST_CASE("incoming Green operator is the conjugate construction") {
    const Grid g = strip(8, 0.05, 2.0, 0.0);
    Field f(g);
    for (int j = 0; j < g.n2; ++j)
        for (int i = 0; i < g.n1; ++i) f(i, j) = cd(profile(g.x2(j)) * std::cos(g.x1(i)), 0.3 * profile(g.x2(j) - 0.5));
    Field fc = f;
    for (auto& v : fc.values) v = std::conj(v);
    GreenApplication out, in;
    out.k = in.k = 1.3;
    out.mode_cutoff = in.mode_cutoff = 3;
    in.branch = Branch::incoming;
    const Field a = grating_green_apply(f, in).u, b = grating_green_apply(fc, out).u;
    for (std::size_t p = 0; p < a.values.size(); ++p) CHECK(std::abs(a.values[p] - std::conj(b.values[p])) < 1e-12);
}

TEST_CASE("green operator refuses bad cutoffs and thresholds") {
    const Grid g = strip(8, 0.05, 1.0, 0.0);
    Field f(g);
    GreenApplication app;
    app.k = 1.3;
    app.mode_cutoff = 5;
    CHECK_THROWS_AS(grating_green_apply(f, app), ModeCutoffError);
    app.mode_cutoff = 3;
    app.k = 1.0;
    CHECK_THROWS_AS(grating_green_apply(f, app), ThresholdError);
}

TEST_CASE("waveguide Green operator in a constant guide") {
    const double k = 4.0, B = 1.0;
    const int n1 = 40;
    Grid g;
    g.geometry = Geometry::waveguide;
    g.n1 = n1;
    g.h1 = B / n1;
    g.width = B;
    g.h2 = 0.01;
    g.x2_min = -3.0;
    g.n2 = 601;
    const ModalBasis basis = sl_eigensystem(Profile::constant(1.0), B, k, 6, n1);
    Field f(g);
    const auto& phi = basis.modes[0].phi;
    for (int j = 0; j < g.n2; ++j)
        for (int i = 0; i < n1; ++i) f(i, j) = phi[static_cast<std::size_t>(i)] * profile(g.x2(j));
    GreenApplication app;
    app.geometry = Geometry::waveguide;
    app.k = k;
    app.mode_cutoff = 6;
    const GreenResult r = waveguide_green_apply(f, app, basis);
    const cd lam = std::sqrt(cd(basis.modes[0].mu));
    for (double x : {-1.0, 0.0, 1.5}) {
        const cd want = reference(x, lam);
        CHECK(std::abs(r.u(7, g.row_of(x)) - want * phi[7]) < 5e-4 * std::abs(want * phi[7]));
    }
    const ModalBasis other = sl_eigensystem(Profile::constant(1.0), B, 4.5, 6, n1);
    CHECK_THROWS_AS(waveguide_green_apply(f, app, other), BasisMismatchError);
}
