#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "modescatter/errors.hpp"
#include "modescatter/spectral.hpp"

using namespace modescatter;

TEST_CASE("branch conventions on the real axis") {
    CHECK(branch_sqrt(4.0, 1.0, Branch::outgoing) == cd(2.0, 0.0));
    CHECK(branch_sqrt(4.0, -1.0, Branch::outgoing) == cd(-2.0, 0.0));
    CHECK(branch_sqrt(-4.0, 1.0, Branch::outgoing) == cd(0.0, 2.0));
    CHECK(branch_sqrt(4.0, 1.0, Branch::incoming) == cd(-2.0, 0.0));
    CHECK(branch_sqrt(-4.0, 1.0, Branch::incoming) == cd(0.0, -2.0));
}

TEST_CASE("outgoing branch is the limit from the upper half plane") {
    const double alpha = 0.2;
    for (double k : {0.7, 1.3, -1.3, 2.9}) {
        for (int m = -3; m <= 3; ++m) {
            const cd lim = lambda_branch_complex(cd(k, 1e-10), m, alpha);
            const cd out = lambda_branch(k, m, alpha);
            CHECK(std::abs(lim - out) < 1e-6);
            CHECK(std::abs(out * out - (k * k - (m + alpha) * (m + alpha))) < 1e-12);
        }
    }
}

TEST_CASE("thresholds are refused") {
    CHECK_THROWS_AS(lambda_branch(1.2, 1, 0.2), ThresholdError);
    CHECK_NOTHROW(lambda_branch(1.21, 1, 0.2));
    const ThresholdSet t = grating_thresholds(0.0, 2.5);
    REQUIRE(t.collides(1.0));
    CHECK(t.nearest(1.0)->modes.size() == 2);
    CHECK_FALSE(t.collides(1.5));
}

TEST_CASE("grid-consistent exponents converge to the continuum values") {
    const cd lam(1.7, 0.0), ev(0.0, 2.3);
    const double e1 = std::abs(grid_lambda(lam, 0.02) - lam), e2 = std::abs(grid_lambda(lam, 0.01) - lam);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.02));
    CHECK(std::abs(grid_lambda(ev, 0.01) - ev) < 1e-4);
    CHECK(grating_kappa2(3, 0.25, 0.0) == doctest::Approx(3.25 * 3.25));
    const double h = 2.0 * M_PI / 64;
    CHECK(grating_kappa2(3, 0.25, h) == doctest::Approx(std::pow(2.0 / h * std::sin(3.25 * h / 2.0), 2)));
}

TEST_CASE("default cutoff keeps eight evanescent modes") {
    for (double k : {0.5, 1.5, 4.3}) {
        const int M = grating_default_cutoff(k, 0.1);
        int prop = 0, ev = 0;
        for (const auto& m : grating_modes(k, 0.1, M)) (m.propagating ? prop : ev)++;
        CHECK(ev >= 8);
        for (const auto& m : grating_modes(k, 0.1, M + 5))
            if (m.propagating) CHECK(std::abs(m.m) <= M);
        CHECK(prop > 0);
    }
}

TEST_CASE("constant-speed guide modes") {
    const double k = 5.0;
    const ModalBasis b = sl_eigensystem(Profile::constant(1.0), 1.0, k, 4, 400);
    REQUIRE(b.modes.size() == 4);
    for (int i = 0; i < 4; ++i) {
        const auto& md = b.modes[static_cast<std::size_t>(i)];
        const double exact = k * k - std::pow((i + 0.5) * M_PI, 2);
        CHECK(md.mu == doctest::Approx(exact).epsilon(1e-3));
        CHECK(md.dmu_dk == doctest::Approx(2.0 * k).epsilon(1e-9));
        for (int j = 0; j < 4; ++j)
            CHECK(b.inner(md.phi, b.modes[static_cast<std::size_t>(j)].phi) ==
                  doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9));
    }
    CHECK(b.propagating_count() == 2);
    const auto roots = waveguide_thresholds(Profile::constant(1.0), 1.0, 2, 1.0, 6.0, 400);
    REQUIRE(roots.size() == 1);
    CHECK(roots[0] == doctest::Approx(1.5 * M_PI).epsilon(1e-4));
}

TEST_CASE("modal eigenvalues increase with k") {
    const Profile c0 = Profile::sine_perturbed(1.0, 0.2, 1.0);
    const auto a = sl_eigensystem(c0, 1.0, 3.0, 6, 300), b = sl_eigensystem(c0, 1.0, 3.01, 6, 300);
    for (int i = 0; i < 6; ++i) {
        const auto& ma = a.modes[static_cast<std::size_t>(i)];
        CHECK(b.modes[static_cast<std::size_t>(i)].mu > ma.mu);
        CHECK(ma.dmu_dk > 0.0);
        CHECK((b.modes[static_cast<std::size_t>(i)].mu - ma.mu) / 0.01 == doctest::Approx(ma.dmu_dk).epsilon(1e-2));
    }
}
