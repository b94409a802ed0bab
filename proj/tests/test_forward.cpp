#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "modescatter/errors.hpp"
#include "modescatter/forward.hpp"
#include "modescatter/kernels.hpp"

using namespace modescatter;

namespace {

Scenario empty_grating(double alpha, GridSpec g) {
    return make_grating(Geometry::grating_case1, Polarization::TE, alpha, 1.0, 3.0, g,
                        [](double, double) { return 1.0; });
}

}  // namespace

TEST_CASE("discrete exponents satisfy the three-point dispersion relation") {
    const double h = 0.05;
    for (double z : {2.0, 0.3, -1.5, -40.0}) {
        const cd lam = discrete_lambda(z, h, 1.0);
        const cd rho = std::exp(cd(0.0, 1.0) * lam * h);
        CHECK(std::abs((rho - 2.0 + 1.0 / rho) / (h * h) + z) < 1e-9 * std::max(1.0, std::abs(z)));
        if (z < 0.0) CHECK(std::abs(rho) < 1.0);
    }
    CHECK(discrete_lambda(2.0, h, -1.0).real() < 0.0);
    CHECK_THROWS_AS(discrete_lambda(2000.0, h, 1.0), ThresholdError);
}

TEST_CASE("empty strip does not scatter") {
    const Scenario s = empty_grating(0.2, {32, 0.05});
    for (int n : {-1, 0}) {
        const FieldSolution u = solve_distorted_wave(s, n, 1.4);
        CHECK(u.scattered().max_abs() < 1e-10);
        CHECK(u.incident.max_abs() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("solution satisfies the interior stencil") {
    const Scenario s = make_reference_grating(Polarization::TM, 0.1, {32, 0.05});
    const double k = 1.6;
    const FieldSolution u = solve_distorted_wave(s, 0, k);
    const Field r = apply_operator(s, k, u.total, Exec::serial);
    const int lo = s.grid.row_of(-s.T_prime) + 1, hi = s.grid.row_of(s.T_prime) - 1;
    double worst = 0.0;
    for (int j = lo; j <= hi; ++j)
        for (int i = 0; i < s.grid.n1; ++i) worst = std::max(worst, std::abs(r(i, j)));
    CHECK(worst < 1e-8);
    CHECK(u.condition > 1.0);
}

TEST_CASE("perfect conductor wall reflects the normal wave completely") {
    const Scenario s = make_grating(Geometry::grating_case2, Polarization::TE, 0.0, 1.0, 3.0, {32, 0.05},
                                    [](double, double) { return 1.0; }, {}, 0.5);
    const FieldSolution u = solve_distorted_wave(s, 0, 1.3);
    // above the strip the scattered field is a single reflected plane wave with unit modulus
    const auto row = u.scattered_trace(2.0);
    for (const cd& v : row) CHECK(std::abs(v) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("harmonic well ground state") {
    Grid line;
    line.n1 = 1;
    line.h2 = 0.02;
    line.x2_min = -8.0;
    line.n2 = 801;
    const auto states = schrodinger_spectrum([](double x) { return x * x; }, line, 2);
    REQUIRE(states.size() == 2);
    CHECK(states[0].energy == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(states[1].energy == doctest::Approx(3.0).epsilon(1e-3));
    CHECK(states[0].energy < states[1].energy);
}

TEST_CASE("embedded eigenvalue scenarios need a bound state at the given energy") {
    auto V = [](double x) { return -2.0 * std::pow(1.0 / std::cosh(x), 2) * smooth_bump(x, 3.0); };
    CHECK_THROWS_AS(embedded_eigen_scenario(V, -0.5, 1, 0.05, 3.0, 7.0, {32, 0.05}), NoBoundStateError);
}

TEST_CASE("condition estimate is finite away from exceptional values") {
    const Scenario s = make_reference_grating(Polarization::TE, 0.0, {32, 0.05});
    const LinearSystem sys = assemble_operator(s, 1.5);
    CHECK(std::isfinite(sys.condition()));
    CHECK(sys.condition() < 1e6);
}
