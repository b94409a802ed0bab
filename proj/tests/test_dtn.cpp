#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "modescatter/dtn.hpp"
#include "modescatter/errors.hpp"

using namespace modescatter;

namespace {

constexpr cd I(0.0, 1.0);

Scenario empty_grating(double alpha, GridSpec g) {
    return make_grating(Geometry::grating_case1, Polarization::TE, alpha, 1.0, 3.0, g,
                        [](double, double) { return 1.0; });
}

}  // namespace

TEST_CASE("one-sided derivative is exact for quadratics") {
    const double h = 0.1;
    auto q = [](double x) { return cd(1.0 + 2.0 * x - 3.0 * x * x, x * x); };
    const auto d = one_sided_derivative({q(1.0)}, {q(1.0 - h)}, {q(1.0 - 2 * h)}, h);
    CHECK(std::abs(d[0] - cd(2.0 - 6.0, 2.0)) < 1e-12);
}

TEST_CASE("free-space DtN map is diagonal with the stencil symbol") {
    const Scenario s = empty_grating(0.2, {32, 0.05});
    const double k = 1.4;
    const DtNMatrix d = dtn_direct(s, k, 3);
    const Exterior ext = make_exterior(s, k);
    const double h = s.grid.h2;
    for (std::size_t p = 0; p < d.basis.size(); ++p) {
        const int q = ext.column_of(d.basis[p]);
        const cd rho = std::exp(I * ext.lambda[static_cast<std::size_t>(q)] * h);
        const cd want = (3.0 - 4.0 * rho + rho * rho) / (2.0 * h);
        for (std::size_t r = 0; r < d.basis.size(); ++r)
            CHECK(std::abs(d.entries(static_cast<int>(r), static_cast<int>(p)) - (r == p ? want : cd(0.0))) < 1e-9);
        const double z = k * k - std::pow(d.basis[p] + 0.2, 2);
        if (z < 0.0) CHECK(want.real() > 0.0);  // evanescent: +|lambda|
        else CHECK(std::abs(want - (-I * std::sqrt(z))) < 0.05);
    }
}

TEST_CASE("DtN map from distorted waves matches the direct map") {
    const Scenario s = make_reference_grating(Polarization::TE, 0.0, {32, 0.05});
    const double k = 1.5;
    const DtNMatrix direct = dtn_direct(s, k, 4);
    CHECK(dtn_symmetry_defect(direct) < 1e-3);
    std::vector<int> ns;
    for (int n = -7; n <= 7; ++n) ns.push_back(n);
    const ScatteringDataset ds = build_dataset(s, ns, {k}, 15, true);
    FromModesOptions o;
    o.n_span = 7;
    const DtNMatrix rec = dtn_from_modes(ds, make_exterior_model(s, k), 4, o);
    CHECK((rec.entries - direct.entries).norm() / direct.entries.norm() < 1e-3);
    o.n_span = 1;
    CHECK_THROWS_AS(dtn_from_modes(ds, make_exterior_model(s, k), 4, o), IllConditionedSpanError);
}

TEST_CASE("time-domain checks") {
    const Scenario s = empty_grating(0.0, {16, 0.1});
    TimeTraceSet g;
    g.dt = 1.0;
    for (int i = 0; i < s.grid.n1; ++i) g.x1.push_back(s.grid.x1(i));
    g.values = Eigen::MatrixXcd::Zero(50, s.grid.n1);
    CHECK_THROWS_AS(timedomain_reference(s, g), CFLViolationError);
    CHECK(relative_l2(g, g) == 0.0);

    g.dt = 0.05;
    for (int n = 0; n < g.nt(); ++n) g.values.row(n).setConstant(std::exp(-std::pow(n * g.dt - 1.0, 2)));
    std::vector<DtNMatrix> narrow;
    for (double k : synthesis_frequencies(g, -0.5, 0.5, 8)) {
        try {
            narrow.push_back(dtn_direct(s, k, 1));
        } catch (const ThresholdError&) {
        }
    }
    CHECK_THROWS_AS(dtn_time_synthesis(narrow, g), BandCoverageError);
    const auto w = synthesis_frequencies(g, -1.0, 1.0, 8);
    CHECK(w.size() > 2);
    CHECK(w[1] - w[0] == doctest::Approx(2.0 * M_PI / (8 * g.nt() * g.dt)));
}
