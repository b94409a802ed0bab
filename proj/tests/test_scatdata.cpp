#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "modescatter/errors.hpp"
#include "modescatter/io.hpp"
#include "modescatter/scatdata.hpp"

using namespace modescatter;

namespace {

Scenario empty_grating(double alpha) {
    return make_grating(Geometry::grating_case1, Polarization::TE, alpha, 1.0, 3.0, {32, 0.05},
                        [](double, double) { return 1.0; });
}

}  // namespace

TEST_CASE("empty strip has zero amplitudes and exact flux") {
    const Scenario s = empty_grating(0.2);
    const ScatteringDataset ds = build_dataset(s, {-1, 0}, {1.4}, 6);
    for (const auto& [key, e] : ds.reflected) CHECK(std::abs(e.value) < 1e-10);
    CHECK(flux_balance(ds, 0, 1.4, s) < 1e-10);
    CHECK(ds.incident_indices(1.4) == std::vector<int>{-1, 0});
}

TEST_CASE("flux balance and reciprocity of a dielectric grating") {
    const Scenario s = make_reference_grating(Polarization::TE, 0.0, {64, 0.025});
    const double k = 1.5;
    const ScatteringDataset ds = build_dataset(s, {-1, 0, 1}, {k}, 9);
    for (int n : {-1, 0, 1}) CHECK(flux_balance(ds, n, k, s) < 1e-3);
    const SMatrix S = flux_normalized_reflection(ds, k, s);
    CHECK(S.modes.size() == 3);
    CHECK(reciprocity_defect(S) < 1e-2);
    // the total scattered energy cannot exceed the incident energy
    for (int q = 0; q < 3; ++q) CHECK(S.S.col(q).norm() <= 1.0 + 1e-3);
}

TEST_CASE("missing incident waves are reported") {
    const Scenario s = make_reference_grating(Polarization::TE, 0.0, {32, 0.05});
    const ScatteringDataset ds = build_dataset(s, {0}, {1.5}, 6);
    CHECK_THROWS_AS(flux_normalized_reflection(ds, 1.5, s), IncompleteDataError);
    CHECK_THROWS_AS(ds.a(1, 0, 1.5), IncompleteDataError);
}

TEST_CASE("evanescent amplitudes decay away from the strip") {
    const Scenario s = make_reference_grating(Polarization::TE, 0.1, {32, 0.05});
    const FieldSolution u = solve_distorted_wave(s, 0, 1.3);
    const auto a1 = extract_grating_amplitudes_at(u, 4, 1.5), a2 = extract_grating_amplitudes_at(u, 4, 2.5);
    // amplitudes are normalized to the strip top, so they agree between heights
    for (std::size_t q = 0; q < a1.size(); ++q) CHECK(std::abs(a1[q].value - a2[q].value) < 1e-6 + 1e-4 * std::abs(a1[q].value));
}

TEST_CASE("trace identity with a smooth cutoff") {
    const Scenario s = make_reference_grating(Polarization::TE, 0.1, {64, 0.025});
    LineSource f;
    for (int i = 0; i < s.grid.n1; ++i)
        f.f.push_back(std::exp(cd(0.0, 0.1 * s.grid.x1(i))) * (1.0 + 0.5 * std::cos(s.grid.x1(i))));
    const Lemma1Terms t = lemma1_terms(s, f, 0, 1.6, {1.0, 1.0});
    CHECK(t.residual < 1e-3);
    CHECK(std::abs(t.lhs) > 0.0);
}

TEST_CASE("dataset JSON round trip") {
    const Scenario s = make_reference_grating(Polarization::TE, 0.0, {32, 0.05});
    const ScatteringDataset ds = build_dataset(s, {0}, {1.5, 2.5}, 5);
    const ScatteringDataset back = dataset_from_json(json::parse(dataset_to_json(ds).dump()));
    REQUIRE(back.reflected.size() == ds.reflected.size());
    for (const auto& [key, e] : ds.reflected) CHECK(back.reflected.at(key).value == e.value);
    CHECK(back.transmitted.size() == ds.transmitted.size());
}
