#include "modescatter/io.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "modescatter/errors.hpp"

namespace modescatter {

namespace {

template <class T>
T get(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("field '") + key + "': " + e.what());
    }
}

template <class T>
T need(const json& j, const char* key) {
    if (!j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
    return get<T>(j, key, T{});
}

Profile profile_from_json(const json& j, double B) {
    if (j.is_number()) return Profile::constant(j.get<double>());
    if (j.is_array()) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& p : j) pts.push_back({need<double>(p, "x"), need<double>(p, "value")});
        return Profile::sampled(std::move(pts));
    }
    const std::string kind = get<std::string>(j, "kind", "constant");
    if (kind == "constant") return Profile::constant(get<double>(j, "value", 1.0));
    if (kind == "sine-perturbed" || kind == "sine_perturbed")
        return Profile::sine_perturbed(get<double>(j, "value", 1.0), need<double>(j, "amplitude"),
                                       get<double>(j, "width", B));
    if (kind == "sampled") return profile_from_json(need<json>(j, "points"), B);
    throw ParseError("unknown c0 profile kind '" + kind + "'");
}

json profile_to_json(const Profile& p) {
    switch (p.kind()) {
        case Profile::Kind::constant: return {{"kind", "constant"}, {"value", p.value()}};
        case Profile::Kind::sine_perturbed:
            return {{"kind", "sine-perturbed"}, {"value", p.value()}, {"amplitude", p.amplitude()}, {"width", p.width()}};
        case Profile::Kind::sampled: {
            json pts = json::array();
            for (const auto& [x, v] : p.points()) pts.push_back({{"x", x}, {"value", v}});
            return {{"kind", "sampled"}, {"points", pts}};
        }
    }
    return {};
}

MaskFn conductor_mask(const json& list) {
    struct Shape {
        bool disk;
        double a, b, c, d;
    };
    std::vector<Shape> shapes;
    for (const auto& c : list) {
        const std::string shape = need<std::string>(c, "shape");
        if (shape == "disk") {
            shapes.push_back({true, need<double>(c, "x1"), need<double>(c, "x2"), need<double>(c, "r"), 0.0});
        } else if (shape == "rect") {
            const auto x1 = need<std::vector<double>>(c, "x1"), x2 = need<std::vector<double>>(c, "x2");
            if (x1.size() != 2 || x2.size() != 2) throw ParseError("rect conductor needs [lo, hi] ranges");
            shapes.push_back({false, x1[0], x1[1], x2[0], x2[1]});
        } else {
            throw ParseError("unknown conductor shape '" + shape + "'");
        }
    }
    if (shapes.empty()) return {};
    return [shapes](double x1, double x2) {
        for (const auto& s : shapes) {
            if (s.disk && std::hypot(x1 - s.a, x2 - s.b) < s.c) return true;
            if (!s.disk && x1 >= s.a && x1 <= s.b && x2 >= s.c && x2 <= s.d) return true;
        }
        return false;
    };
}

// x2 profile b(x2) times (1 + lateral cos(mode x1)) modulation shared by the analytic media
double modulated_bump(const json& m, double x1, double x2, double T, double period) {
    const double lateral = get<double>(m, "lateral", 0.3);
    const double mode = get<double>(m, "lateral_mode", 1.0);
    return smooth_bump(x2, T) * (1.0 + lateral * std::cos(2.0 * M_PI * mode * x1 / period));
}

std::vector<double> sampled_values(const json& m, int n1, int n2) {
    const auto v = need<std::vector<double>>(m, "values");
    if (get<int>(m, "nx1", n1) != n1 || get<int>(m, "nx2", n2) != n2 || static_cast<int>(v.size()) != n1 * n2) {
        std::ostringstream os;
        os << "sampled medium has " << v.size() << " values; the grid needs nx1*nx2 = " << n1 << "*" << n2;
        throw ParseError(os.str());
    }
    return v;
}

}  // namespace

Scenario scenario_from_json(const json& j, double scale) {
    if (!j.is_object()) throw ParseError("scenario must be a JSON object");
    if (!(scale > 0.0)) throw InvalidScenarioError("resolution scale must be positive");
    const Geometry geom = [&] {
        try {
            return geometry_from_string(get<std::string>(j, "geometry", "grating_case1"));
        } catch (const std::invalid_argument& e) {
            throw ParseError(e.what());
        }
    }();
    const json grid = get<json>(j, "grid", json::object());
    GridSpec spec;
    spec.n1 = static_cast<int>(std::lround(get<int>(grid, "nx1", 64) * scale));
    spec.h2 = get<double>(grid, "h", 0.025) / scale;
    const double T = get<double>(j, "T", 1.0);
    const double Tp = get<double>(j, "Tprime", T + 2.0);
    const json medium = get<json>(j, "medium", json{{"kind", "uniform"}});
    const std::string kind = get<std::string>(medium, "kind", "uniform");
    if (kind == "sampled" && scale != 1.0) throw InvalidScenarioError("sampled media cannot be resampled by --resolution-scale");
    std::string label = get<std::string>(j, "label", "");

    Scenario s;
    if (geom == Geometry::waveguide) {
        const double B = need<double>(j, "B");
        const Profile c0 = profile_from_json(get<json>(j, "c0", json{{"kind", "constant"}, {"value", 1.0}}), B);
        const double amp = get<double>(medium, "amplitude", 0.0);
        if (kind == "uniform") {
            s = make_waveguide(c0, B, T, Tp, spec, [&](double x1, double) { return c0(x1); });
        } else if (kind == "bump") {
            s = make_waveguide(c0, B, T, Tp, spec, [&](double x1, double x2) {
                const double b = smooth_bump(x2, T) * std::sin(M_PI * get<double>(medium, "lateral_mode", 1.0) * x1 / B);
                return c0(x1) * (1.0 + amp * b);
            });
        } else if (kind == "sampled") {
            s = make_waveguide(c0, B, T, Tp, spec, [&](double x1, double) { return c0(x1); });
            s.medium = sampled_values(medium, s.grid.n1, s.grid.n2);
            s.validate();
        } else {
            throw ParseError("unknown waveguide medium kind '" + kind + "'");
        }
    } else {
        Polarization pol;
        try {
            pol = polarization_from_string(get<std::string>(j, "polarization", "TE"));
        } catch (const std::invalid_argument& e) {
            throw ParseError(e.what());
        }
        const double alpha = get<double>(j, "alpha", 0.0);
        const double R = get<double>(j, "R", 0.0);
        const MaskFn mask = j.contains("conductors") ? conductor_mask(j.at("conductors")) : MaskFn{};
        const double amp = get<double>(medium, "amplitude", 0.5);
        if (kind == "embedded_eigen") {
            if (geom != Geometry::grating_case1 || pol != Polarization::TE)
                throw InvalidScenarioError("embedded_eigen media are case 1 TE gratings");
            const double depth = get<double>(medium, "depth", 2.0);
            const int m = get<int>(medium, "m", 1);
            const Potential V = [depth, T](double x2) { return -depth * std::pow(1.0 / std::cosh(x2), 2) * smooth_bump(x2, T); };
            double E;
            if (medium.contains("E")) {
                E = medium.at("E").get<double>();
            } else {
                Grid line;
                line.n1 = 1;
                line.h2 = spec.h2;
                line.x2_min = -Tp - 10.0;
                line.n2 = static_cast<int>(std::lround(2.0 * (Tp + 10.0) / spec.h2)) + 1;
                E = schrodinger_spectrum(V, line, 1).front().energy;
            }
            s = embedded_eigen_scenario(V, E, m, alpha, T, Tp, spec);
        } else {
            MediumFn eps;
            if (kind == "uniform") {
                eps = [](double, double) { return 1.0; };
            } else if (kind == "reference" || kind == "bump") {
                eps = [&](double x1, double x2) { return 1.0 + amp * modulated_bump(medium, x1, x2, T, 2.0 * M_PI); };
            } else if (kind != "sampled") {
                throw ParseError("unknown grating medium kind '" + kind + "'");
            }
            s = make_grating(geom, pol, alpha, T, Tp, spec, eps ? eps : MediumFn([](double, double) { return 1.0; }), mask, R);
            if (kind == "sampled") {
                s.medium = sampled_values(medium, s.grid.n1, s.grid.n2);
                if (medium.contains("conductor")) {
                    const auto c = need<std::vector<int>>(medium, "conductor");
                    if (static_cast<int>(c.size()) != s.grid.size()) throw ParseError("conductor mask size mismatch");
                    s.conductor.assign(c.begin(), c.end());
                }
                s.validate();
            }
        }
    }
    if (!label.empty()) s.label = label;
    return s;
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("'" + path.string() + "': " + e.what());
    }
}

Scenario load_scenario(const std::filesystem::path& path, double scale) {
    return scenario_from_json(read_json(path), scale);
}

json scenario_to_json(const Scenario& s) {
    json j;
    j["geometry"] = to_string(s.geometry);
    j["polarization"] = to_string(s.polarization);
    j["alpha"] = s.alpha;
    j["T"] = s.T;
    j["Tprime"] = s.T_prime;
    if (s.geometry == Geometry::grating_case2) j["R"] = s.R;
    if (s.geometry == Geometry::waveguide) {
        j["B"] = s.B;
        j["c0"] = profile_to_json(s.c0);
    }
    if (!s.label.empty()) j["label"] = s.label;
    if (s.predicted_exceptional_k2) j["predicted_exceptional_k2"] = *s.predicted_exceptional_k2;
    j["grid"] = {{"nx1", s.grid.n1}, {"nx2", s.grid.n2}, {"T", s.T}, {"Tprime", s.T_prime}, {"h", s.grid.h2}};
    json m = {{"kind", "sampled"}, {"nx1", s.grid.n1}, {"nx2", s.grid.n2}, {"values", s.medium}};
    if (s.has_conductors()) m["conductor"] = std::vector<int>(s.conductor.begin(), s.conductor.end());
    j["medium"] = m;
    return j;
}

json field_to_json(const Field& f, double T, double T_prime) {
    json v = json::array();
    for (const cd& z : f.values) v.push_back({z.real(), z.imag()});
    return {{"grid", {{"nx1", f.grid.n1}, {"nx2", f.grid.n2}, {"T", T}, {"Tprime", T_prime}, {"h", f.grid.h2}}},
            {"x2_min", f.grid.x2_min},
            {"values", v}};
}

json dataset_to_json(const ScatteringDataset& ds) {
    json entries = json::array();
    auto emit = [&](const auto& map, const char* side) {
        for (const auto& [key, e] : map)
            entries.push_back({{"side", side},
                               {"n", key.n},
                               {"m", key.m},
                               {"k", key.k},
                               {"re", e.value.real()},
                               {"im", e.value.imag()},
                               {"lambda", {e.lambda.real(), e.lambda.imag()}},
                               {"propagating", e.propagating}});
    };
    emit(ds.reflected, "reflected");
    emit(ds.transmitted, "transmitted");
    return {{"geometry", to_string(ds.geometry)}, {"alpha", ds.alpha}, {"provenance", ds.provenance}, {"entries", entries}};
}

ScatteringDataset dataset_from_json(const json& j) {
    ScatteringDataset ds;
    try {
        ds.geometry = geometry_from_string(get<std::string>(j, "geometry", "grating_case1"));
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what());
    }
    ds.alpha = get<double>(j, "alpha", 0.0);
    ds.provenance = get<std::string>(j, "provenance", "");
    for (const auto& e : need<json>(j, "entries")) {
        ScatteringDataset::Entry en;
        en.value = cd(need<double>(e, "re"), need<double>(e, "im"));
        const auto lam = get<std::vector<double>>(e, "lambda", {0.0, 0.0});
        if (lam.size() != 2) throw ParseError("lambda must be an [re, im] pair");
        en.lambda = cd(lam[0], lam[1]);
        en.propagating = get<bool>(e, "propagating", false);
        const ScatteringDataset::Key key{need<int>(e, "n"), need<int>(e, "m"), need<double>(e, "k")};
        (get<std::string>(e, "side", "reflected") == "transmitted" ? ds.transmitted : ds.reflected)[key] = en;
    }
    return ds;
}

std::string dataset_to_csv(const ScatteringDataset& ds) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "side,n,m,k,re,im,abs,propagating\n";
    auto emit = [&](const auto& map, const char* side) {
        for (const auto& [key, e] : map)
            os << side << ',' << key.n << ',' << key.m << ',' << key.k << ',' << e.value.real() << ',' << e.value.imag()
               << ',' << std::abs(e.value) << ',' << (e.propagating ? 1 : 0) << '\n';
    };
    emit(ds.reflected, "reflected");
    emit(ds.transmitted, "transmitted");
    return os.str();
}

json model_to_json(const ContinuationModel& m) {
    auto bary = [](const Barycentric& b) {
        json w = json::array(), f = json::array();
        for (const auto& z : b.weights) w.push_back({z.real(), z.imag()});
        for (const auto& z : b.values) f.push_back({z.real(), z.imag()});
        return json{{"support", b.support}, {"values", f}, {"weights", w}};
    };
    json ex = json::array();
    for (const auto& [a, b] : m.excluded) ex.push_back({a, b});
    return {{"window", {m.window_lo, m.window_hi}},
            {"trust_region", {m.trust_lo(), m.trust_hi()}},
            {"excluded", ex},
            {"degree", m.degree},
            {"samples", m.samples},
            {"holdout_residual", m.holdout_residual},
            {"best", bary(m.best)},
            {"second", bary(m.second)}};
}

json dtn_family_to_json(const std::vector<DtNMatrix>& family) {
    json ks = json::array(), mats = json::array();
    json basis = family.empty() ? json::array() : json(family.front().basis);
    for (const auto& d : family) {
        ks.push_back(d.k);
        json rows = json::array();
        for (int r = 0; r < d.entries.rows(); ++r) {
            json row = json::array();
            for (int c = 0; c < d.entries.cols(); ++c) row.push_back({d.entries(r, c).real(), d.entries(r, c).imag()});
            rows.push_back(row);
        }
        mats.push_back({{"k", d.k}, {"condition", d.condition}, {"span_residual", d.span_residual}, {"entries", rows}});
    }
    return {{"geometry", family.empty() ? "" : to_string(family.front().geometry)},
            {"alpha", family.empty() ? 0.0 : family.front().alpha},
            {"basis", basis},
            {"k", ks},
            {"matrices", mats}};
}

std::string trace_to_csv(const TimeTraceSet& t) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "t,x1,re,im\n";
    for (int n = 0; n < t.nt(); ++n)
        for (std::size_t i = 0; i < t.x1.size(); ++i)
            os << n * t.dt << ',' << t.x1[i] << ',' << t.values(n, static_cast<int>(i)).real() << ','
               << t.values(n, static_cast<int>(i)).imag() << '\n';
    return os.str();
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 digest failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

}  // namespace modescatter
