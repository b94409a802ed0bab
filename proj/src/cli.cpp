#include "modescatter/cli.hpp"

#include <unistd.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "modescatter/errors.hpp"
#include "modescatter/kernels.hpp"

namespace fs = std::filesystem;

namespace modescatter {

namespace {

constexpr cd I(0.0, 1.0);

const std::map<std::string, double>& default_tolerances() {
    static const std::map<std::string, double> t = {
        {"flux", 1e-2},         {"reciprocity", 2e-2},       {"lemma1", 2e-2},
        {"dtn", 2e-2},          {"dtn_symmetry", 2e-2},      {"continuation", 5e-2},
        {"time_synthesis", 5e-2}, {"leakage", 1e-3},         {"exceptional_peak", 1e6},
        {"exceptional_offset", 1e-3}, {"exceptional_off_peak", 1e4},
    };
    return t;
}

template <class T>
T opt(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("config field '") + key + "': " + e.what());
    }
}

std::vector<double> parse_k_grid(const json& j) {
    if (j.is_array()) return j.get<std::vector<double>>();
    if (j.is_number()) return {j.get<double>()};
    if (j.is_object()) {
        const double a = opt<double>(j, "start", 0.0), b = opt<double>(j, "stop", 0.0);
        const int n = opt<int>(j, "count", 0);
        if (n < 1) throw ParseError("k-grid 'count' must be positive");
        std::vector<double> ks;
        for (int i = 0; i < n; ++i) ks.push_back(n == 1 ? a : a + i * (b - a) / (n - 1));
        return ks;
    }
    throw ParseError("k must be a number, a list, or {start, stop, count}");
}

int propagating_count_guide(const Scenario& s, double k) {
    return sl_eigensystem(s.c0, s.B, k, s.grid.n1, s.grid.n1).propagating_count();
}

std::vector<int> propagating_modes(const Scenario& s, double k) {
    std::vector<int> out;
    if (is_grating(s.geometry)) {
        for (const auto& m : grating_modes(k, s.alpha, grating_default_cutoff(k, s.alpha)))
            if (m.propagating) out.push_back(m.m);
    } else {
        for (int n = 1; n <= propagating_count_guide(s, k); ++n) out.push_back(n);
    }
    return out;
}

std::string shift_suggestion(double k, const std::function<bool(double)>& collides) {
    std::ostringstream os;
    int found = 0;
    for (double d : {1e-2, 2e-2, 5e-2}) {
        for (double c : {k - d, k + d})
            if (!collides(c)) {
                os << (found++ ? " or " : "") << "k=" << c;
            }
        if (found) break;
    }
    return found ? "; try " + os.str() : "";
}

// continuum and discrete threshold checks for one k
void check_thresholds(const Scenario& s, double k) {
    if (is_grating(s.geometry)) {
        const ThresholdSet set = grating_thresholds(s.alpha, std::abs(k) + 2.0);
        auto collides = [&](double kk) {
            if (set.collides(kk)) return true;
            for (int m = -s.grid.n1 / 2; m < s.grid.n1 / 2; ++m) {
                const double p = m + s.alpha;
                const double z = kk * kk - grating_kappa2(m, s.alpha, s.grid.h1);
                if ((z > 0.0) != (kk * kk > p * p) || std::abs(z) < kGuardRelative * std::max(1.0, kk * kk)) return true;
            }
            return false;
        };
        if (set.collides(k)) {
            const Threshold* t = set.nearest(k);
            std::ostringstream os;
            os << "k=" << k << " lies on the threshold |p+alpha| = " << t->k << " of mode p=";
            for (std::size_t i = 0; i < t->modes.size(); ++i) os << (i ? "," : "") << t->modes[i];
            os << shift_suggestion(k, collides);
            throw ThresholdCollisionError(os.str());
        }
        for (int m = -s.grid.n1 / 2; m < s.grid.n1 / 2; ++m) {
            const double p = m + s.alpha;
            const double z = k * k - grating_kappa2(m, s.alpha, s.grid.h1);
            if ((z > 0.0) != (k * k > p * p) || std::abs(z) < kGuardRelative * std::max(1.0, k * k)) {
                std::ostringstream os;
                os << "k=" << k << " lies between the continuum and grid thresholds of mode p=" << m
                   << " (|p+alpha|=" << std::abs(p) << ", grid " << std::sqrt(grating_kappa2(m, s.alpha, s.grid.h1))
                   << "); refine nx1" << shift_suggestion(k, collides);
                throw ThresholdCollisionError(os.str());
            }
        }
    } else {
        const ThresholdSet set = waveguide_threshold_set(s.c0, s.B, std::abs(k) + 1.0, s.grid.n1);
        if (set.collides(k)) {
            const Threshold* t = set.nearest(k);
            std::ostringstream os;
            os << "k=" << k << " lies on the threshold " << t->k << " of guide mode p=" << t->modes.front()
               << shift_suggestion(k, [&](double kk) { return set.collides(kk); });
            throw ThresholdCollisionError(os.str());
        }
    }
}

// deterministic parallel loop: results are indexed, the lowest failing index wins
template <class F>
void parallel_for(int n, F&& f) {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 1)
    for (int i = 0; i < n; ++i) {
        try {
            f(i);
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

struct Audits {
    json list = json::array();
    bool ok = true;

    void at_most(const std::string& name, double value, double tol) { add(name, value, tol, "<=", value <= tol); }
    void below(const std::string& name, double value, double tol) { add(name, value, tol, "<", value < tol); }
    void at_least(const std::string& name, double value, double tol) { add(name, value, tol, ">=", value >= tol); }

private:
    void add(const std::string& name, double value, double tol, const char* rel, bool pass) {
        if (!std::isfinite(value)) pass = false;
        ok = ok && pass;
        list.push_back({{"name", name}, {"value", value}, {"relation", rel}, {"tolerance", tol}, {"pass", pass}});
    }
};

struct Output {
    std::map<std::string, std::string> files;
    void put(const std::string& name, std::string content) { files[name] = std::move(content); }
    void put_json(const std::string& name, const json& j) { put(name, j.dump(2) + "\n"); }
};

std::vector<int> incident_for(const ExperimentConfig& cfg, double k) {
    return cfg.incident.empty() ? propagating_modes(cfg.scenario, k) : cfg.incident;
}

ScatteringDataset sweep(const ExperimentConfig& cfg, const std::vector<double>& ks, int M, bool generalized,
                        const std::function<std::vector<int>(double)>& incident) {
    std::vector<ScatteringDataset> parts(ks.size());
    parallel_for(static_cast<int>(ks.size()), [&](int i) {
        const double k = ks[static_cast<std::size_t>(i)];
        parts[static_cast<std::size_t>(i)] = build_dataset(cfg.scenario, incident(k), {k}, M, generalized);
    });
    ScatteringDataset ds;
    ds.geometry = cfg.scenario.geometry;
    ds.alpha = cfg.scenario.alpha;
    for (auto& p : parts) {
        if (ds.provenance.empty()) ds.provenance = p.provenance;
        ds.reflected.insert(p.reflected.begin(), p.reflected.end());
        ds.transmitted.insert(p.transmitted.begin(), p.transmitted.end());
    }
    return ds;
}

std::string amplitude_plot(const std::string& csv) {
    return "set datafile separator ','\n"
           "set key outside\n"
           "set xlabel 'k'\n"
           "set ylabel '|a_m(n,k)|'\n"
           "plot '" + csv + "' using 4:(strcol(1) eq 'reflected' && $8 == 1 ? $7 : 1/0) with points pt 7 title 'propagating reflected'\n";
}

// -- pipelines ---------------------------------------------------------------

void run_sweep(const ExperimentConfig& cfg, Output& out, json& metrics, Audits& audits, bool audit_reciprocity) {
    const Scenario& s = cfg.scenario;
    const ScatteringDataset ds = sweep(cfg, cfg.ks, cfg.M, false, [&](double k) { return incident_for(cfg, k); });
    json per_k = json::array();
    double worst = 0.0, worst_rec = 0.0;
    bool have_rec = false;
    for (double k : cfg.ks) {
        json flux = json::object();
        for (int n : incident_for(cfg, k)) {
            const double r = flux_balance(ds, n, k, s);
            flux[std::to_string(n)] = r;
            worst = std::max(worst, r);
        }
        json entry = {{"k", k}, {"flux_residual", flux}};
        if (audit_reciprocity && is_grating(s.geometry) && s.alpha == 0.0 && cfg.incident.empty()) {
            const double rec = reciprocity_defect(flux_normalized_reflection(ds, k, s));
            entry["reciprocity_defect"] = rec;
            worst_rec = std::max(worst_rec, rec);
            have_rec = true;
        }
        per_k.push_back(entry);
    }
    metrics["per_k"] = per_k;
    metrics["max_flux_residual"] = worst;
    audits.at_most("flux_residual", worst, cfg.tolerance("flux"));
    if (have_rec) {
        metrics["max_reciprocity_defect"] = worst_rec;
        audits.at_most("reciprocity", worst_rec, cfg.tolerance("reciprocity"));
    }
    out.put_json("dataset.json", dataset_to_json(ds));
    out.put("dataset.csv", dataset_to_csv(ds));
    out.put("amplitudes.gp", amplitude_plot("dataset.csv"));
    if (cfg.scenario_json.value("dump_fields", false) && !cfg.ks.empty()) {
        const double k = cfg.ks.front();
        const int n = incident_for(cfg, k).front();
        const FieldSolution u = solve_distorted_wave(s, n, k);
        out.put_json("field_total.json", field_to_json(u.total, s.T, s.T_prime));
    }
}

LineSource seeded_source(const Grid& g, double alpha, std::uint64_t seed, std::size_t ik, int m) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(ik), static_cast<std::uint32_t>(m + 100000)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> nd;
    LineSource f;
    f.f.assign(static_cast<std::size_t>(g.n1), 0.0);
    for (int p = -3; p <= 3; ++p) {
        const double re = nd(rng), im = nd(rng);
        const cd c = cd(re, im) / (1.0 + p * p);
        for (int i = 0; i < g.n1; ++i) f.f[static_cast<std::size_t>(i)] += c * std::exp(I * (p + alpha) * g.x1(i));
    }
    return f;
}

void run_lemma1(const ExperimentConfig& cfg, Output& out, json& metrics, Audits& audits) {
    const Scenario& s = cfg.scenario;
    if (!is_grating(s.geometry)) throw InvalidScenarioError("lemma1_audit needs a grating scenario");
    const double width = cfg.scenario_json.value("cutoff_width", 1.0);
    std::vector<json> rows(cfg.ks.size());
    std::vector<double> worst(cfg.ks.size(), 0.0);
    parallel_for(static_cast<int>(cfg.ks.size()), [&](int i) {
        const double k = cfg.ks[static_cast<std::size_t>(i)];
        json r = json::array();
        for (int m : incident_for(cfg, k)) {
            const LineSource f = seeded_source(s.grid, s.alpha, cfg.seed, static_cast<std::size_t>(i), m);
            const Lemma1Terms t = lemma1_terms(s, f, m, k, {s.T, width});
            r.push_back({{"m", m}, {"lhs", {t.lhs.real(), t.lhs.imag()}}, {"rhs", {t.rhs.real(), t.rhs.imag()}},
                         {"residual", t.residual}});
            worst[static_cast<std::size_t>(i)] = std::max(worst[static_cast<std::size_t>(i)], t.residual);
        }
        rows[static_cast<std::size_t>(i)] = {{"k", k}, {"terms", r}};
    });
    std::ostringstream csv;
    csv.precision(17);
    csv << "k,max_residual\n";
    for (std::size_t i = 0; i < cfg.ks.size(); ++i) csv << cfg.ks[i] << ',' << worst[i] << '\n';
    const double w = cfg.ks.empty() ? 0.0 : *std::max_element(worst.begin(), worst.end());
    metrics["per_k"] = rows;
    metrics["cutoff_width"] = width;
    metrics["max_residual"] = w;
    audits.at_most("lemma1_residual", w, cfg.tolerance("lemma1"));
    out.put("lemma1.csv", csv.str());
    out.put("lemma1.gp",
            "set datafile separator ','\nset logscale y\nset xlabel 'k'\nset ylabel 'relative mismatch'\n"
            "plot 'lemma1.csv' using 1:2 every ::1 with linespoints title 'trace identity residual'\n");
}

void run_dtn_compare(const ExperimentConfig& cfg, Output& out, json& metrics, Audits& audits) {
    const Scenario& s = cfg.scenario;
    const bool grating = is_grating(s.geometry);
    std::vector<int> ns;
    if (grating) {
        for (int n = -cfg.n_span; n <= cfg.n_span; ++n) ns.push_back(n);
    } else {
        for (int n = 1; n <= std::min(cfg.n_span, s.grid.n1); ++n) ns.push_back(n);
    }
    const int M_ext = grating ? std::min(std::max(cfg.M, 24), s.grid.n1 / 2 - 1)
                              : std::min(std::max(cfg.M, cfg.n_span + 8), s.grid.n1);
    std::vector<DtNMatrix> direct(cfg.ks.size()), recon(cfg.ks.size());
    parallel_for(static_cast<int>(cfg.ks.size()), [&](int i) {
        const double k = cfg.ks[static_cast<std::size_t>(i)];
        direct[static_cast<std::size_t>(i)] = dtn_direct(s, k, cfg.basis);
        const ScatteringDataset ds = build_dataset(s, ns, {k}, M_ext, true);
        FromModesOptions o;
        o.n_span = cfg.n_span;
        recon[static_cast<std::size_t>(i)] = dtn_from_modes(ds, make_exterior_model(s, k), cfg.basis, o);
    });
    json per_k = json::array();
    double worst = 0.0, worst_sym = 0.0;
    const bool sym = !grating || s.alpha == 0.0;
    std::ostringstream csv;
    csv.precision(17);
    csv << "k,frobenius_mismatch,symmetry_defect\n";
    for (std::size_t i = 0; i < cfg.ks.size(); ++i) {
        const double rel = (recon[i].entries - direct[i].entries).norm() / direct[i].entries.norm();
        const double sd = sym ? dtn_symmetry_defect(direct[i]) : 0.0;
        worst = std::max(worst, rel);
        worst_sym = std::max(worst_sym, sd);
        double span = 0.0;
        for (double r : recon[i].span_residual) span = std::max(span, r);
        per_k.push_back({{"k", cfg.ks[i]},
                         {"frobenius_mismatch", rel},
                         {"symmetry_defect", sd},
                         {"lower_condition", direct[i].condition},
                         {"max_span_residual", span}});
        csv << cfg.ks[i] << ',' << rel << ',' << sd << '\n';
    }
    metrics["per_k"] = per_k;
    metrics["n_span"] = static_cast<int>(ns.size());
    metrics["amplitude_rows"] = M_ext;
    metrics["max_frobenius_mismatch"] = worst;
    audits.at_most("dtn_mismatch", worst, cfg.tolerance("dtn"));
    if (sym) audits.at_most("dtn_symmetry", worst_sym, cfg.tolerance("dtn_symmetry"));
    out.put_json("dtn_direct.json", dtn_family_to_json(direct));
    out.put_json("dtn_from_modes.json", dtn_family_to_json(recon));
    out.put("dtn_compare.csv", csv.str());
    out.put("dtn_compare.gp",
            "set datafile separator ','\nset logscale y\nset xlabel 'k'\n"
            "plot 'dtn_compare.csv' using 1:2 every ::1 with linespoints title 'Frobenius mismatch', \\\n"
            "     '' using 1:3 every ::1 with linespoints title 'symmetry defect'\n");
}

void run_continuation(const ExperimentConfig& cfg, Output& out, json& metrics, Audits& audits) {
    const Scenario& s = cfg.scenario;
    const int n = cfg.continuation.n, m = cfg.continuation.m;
    const ScatteringDataset ds = sweep(cfg, cfg.ks, std::max(cfg.M, std::abs(m)), false, [&](double) { return std::vector<int>{n}; });
    std::vector<std::pair<double, cd>> samples;
    for (double k : cfg.ks) samples.push_back({k, ds.a(n, m, k)});
    const ContinuationModel model = fit_rational(samples);
    const ContinuedValue cv = evaluate_continuation(model, cfg.continuation.target);
    const FieldSolution u = solve_distorted_wave(s, n, cfg.continuation.target, true);
    cd direct;
    if (is_grating(s.geometry)) {
        direct = extract_grating_amplitudes(u, std::abs(m))[static_cast<std::size_t>(m + std::abs(m))].value;
    } else {
        const ModalBasis b = sl_eigensystem(s.c0, s.B, cfg.continuation.target, m, s.grid.n1);
        direct = extract_waveguide_amplitudes(u, b).back().value;
    }
    const double rel = std::abs(cv.value - direct) / std::abs(direct);
    metrics["target_k"] = cfg.continuation.target;
    metrics["continued"] = {cv.value.real(), cv.value.imag()};
    metrics["direct"] = {direct.real(), direct.imag()};
    metrics["error_estimate"] = cv.error;
    metrics["relative_error"] = rel;
    metrics["holdout_residual"] = model.holdout_residual;
    metrics["degree"] = model.degree;
    audits.at_most("continuation_error", rel, cfg.tolerance("continuation"));
    out.put_json("model.json", model_to_json(model));
    std::ostringstream csv;
    csv.precision(17);
    csv << "k,re,im,fit_re,fit_im\n";
    for (const auto& [k, v] : samples) {
        const cd f = model.best(k);
        csv << k << ',' << v.real() << ',' << v.imag() << ',' << f.real() << ',' << f.imag() << '\n';
    }
    out.put("samples.csv", csv.str());
    out.put("continuation.gp",
            "set datafile separator ','\nset xlabel 'k'\n"
            "plot 'samples.csv' using 1:2 every ::1 with points pt 7 title 'Re a (samples)', \\\n"
            "     '' using 1:4 every ::1 with lines title 'Re a (fit)'\n");
}

void run_time_synthesis(const ExperimentConfig& cfg, Output& out, json& metrics, Audits& audits) {
    const Scenario& s = cfg.scenario;
    if (!is_grating(s.geometry)) throw InvalidScenarioError("time_synthesis needs a grating scenario");
    const TimeSpec& ts = cfg.time;
    TimeTraceSet g;
    g.dt = ts.dt;
    for (int i = 0; i < s.grid.n1; ++i) g.x1.push_back(s.grid.x1(i));
    g.values.resize(ts.steps, s.grid.n1);
    for (int n = 0; n < ts.steps; ++n) {
        const double t = n * ts.dt - ts.t0;
        const double w = std::exp(-t * t / (2.0 * ts.width * ts.width)) * std::cos(ts.k0 * t);
        for (int i = 0; i < s.grid.n1; ++i)
            g.values(n, i) = (1.0 + ts.lateral * std::cos(g.x1[static_cast<std::size_t>(i)])) * w;
    }
    SynthesisOptions so;
    so.pad_factor = ts.pad_factor;
    const auto ks = synthesis_frequencies(g, -ts.band, ts.band, ts.pad_factor);
    std::vector<std::optional<DtNMatrix>> fam(ks.size());
    parallel_for(static_cast<int>(ks.size()), [&](int i) {
        try {
            fam[static_cast<std::size_t>(i)] = dtn_direct(s, ks[static_cast<std::size_t>(i)], ts.basis);
        } catch (const ThresholdError&) {
            // bridged by interpolation
        }
    });
    std::vector<DtNMatrix> family;
    json skipped = json::array();
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (fam[i]) {
            family.push_back(std::move(*fam[i]));
        } else {
            skipped.push_back(ks[i]);
        }
    }
    const SynthesisResult syn = dtn_time_synthesis(family, g, so);
    const TimeTraceSet ref = timedomain_reference(s, g);
    const double rel = relative_l2(syn.output, ref);
    metrics["frequencies"] = static_cast<int>(family.size());
    metrics["skipped_threshold_frequencies"] = skipped;
    metrics["outside_band_energy"] = syn.outside_energy;
    metrics["relative_l2"] = rel;
    metrics["leakage"] = syn.leakage;
    metrics["onset_time"] = syn.onset_time;
    audits.at_most("time_synthesis_mismatch", rel, cfg.tolerance("time_synthesis"));
    audits.at_most("causality_leakage", syn.leakage, cfg.tolerance("leakage"));
    out.put("input.csv", trace_to_csv(g));
    out.put("synthesized.csv", trace_to_csv(syn.output));
    out.put("reference.csv", trace_to_csv(ref));
    out.put_json("dtn_family.json", dtn_family_to_json(family));
    out.put("traces.gp",
            "set datafile separator ','\nset xlabel 't'\nset ylabel 'Re dv/dx2 at x1 = 0'\n"
            "plot 'synthesized.csv' using 1:($2 == 0 ? $3 : 1/0) every ::1 with lines title 'synthesized', \\\n"
            "     'reference.csv' using 1:($2 == 0 ? $3 : 1/0) every ::1 with lines title 'time domain'\n");
}

void run_embedded(const ExperimentConfig& cfg, Output& out, json& metrics, Audits& audits) {
    const Scenario& s = cfg.scenario;
    if (!s.predicted_exceptional_k2) throw InvalidScenarioError("embedded_eigen_probe needs an embedded_eigen medium");
    const double K = *s.predicted_exceptional_k2;
    const ExceptionalProbe probe = locate_exceptional_k2(s, K, cfg.probe_window);
    SolveOptions loud;
    loud.abort_condition = std::numeric_limits<double>::infinity();
    std::vector<double> offsets = {-0.05, 0.05};
    for (int i = -5; i <= 5; ++i) offsets.push_back(0.02 * i);
    std::vector<double> cond(offsets.size());
    parallel_for(static_cast<int>(offsets.size()), [&](int i) {
        const double k2 = probe.k2 + offsets[static_cast<std::size_t>(i)];
        cond[static_cast<std::size_t>(i)] =
            offsets[static_cast<std::size_t>(i)] == 0.0 ? probe.condition
                                                        : assemble_operator(s, std::sqrt(k2), Branch::outgoing, loud).condition();
    });
    const double off_peak = std::max(cond[0], cond[1]);
    // distance to the continuum prediction (m + alpha)^2 + E
    const json medium = cfg.scenario_json.value("medium", json::object());
    const int m = medium.value("m", 1);
    const double E = K - grating_kappa2(m, s.alpha, s.grid.h1);
    const double K_cont = (m + s.alpha) * (m + s.alpha) + E;
    metrics["bound_state_energy"] = E;
    metrics["continuum_k2"] = K_cont;
    metrics["predicted_k2"] = K;
    metrics["located_k2"] = probe.k2;
    metrics["peak_condition"] = probe.condition;
    metrics["off_peak_condition"] = off_peak;
    metrics["secant_iterations"] = probe.iterations;
    audits.at_least("peak_condition", probe.condition, cfg.tolerance("exceptional_peak"));
    audits.at_most("peak_offset", std::abs(probe.k2 - K_cont), cfg.tolerance("exceptional_offset"));
    audits.below("off_peak_condition", off_peak, cfg.tolerance("exceptional_off_peak"));
    std::ostringstream csv;
    csv.precision(17);
    csv << "k2,condition\n";
    std::vector<std::size_t> order(offsets.size() - 2);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i + 2;
    for (std::size_t i : order) csv << probe.k2 + offsets[i] << ',' << cond[i] << '\n';
    out.put("condition_sweep.csv", csv.str());
    out.put("condition_sweep.gp",
            "set datafile separator ','\nset logscale y\nset xlabel 'k^2'\nset ylabel 'condition estimate'\n"
            "plot 'condition_sweep.csv' using 1:2 every ::1 with linespoints title 'strip operator'\n");
}

void commit(const fs::path& target, const Output& out, RunResult& res) {
    const fs::path parent = target.has_parent_path() ? target.parent_path() : fs::path(".");
    fs::create_directories(parent);
    const fs::path tmp = parent / (target.filename().string() + ".partial-" + std::to_string(::getpid()));
    fs::remove_all(tmp);
    fs::create_directory(tmp);
    json files = json::array();
    for (const auto& [name, content] : out.files) {
        std::ofstream f(tmp / name, std::ios::binary);
        f << content;
        if (!f) throw std::runtime_error("cannot write " + (tmp / name).string());
        ManifestEntry e{name, sha256_hex(content), content.size()};
        files.push_back({{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}});
        res.files.push_back(e);
    }
    {
        std::ofstream f(tmp / "manifest.json", std::ios::binary);
        f << json{{"files", files}}.dump(2) << "\n";
    }
    if (fs::exists(target)) {
        if (!fs::exists(target / "manifest.json")) {
            fs::remove_all(tmp);
            throw std::runtime_error("output directory " + target.string() + " exists and is not a modescatter output");
        }
        fs::remove_all(target);
    }
    fs::rename(tmp, target);
    res.directory = target;
}

}  // namespace

std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::forward_sweep: return "forward_sweep";
        case ExperimentKind::flux_audit: return "flux_audit";
        case ExperimentKind::lemma1_audit: return "lemma1_audit";
        case ExperimentKind::dtn_compare: return "dtn_compare";
        case ExperimentKind::continuation_audit: return "continuation_audit";
        case ExperimentKind::time_synthesis: return "time_synthesis";
        case ExperimentKind::embedded_eigen_probe: return "embedded_eigen_probe";
    }
    return "";
}

ExperimentKind experiment_from_string(const std::string& s) {
    for (auto k : {ExperimentKind::forward_sweep, ExperimentKind::flux_audit, ExperimentKind::lemma1_audit,
                   ExperimentKind::dtn_compare, ExperimentKind::continuation_audit, ExperimentKind::time_synthesis,
                   ExperimentKind::embedded_eigen_probe})
        if (to_string(k) == s) return k;
    throw ParseError("unknown experiment kind '" + s + "'");
}

json ExperimentConfig::to_json() const {
    json t = json::object();
    for (const auto& [k, v] : tolerances) t[k] = v;
    json j = {{"experiment", modescatter::to_string(kind)},
              {"scenario", scenario_path.empty() ? json("inline") : json(scenario_path.filename().string())},
              {"geometry", modescatter::to_string(scenario.geometry)},
              {"T", scenario.T},
              {"Tprime", scenario.T_prime},
              {"grid", {{"nx1", scenario.grid.n1}, {"nx2", scenario.grid.n2}, {"h", scenario.grid.h2}}},
              {"k", ks},
              {"M", M},
              {"incident", incident.empty() ? json("propagating") : json(incident)},
              {"resolution_scale", resolution_scale},
              {"seed", seed},
              {"tolerances", t}};
    if (kind == ExperimentKind::dtn_compare) {
        j["n_span"] = n_span;
        j["basis"] = basis;
    }
    if (kind == ExperimentKind::continuation_audit)
        j["continuation"] = {{"target", continuation.target}, {"n", continuation.n}, {"m", continuation.m}};
    if (kind == ExperimentKind::time_synthesis)
        j["time"] = {{"dt", time.dt},         {"steps", time.steps}, {"t0", time.t0},       {"width", time.width},
                     {"k0", time.k0},         {"lateral", time.lateral}, {"band", time.band}, {"pad_factor", time.pad_factor},
                     {"basis", time.basis}};
    if (kind == ExperimentKind::embedded_eigen_probe) j["probe_window"] = probe_window;
    return j;
}

ExperimentConfig validate_config(const fs::path& path, double resolution_scale) {
    ExperimentConfig cfg;
    cfg.config_path = path;
    const json j = read_json(path);
    if (!j.is_object()) throw ParseError("'" + path.string() + "': config must be a JSON object");
    cfg.kind = experiment_from_string(opt<std::string>(j, "experiment", ""));
    cfg.resolution_scale = resolution_scale != 1.0 ? resolution_scale : opt<double>(j, "resolution_scale", 1.0);

    if (!j.contains("scenario")) throw ParseError("'" + path.string() + "': missing field 'scenario'");
    if (j.at("scenario").is_string()) {
        fs::path sp = j.at("scenario").get<std::string>();
        if (sp.is_relative()) sp = path.parent_path() / sp;
        cfg.scenario_path = sp;
        cfg.scenario_json = read_json(sp);
    } else {
        cfg.scenario_json = j.at("scenario");
    }
    cfg.scenario = scenario_from_json(cfg.scenario_json, cfg.resolution_scale);
    const Scenario& s = cfg.scenario;

    if (j.contains("k")) cfg.ks = parse_k_grid(j.at("k"));
    const bool needs_k = cfg.kind != ExperimentKind::time_synthesis && cfg.kind != ExperimentKind::embedded_eigen_probe;
    if (needs_k && cfg.ks.empty()) throw ParseError("'" + path.string() + "': experiment needs a k-grid");
    for (double k : cfg.ks) {
        if (!(std::abs(k) > 0.0) || !std::isfinite(k)) throw ParseError("k-grid values must be finite and nonzero");
        check_thresholds(s, k);
    }

    const json modes = opt<json>(j, "modes", json::object());
    cfg.incident = opt<std::vector<int>>(modes, "incident", {});
    cfg.n_span = opt<int>(modes, "n_span", 7);
    cfg.basis = opt<int>(modes, "basis", 7);
    double kmax = 0.0;
    for (double k : cfg.ks) kmax = std::max(kmax, std::abs(k));
    int M_default = 0;
    if (kmax > 0.0) {
        M_default = is_grating(s.geometry) ? grating_default_cutoff(kmax, s.alpha)
                                           : std::min(s.grid.n1, propagating_count_guide(s, kmax) + 8);
    }
    cfg.M = opt<int>(modes, "M", M_default);
    if (is_grating(s.geometry) && 2 * cfg.M + 1 > s.grid.n1)
        throw ParseError("mode cutoff M=" + std::to_string(cfg.M) + " exceeds the x1 resolution");

    cfg.output = opt<std::string>(j, "output", "modescatter_out");
    cfg.seed = opt<std::uint64_t>(j, "seed", 1);
    cfg.tolerances = default_tolerances();
    const json tols = opt<json>(j, "tolerances", json::object());
    for (const auto& [k, v] : tols.items()) {
        if (!cfg.tolerances.count(k)) throw ParseError("unknown tolerance '" + k + "'");
        cfg.tolerances[k] = v.get<double>();
    }
    const json t = opt<json>(j, "time", json::object());
    cfg.time.dt = opt<double>(t, "dt", cfg.time.dt);
    cfg.time.steps = opt<int>(t, "steps", cfg.time.steps);
    cfg.time.t0 = opt<double>(t, "t0", cfg.time.t0);
    cfg.time.width = opt<double>(t, "width", cfg.time.width);
    cfg.time.k0 = opt<double>(t, "k0", cfg.time.k0);
    cfg.time.lateral = opt<double>(t, "lateral", cfg.time.lateral);
    cfg.time.band = opt<double>(t, "band", cfg.time.band);
    cfg.time.pad_factor = opt<int>(t, "pad_factor", cfg.time.pad_factor);
    cfg.time.basis = opt<int>(t, "basis", cfg.time.basis);
    const json c = opt<json>(j, "continuation", json::object());
    cfg.continuation.target = opt<double>(c, "target", cfg.continuation.target);
    cfg.continuation.n = opt<int>(c, "n", cfg.continuation.n);
    cfg.continuation.m = opt<int>(c, "m", cfg.continuation.m);
    if (cfg.kind == ExperimentKind::continuation_audit) check_thresholds(s, cfg.continuation.target);
    cfg.probe_window = opt<double>(j, "probe_window", cfg.probe_window);
    return cfg;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
    Output out;
    json metrics = json::object();
    Audits audits;
    switch (cfg.kind) {
        case ExperimentKind::forward_sweep: run_sweep(cfg, out, metrics, audits, false); break;
        case ExperimentKind::flux_audit: run_sweep(cfg, out, metrics, audits, true); break;
        case ExperimentKind::lemma1_audit: run_lemma1(cfg, out, metrics, audits); break;
        case ExperimentKind::dtn_compare: run_dtn_compare(cfg, out, metrics, audits); break;
        case ExperimentKind::continuation_audit: run_continuation(cfg, out, metrics, audits); break;
        case ExperimentKind::time_synthesis: run_time_synthesis(cfg, out, metrics, audits); break;
        case ExperimentKind::embedded_eigen_probe: run_embedded(cfg, out, metrics, audits); break;
    }
    RunResult res;
    res.audits_passed = audits.ok;
    res.metrics = {{"experiment", to_string(cfg.kind)},
                   {"label", cfg.scenario.label},
                   {"metrics", metrics},
                   {"audits", audits.list},
                   {"passed", audits.ok}};
    out.put_json("metrics.json", res.metrics);
    out.put_json("config.json", cfg.to_json());
    out.put_json("scenario.json", scenario_to_json(cfg.scenario));
    commit(cfg.output, out, res);
    return res;
}

int cli_main(int argc, char** argv) {
    CLI::App app{"modescatter: periodic-grating and waveguide scattering experiments"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    int threads = 0;
    double scale = 1.0;
    auto* run = app.add_subcommand("run", "execute an experiment config");
    run->add_option("config", config_path, "experiment config (JSON)")->required();
    run->add_option("--out", out_dir, "output directory (overrides the config)");
    run->add_option("--threads", threads, "worker threads (default: MODESCATTER_THREADS or the OpenMP default)");
    run->add_option("--resolution-scale", scale, "multiply nx1 and divide h by S")->check(CLI::PositiveNumber);
    auto* validate = app.add_subcommand("validate", "resolve and check an experiment config");
    validate->add_option("config", config_path, "experiment config (JSON)")->required();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (threads <= 0) {
            if (const char* env = std::getenv("MODESCATTER_THREADS")) {
                try {
                    threads = std::stoi(env);
                } catch (const std::exception&) {
                    throw ParseError(std::string("MODESCATTER_THREADS='") + env + "' is not an integer");
                }
            }
        }
        if (threads > 0) set_thread_count(threads);

        ExperimentConfig cfg = validate_config(config_path, scale);
        if (validate->parsed()) {
            std::cout << cfg.to_json().dump(2) << "\n";
            return 0;
        }
        if (!out_dir.empty()) cfg.output = out_dir;
        const RunResult res = run_experiment(cfg);
        for (const auto& a : res.metrics["audits"])
            std::cout << (a["pass"].get<bool>() ? "PASS " : "FAIL ") << a["name"].get<std::string>() << " = "
                      << a["value"].get<double>() << " (" << a["relation"].get<std::string>() << " "
                      << a["tolerance"].get<double>() << ")\n";
        std::cout << "outputs: " << res.directory.string() << " (" << res.files.size() << " files)\n";
        if (!res.audits_passed) {
            std::cerr << "modescatter: audit tolerance exceeded\n";
            return kAuditFailureExitCode;
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "modescatter: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "modescatter: " << e.what() << "\n";
        return 4;
    }
}

}  // namespace modescatter
