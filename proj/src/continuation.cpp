#include "modescatter/continuation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "modescatter/errors.hpp"

namespace modescatter {

cd Barycentric::operator()(cd z) const {
    cd num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < support.size(); ++j) {
        const cd d = z - support[j];
        if (d == cd(0.0)) return values[j];
        num += weights[j] * values[j] / d;
        den += weights[j] / d;
    }
    return num / den;
}

std::vector<cd> Barycentric::poles() const {
    const int m = static_cast<int>(support.size());
    if (m < 2) return {};
    // zeros of sum w_j / (z - z_j): eigenvalues of P (D - c) + c with
    // P = I - 1 w^T / (w^T 1), minus the spurious eigenvalue c
    cd s = 0.0;
    for (const auto& w : weights) s += w;
    const double lo = *std::min_element(support.begin(), support.end());
    const double hi = *std::max_element(support.begin(), support.end());
    const cd c(0.5 * (lo + hi), 7.3 * (hi - lo) + 1.0);
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Identity(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) M(i, j) -= weights[static_cast<std::size_t>(j)] / s;
    Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(m, m);
    for (int j = 0; j < m; ++j) D(j, j) = support[static_cast<std::size_t>(j)] - c;
    M = M * D;
    M += c * Eigen::MatrixXcd::Identity(m, m);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(M, false);
    std::vector<cd> ev(es.eigenvalues().data(), es.eigenvalues().data() + m);
    const auto drop = std::min_element(ev.begin(), ev.end(), [&](cd a, cd b) { return std::abs(a - c) < std::abs(b - c); });
    ev.erase(drop);
    return ev;
}

cd Barycentric::residue(cd p) const {
    cd num = 0.0, dden = 0.0;
    for (std::size_t j = 0; j < support.size(); ++j) {
        const cd d = p - support[j];
        num += weights[j] * values[j] / d;
        dden -= weights[j] / (d * d);
    }
    return num / dden;
}

namespace {

struct Path {
    std::vector<Barycentric> models;  // models[s-1] has s support points
};

// greedy AAA; records the model after every step
Path aaa(const std::vector<double>& Z, const std::vector<cd>& F, int max_support, double tol) {
    const int n = static_cast<int>(Z.size());
    double fmax = 0.0;
    for (const auto& f : F) fmax = std::max(fmax, std::abs(f));
    if (fmax == 0.0) fmax = 1.0;
    std::vector<char> used(static_cast<std::size_t>(n), 0);
    std::vector<int> sup;
    std::vector<cd> R(static_cast<std::size_t>(n), std::accumulate(F.begin(), F.end(), cd(0.0)) / double(n));
    Path path;
    for (int step = 0; step < max_support; ++step) {
        int jmax = -1;
        double emax = -1.0;
        for (int i = 0; i < n; ++i) {
            if (used[static_cast<std::size_t>(i)]) continue;
            const double e = std::abs(F[static_cast<std::size_t>(i)] - R[static_cast<std::size_t>(i)]);
            if (e > emax) {
                emax = e;
                jmax = i;
            }
        }
        if (jmax < 0) break;
        if (step > 0 && emax <= tol * fmax) break;
        used[static_cast<std::size_t>(jmax)] = 1;
        sup.push_back(jmax);
        std::vector<int> rest;
        for (int i = 0; i < n; ++i)
            if (!used[static_cast<std::size_t>(i)]) rest.push_back(i);
        const int m = static_cast<int>(sup.size());
        if (static_cast<int>(rest.size()) < m) break;

        Eigen::MatrixXcd A(static_cast<int>(rest.size()), m);
        for (int r = 0; r < static_cast<int>(rest.size()); ++r)
            for (int c = 0; c < m; ++c) {
                const int i = rest[static_cast<std::size_t>(r)], j = sup[static_cast<std::size_t>(c)];
                A(r, c) = (F[static_cast<std::size_t>(i)] - F[static_cast<std::size_t>(j)]) /
                          (Z[static_cast<std::size_t>(i)] - Z[static_cast<std::size_t>(j)]);
            }
        Eigen::BDCSVD<Eigen::MatrixXcd> svd(A, Eigen::ComputeFullV);
        const Eigen::VectorXcd w = svd.matrixV().col(m - 1);

        Barycentric b;
        for (int c = 0; c < m; ++c) {
            b.support.push_back(Z[static_cast<std::size_t>(sup[static_cast<std::size_t>(c)])]);
            b.values.push_back(F[static_cast<std::size_t>(sup[static_cast<std::size_t>(c)])]);
            b.weights.push_back(w[c]);
        }
        for (int i = 0; i < n; ++i) R[static_cast<std::size_t>(i)] = b(Z[static_cast<std::size_t>(i)]);
        path.models.push_back(std::move(b));
    }
    return path;
}

bool inside(double k, const std::vector<std::pair<double, double>>& bands) {
    for (const auto& [a, b] : bands)
        if (k >= a && k <= b) return true;
    return false;
}

}  // namespace

ContinuationModel fit_rational(const std::vector<std::pair<double, cd>>& samples_in, FitOptions opt) {
    if (samples_in.size() < 12) {
        std::ostringstream os;
        os << "need at least 12 samples, got " << samples_in.size();
        throw InsufficientSamplesError(os.str());
    }
    auto samples = samples_in;
    std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [k, v] : samples) {
        if (inside(k, opt.excluded)) throw ThresholdError("sample k=" + std::to_string(k) + " lies in an excluded band");
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw std::invalid_argument("non-finite sample value");
    }
    const int n = static_cast<int>(samples.size());

    // deterministic hold-out: every stride-th interior sample
    const int stride = std::max(2, static_cast<int>(std::lround(1.0 / std::clamp(opt.holdout, 0.05, 0.5))));
    std::vector<double> Zt, Zh;
    std::vector<cd> Ft, Fh;
    for (int i = 0; i < n; ++i) {
        const bool hold = i > 0 && i < n - 1 && i % stride == 1;
        (hold ? Zh : Zt).push_back(samples[static_cast<std::size_t>(i)].first);
        (hold ? Fh : Ft).push_back(samples[static_cast<std::size_t>(i)].second);
    }
    double fmax = 0.0;
    for (const auto& [k, v] : samples) fmax = std::max(fmax, std::abs(v));
    if (fmax == 0.0) fmax = 1.0;

    const Path train = aaa(Zt, Ft, opt.max_support, opt.tolerance);
    std::vector<std::pair<double, int>> scores;  // (holdout residual, support size)
    for (std::size_t s = 0; s < train.models.size(); ++s) {
        double e = 0.0;
        for (std::size_t h = 0; h < Zh.size(); ++h) {
            const cd r = train.models[s](Zh[h]);
            e = std::max(e, std::isfinite(std::abs(r)) ? std::abs(r - Fh[h]) : 1e300);
        }
        scores.push_back({e / fmax, static_cast<int>(s) + 1});
    }
    std::sort(scores.begin(), scores.end());
    const int s_best = scores.front().second;
    const int s_second = scores.size() > 1 ? scores[1].second : s_best;

    std::vector<double> Z;
    std::vector<cd> F;
    for (const auto& [k, v] : samples) {
        Z.push_back(k);
        F.push_back(v);
    }
    const Path full = aaa(Z, F, std::max(s_best, s_second), 0.0);
    auto pick = [&](int s) { return full.models[static_cast<std::size_t>(std::min<int>(s, full.models.size()) - 1)]; };

    ContinuationModel model;
    model.best = pick(s_best);
    model.second = pick(s_second);
    model.window_lo = Z.front();
    model.window_hi = Z.back();
    model.excluded = opt.excluded;
    model.holdout_residual = scores.front().first;
    model.degree = model.best.degree();
    model.samples = n;

    const double width = model.window_hi - model.window_lo;
    for (const cd& p : model.best.poles()) {
        if (p.real() < model.window_lo || p.real() > model.window_hi) continue;
        if (std::abs(p.imag()) > 1e-2 * width) continue;
        bool flagged = false;
        for (double kb : opt.ill_conditioned)
            if (std::abs(p.real() - kb) < 1e-3 * width) flagged = true;
        if (flagged) continue;
        const double res = std::abs(model.best.residue(p));
        if (res <= 1e-8 * fmax * width) continue;  // Froissart doublet
        std::ostringstream os;
        os << "approximant pole at k=" << p.real() << (p.imag() >= 0 ? "+" : "") << p.imag() << "i (residue " << res
           << ") inside the window";
        throw PoleInWindowError(os.str());
    }
    return model;
}

ContinuedValue evaluate_continuation(const ContinuationModel& model, double k) {
    if (k < model.trust_lo() || k > model.trust_hi()) {
        std::ostringstream os;
        os << "k=" << k << " outside the trust region [" << model.trust_lo() << ", " << model.trust_hi() << "]";
        throw ExtrapolationRangeError(os.str());
    }
    if (inside(k, model.excluded)) throw ExtrapolationRangeError("k=" + std::to_string(k) + " lies in an excluded band");
    ContinuedValue out;
    out.value = model.best(k);
    out.error = std::abs(out.value - model.second(k));
    return out;
}

}  // namespace modescatter
