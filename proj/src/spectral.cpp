#include "modescatter/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "modescatter/errors.hpp"

namespace modescatter {

bool near_threshold(double k, double k_thr) {
    return std::abs(std::abs(k) - k_thr) < kGuardRelative * std::max(1.0, k_thr);
}

cd branch_sqrt(double z, double k, Branch side) {
    cd out;
    if (z > 0.0) {
        const double r = std::sqrt(z);
        out = k >= 0.0 ? cd(r, 0.0) : cd(-r, 0.0);
    } else {
        out = cd(0.0, std::sqrt(-z));
    }
    return side == Branch::outgoing ? out : -out;
}

cd lambda_branch(double k, int m, double alpha, Branch side) {
    const double q = m + alpha;
    if (near_threshold(k, std::abs(q))) {
        std::ostringstream os;
        os << "k=" << k << " is within the guard band of threshold |" << m << "+" << alpha << "|";
        throw ThresholdError(os.str());
    }
    return branch_sqrt(k * k - q * q, k, side);
}

cd lambda_branch_complex(cd k, int m, double alpha) {
    const double q = m + alpha;
    return k * std::sqrt(cd(1.0) - q * q / (k * k));
}

cd grid_lambda(cd lambda, double h2) {
    if (h2 <= 0.0) return lambda;
    const cd s = 0.5 * h2 * lambda;
    if (std::abs(s.imag()) < 1e-300 && std::abs(s.real()) >= 1.0)
        throw std::invalid_argument("grid_lambda: x2 spacing does not resolve the propagating mode");
    return 2.0 / h2 * std::asin(s);
}

double grating_kappa2(int m, double alpha, double h1) {
    const double q = m + alpha;
    if (h1 <= 0.0) return q * q;
    const double s = 2.0 / h1 * std::sin(0.5 * q * h1);
    return s * s;
}

std::vector<GratingMode> grating_modes(double k, double alpha, int M, Branch side) {
    std::vector<GratingMode> modes;
    modes.reserve(2 * M + 1);
    for (int m = -M; m <= M; ++m) {
        const double q = m + alpha;
        modes.push_back({m, alpha, lambda_branch(k, m, alpha, side), q * q < k * k});
    }
    return modes;
}

int grating_default_cutoff(double k, double alpha) {
    int M = 0;
    for (int m = -static_cast<int>(std::abs(k)) - 2; m <= static_cast<int>(std::abs(k)) + 2; ++m)
        if ((m + alpha) * (m + alpha) < k * k) M = std::max(M, std::abs(m));
    return M + 4;
}

const Threshold* ThresholdSet::nearest(double k) const {
    const Threshold* best = nullptr;
    double dist = 0.0;
    for (const auto& t : values) {
        const double d = std::abs(std::abs(k) - t.k);
        if (!best || d < dist) {
            best = &t;
            dist = d;
        }
    }
    return best;
}

bool ThresholdSet::collides(double k) const {
    for (const auto& t : values)
        if (std::abs(std::abs(k) - t.k) < guard_band * std::max(1.0, t.k)) return true;
    return false;
}

ThresholdSet grating_thresholds(double alpha, double k_max) {
    ThresholdSet set;
    const int pmax = static_cast<int>(std::ceil(k_max)) + 1;
    for (int p = -pmax - 1; p <= pmax; ++p) {
        const double kt = std::abs(p + alpha);
        if (kt > k_max) continue;
        auto it = std::find_if(set.values.begin(), set.values.end(),
                               [&](const Threshold& t) { return std::abs(t.k - kt) < 1e-14; });
        if (it == set.values.end())
            set.values.push_back({kt, {p}});
        else
            it->modes.push_back(p);
    }
    std::sort(set.values.begin(), set.values.end(), [](const Threshold& a, const Threshold& b) { return a.k < b.k; });
    for (auto& t : set.values) std::sort(t.modes.begin(), t.modes.end());
    return set;
}

Profile Profile::constant(double value) {
    if (!(value > 0.0)) throw std::invalid_argument("Profile: sound speed must be positive");
    Profile p;
    p.kind_ = Kind::constant;
    p.value_ = value;
    return p;
}

Profile Profile::sine_perturbed(double value, double amplitude, double width) {
    if (!(value > 0.0) || std::abs(amplitude) >= 1.0 || !(width > 0.0))
        throw std::invalid_argument("Profile: sine-perturbed profile must stay positive");
    Profile p;
    p.kind_ = Kind::sine_perturbed;
    p.value_ = value;
    p.amplitude_ = amplitude;
    p.width_ = width;
    return p;
}

Profile Profile::sampled(std::vector<std::pair<double, double>> points) {
    if (points.size() < 2) throw std::invalid_argument("Profile: need at least two samples");
    std::sort(points.begin(), points.end());
    for (const auto& [x, v] : points)
        if (!(v > 0.0)) throw std::invalid_argument("Profile: sampled sound speed must be positive");
    Profile p;
    p.kind_ = Kind::sampled;
    p.points_ = std::move(points);
    return p;
}

double Profile::operator()(double x) const {
    switch (kind_) {
        case Kind::constant:
            return value_;
        case Kind::sine_perturbed:
            return value_ * (1.0 + amplitude_ * std::sin(M_PI * x / width_));
        case Kind::sampled: {
            if (x <= points_.front().first) return points_.front().second;
            if (x >= points_.back().first) return points_.back().second;
            auto hi = std::upper_bound(points_.begin(), points_.end(), x,
                                       [](double v, const auto& p) { return v < p.first; });
            auto lo = hi - 1;
            const double t = (x - lo->first) / (hi->first - lo->first);
            return lo->second + t * (hi->second - lo->second);
        }
    }
    return value_;
}

double ModalBasis::inner(const std::vector<double>& a, const std::vector<double>& b) const {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += weights[i] * a[i] * b[i];
    return s;
}

int ModalBasis::propagating_count() const {
    return static_cast<int>(std::count_if(modes.begin(), modes.end(), [](const auto& m) { return m.mu > 0.0; }));
}

namespace {

// unit eigenvector of a symmetric tridiagonal matrix for a computed eigenvalue:
// inverse iteration with a slightly perturbed shift (Thomas elimination)
Eigen::VectorXd tridiagonal_eigenvector(const Eigen::VectorXd& diag, const Eigen::VectorXd& sub, double mu) {
    const int n = static_cast<int>(diag.size());
    const double shift = mu + 1e-10 * std::max(1.0, std::abs(mu));
    Eigen::VectorXd x = Eigen::VectorXd::Ones(n), cp(n);
    for (int it = 0; it < 3; ++it) {
        auto pivot = [](double p) { return p == 0.0 ? 1e-300 : p; };
        double piv = pivot(diag[0] - shift);
        cp[0] = n > 1 ? sub[0] / piv : 0.0;
        x[0] /= piv;
        for (int i = 1; i < n; ++i) {
            piv = pivot(diag[i] - shift - sub[i - 1] * cp[i - 1]);
            cp[i] = i + 1 < n ? sub[i] / piv : 0.0;
            x[i] = (x[i] - sub[i - 1] * x[i - 1]) / piv;
        }
        for (int i = n - 2; i >= 0; --i) x[i] -= cp[i] * x[i + 1];
        x /= x.norm();
    }
    return x;
}

}  // namespace

ModalBasis sl_eigensystem(const Profile& c0, double B, double k, int M, int n_grid) {
    if (M < 1 || n_grid < 2 || M > n_grid) throw std::invalid_argument("sl_eigensystem: need 1 <= M <= n_grid");
    ModalBasis basis;
    basis.k = k;
    basis.B = B;
    basis.n = n_grid;
    basis.h = B / n_grid;
    const double h = basis.h;
    const double ih2 = 1.0 / (h * h);

    basis.x.resize(n_grid);
    basis.weights.assign(n_grid, h);
    basis.weights.back() = 0.5 * h;
    Eigen::VectorXd diag(n_grid), sub(n_grid - 1);
    std::vector<double> inv_c2(n_grid);
    for (int i = 0; i < n_grid; ++i) {
        basis.x[i] = (i + 1) * h;
        const double c = c0(basis.x[i]);
        if (!(c > 0.0)) throw std::invalid_argument("sl_eigensystem: c0 must be strictly positive");
        inv_c2[i] = 1.0 / (c * c);
        diag[i] = -2.0 * ih2 + k * k * inv_c2[i];
        if (i + 1 < n_grid) sub[i] = ih2;
    }
    // symmetrized ghost-point Neumann row
    sub[n_grid - 2] = std::sqrt(2.0) * ih2;

    // all eigenpairs when most are needed, otherwise eigenvalues plus inverse iteration
    const bool full = 4 * M >= n_grid;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, full ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw ConvergenceError("tridiagonal eigensolver did not converge");

    basis.inv_c2 = inv_c2;
    basis.modes.reserve(M);
    for (int q = 0; q < M; ++q) {
        const int col = n_grid - 1 - q;
        WaveguideMode mode;
        mode.m = q + 1;
        mode.mu = es.eigenvalues()[col];
        const Eigen::VectorXd v = full ? Eigen::VectorXd(es.eigenvectors().col(col))
                                       : tridiagonal_eigenvector(diag, sub, mode.mu);
        mode.phi.resize(n_grid);
        const double sign = v[0] >= 0.0 ? 1.0 : -1.0;
        double dmu = 0.0;
        for (int i = 0; i < n_grid; ++i) {
            mode.phi[i] = sign * v[i] / std::sqrt(basis.weights[i]);
            dmu += basis.weights[i] * mode.phi[i] * mode.phi[i] * inv_c2[i];
        }
        mode.dmu_dk = 2.0 * k * dmu;
        basis.modes.push_back(std::move(mode));
    }
    return basis;
}

namespace {

double mu_of(const Profile& c0, double B, int m, double k, int n_grid) {
    return sl_eigensystem(c0, B, k, m, n_grid).modes.back().mu;
}

}  // namespace

std::vector<double> waveguide_thresholds(const Profile& c0, double B, int m, double k_lo, double k_hi, int n_grid) {
    if (!(k_lo >= 0.0) || !(k_hi > k_lo)) throw std::invalid_argument("waveguide_thresholds: need 0 <= k_lo < k_hi");
    double a = k_lo, b = k_hi;
    double fa = mu_of(c0, B, m, a, n_grid);
    const double fb = mu_of(c0, B, m, b, n_grid);
    if (fa > 0.0 || fb < 0.0) return {};
    for (int it = 0; it < 200 && b - a > 1e-13 * std::max(1.0, b); ++it) {
        const double c = 0.5 * (a + b);
        const double fc = mu_of(c0, B, m, c, n_grid);
        if ((fc > 0.0) == (fa > 0.0)) {
            a = c;
            fa = fc;
        } else {
            b = c;
        }
    }
    return {0.5 * (a + b)};
}

ThresholdSet waveguide_threshold_set(const Profile& c0, double B, double k_max, int n_grid) {
    ThresholdSet set;
    for (int m = 1; m <= n_grid; ++m) {
        auto roots = waveguide_thresholds(c0, B, m, 0.0, k_max, n_grid);
        if (roots.empty()) break;
        set.values.push_back({roots.front(), {m}});
    }
    return set;
}

}  // namespace modescatter
