#include "modescatter/kernels.hpp"

#include <omp.h>

#include <cmath>
#include <stdexcept>

#include "modescatter/forward.hpp"

namespace modescatter {

void set_thread_count(int n) {
    if (n > 0) omp_set_num_threads(n);
}

int thread_count() { return omp_get_max_threads(); }

namespace {

// cell weights for the far (c0) and near (c1) node, beta = i lambda h
void cell_weights(cd beta, double h, cd& c0, cd& c1) {
    if (std::abs(beta) < 0.1) {
        // series: c0 = h sum (n-1)/n! beta^{n-2}, c1 = h sum 1/n! beta^{n-2}
        cd s0 = 0.0, s1 = 0.0, p = 1.0;
        double fact = 2.0;
        for (int n = 2; n < 14; ++n) {
            s0 += static_cast<double>(n - 1) / fact * p;
            s1 += 1.0 / fact * p;
            p *= beta;
            fact *= n + 1;
        }
        c0 = h * s0;
        c1 = h * s1;
        return;
    }
    const cd e = std::exp(beta), b2 = beta * beta;
    c0 = h * (e * (beta - 1.0) + 1.0) / b2;
    c1 = h * (e - 1.0 - beta) / b2;
}

}  // namespace

std::vector<cd> exp_kernel_convolve(const std::vector<cd>& g, cd lambda, double h) {
    const std::size_t n = g.size();
    std::vector<cd> out(n, 0.0);
    if (n == 0) return out;
    const cd b = cd(0.0, 1.0) * lambda * h;
    cd c0, c1;
    cell_weights(b, h, c0, c1);
    const cd step = std::exp(b);
    // from the left: R_j = int_{y < x_j}
    cd R = 0.0;
    for (std::size_t j = 1; j < n; ++j) {
        R = step * R + c0 * g[j - 1] + c1 * g[j];
        out[j] += R;
    }
    cd L = 0.0;
    for (std::size_t j = n - 1; j-- > 0;) {
        L = step * L + c0 * g[j + 1] + c1 * g[j];
        out[j] += L;
    }
    return out;
}

std::vector<std::vector<cd>> mode_convolve(const std::vector<std::vector<cd>>& rows, const std::vector<cd>& lambdas,
                                           const std::vector<cd>& pref, double h, Exec exec) {
    const int nm = static_cast<int>(rows.size());
    std::vector<std::vector<cd>> out(rows.size());
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int q = 0; q < nm; ++q) {
            auto c = exp_kernel_convolve(rows[q], lambdas[q], h);
            for (auto& v : c) v *= pref[q];
            out[q] = std::move(c);
        }
    } else {
        for (int q = 0; q < nm; ++q) {
            auto c = exp_kernel_convolve(rows[q], lambdas[q], h);
            for (auto& v : c) v *= pref[q];
            out[q] = std::move(c);
        }
    }
    return out;
}

Field apply_operator(const Scenario& s, double k, const Field& u, Exec exec) {
    const Grid& g = s.grid;
    Field r(g);
    const int n1 = g.n1, n2 = g.n2;
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (int j = 1; j < n2 - 1; ++j)
            for (int i = 0; i < n1; ++i) r(i, j) = apply_stencil(s, k, u, i, j);
    } else {
        for (int j = 1; j < n2 - 1; ++j)
            for (int i = 0; i < n1; ++i) r(i, j) = apply_stencil(s, k, u, i, j);
    }
    return r;
}

std::vector<std::vector<cd>> project_rows(const Field& u, const std::vector<std::vector<cd>>& analysis, Exec exec) {
    const int nq = static_cast<int>(analysis.size());
    const int n1 = u.grid.n1, n2 = u.grid.n2;
    for (const auto& a : analysis)
        if (static_cast<int>(a.size()) != n1) throw std::invalid_argument("project_rows: analysis row size");
    std::vector<std::vector<cd>> out(static_cast<std::size_t>(nq), std::vector<cd>(static_cast<std::size_t>(n2)));
    auto body = [&](int q) {
        const auto& a = analysis[static_cast<std::size_t>(q)];
        auto& o = out[static_cast<std::size_t>(q)];
        for (int j = 0; j < n2; ++j) {
            cd acc = 0.0;
            for (int i = 0; i < n1; ++i) acc += a[static_cast<std::size_t>(i)] * u(i, j);
            o[static_cast<std::size_t>(j)] = acc;
        }
    };
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (int q = 0; q < nq; ++q) body(q);
    } else {
        for (int q = 0; q < nq; ++q) body(q);
    }
    return out;
}

}  // namespace modescatter
