#pragma once

#include <complex>
#include <vector>

#include "modescatter/scenario.hpp"

namespace modescatter {

/// Execution policy of the hot loops. The serial variants are the reference
/// implementation; the parallel ones must agree bitwise.
enum class Exec { serial, parallel };

/// Thread count used by Exec::parallel (OpenMP); n <= 0 keeps the runtime default.
void set_thread_count(int n);
int thread_count();

/// Product integration of the |x - y| exponential kernel against a piecewise
/// linear g on a uniform grid: out_j = int e^{i lambda |x_j - y|} g(y) dy.
/// Exact for linear g; O(n) via left and right recursions.
std::vector<cd> exp_kernel_convolve(const std::vector<cd>& g, cd lambda, double h);

/// Per-mode convolutions, rows[q] with lambdas[q] and prefactor pref[q].
std::vector<std::vector<cd>> mode_convolve(const std::vector<std::vector<cd>>& rows, const std::vector<cd>& lambdas,
                                           const std::vector<cd>& pref, double h, Exec exec);

/// a(L - k^2) u on interior rows 1..n2-2 (unscaled); zero on the first and last row.
Field apply_operator(const Scenario& s, double k, const Field& u, Exec exec);

/// Lateral projection of every row on a basis: out(q, j) = sum_i analysis(q, i) u(i, j).
std::vector<std::vector<cd>> project_rows(const Field& u, const std::vector<std::vector<cd>>& analysis, Exec exec);

}  // namespace modescatter
