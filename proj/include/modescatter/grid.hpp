#pragma once

#include <complex>
#include <vector>

namespace modescatter {

using cd = std::complex<double>;

enum class Geometry { grating_case1, grating_case2, waveguide };

inline bool is_grating(Geometry g) { return g != Geometry::waveguide; }

/// Uniform node grid on the computational strip. Rows are lines of constant
/// x2 (index j, bottom to top); columns are x1 nodes (index i). Storage is
/// row-major: p = j * n1 + i.
///
/// Gratings: x1_i = i h1 on [0, 2 pi), Bloch-periodic with phase e^{2 pi i alpha}.
/// Waveguides: x1_i = (i + 1) h1 on (0, B]; Dirichlet at x1 = 0, Neumann at x1 = B.
struct Grid {
    Geometry geometry = Geometry::grating_case1;
    int n1 = 0;
    int n2 = 0;
    double h1 = 0.0;
    double h2 = 0.0;
    double x2_min = 0.0;
    double width = 0.0;  // 2 pi or B
    double alpha = 0.0;

    int size() const { return n1 * n2; }
    int index(int i, int j) const { return j * n1 + i; }
    double x1(int i) const { return is_grating(geometry) ? i * h1 : (i + 1) * h1; }
    double x2(int j) const { return x2_min + j * h2; }
    double x2_max() const { return x2(n2 - 1); }
    /// Row whose x2 equals the argument; throws std::invalid_argument otherwise.
    int row_of(double x2) const;
    /// Trapezoid weight (including h1) of column i for lateral integrals.
    double lateral_weight(int i) const;
    bool same_layout(const Grid& other) const;
};

/// Complex grid function.
struct Field {
    Grid grid;
    std::vector<cd> values;

    Field() = default;
    explicit Field(const Grid& g) : grid(g), values(static_cast<std::size_t>(g.size())) {}

    cd& operator()(int i, int j) { return values[static_cast<std::size_t>(grid.index(i, j))]; }
    const cd& operator()(int i, int j) const { return values[static_cast<std::size_t>(grid.index(i, j))]; }

    std::vector<cd> row(int j) const;
    void set_row(int j, const std::vector<cd>& r);
    double max_abs() const;
};

Field operator+(const Field& a, const Field& b);
Field operator-(const Field& a, const Field& b);

}  // namespace modescatter
