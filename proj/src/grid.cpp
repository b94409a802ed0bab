#include "modescatter/grid.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace modescatter {

int Grid::row_of(double x) const {
    const double r = (x - x2_min) / h2;
    const long j = std::lround(r);
    if (std::abs(r - static_cast<double>(j)) > 1e-8 || j < 0 || j >= n2) {
        std::ostringstream os;
        os << "x2=" << x << " is not a grid row";
        throw std::invalid_argument(os.str());
    }
    return static_cast<int>(j);
}

double Grid::lateral_weight(int i) const {
    if (geometry == Geometry::waveguide && i == n1 - 1) return 0.5 * h1;
    return h1;
}

bool Grid::same_layout(const Grid& o) const {
    return geometry == o.geometry && n1 == o.n1 && n2 == o.n2 && std::abs(h1 - o.h1) < 1e-14 &&
           std::abs(h2 - o.h2) < 1e-14 && std::abs(x2_min - o.x2_min) < 1e-12;
}

std::vector<cd> Field::row(int j) const {
    const auto begin = values.begin() + static_cast<std::ptrdiff_t>(grid.index(0, j));
    return {begin, begin + grid.n1};
}

void Field::set_row(int j, const std::vector<cd>& r) {
    for (int i = 0; i < grid.n1; ++i) (*this)(i, j) = r[static_cast<std::size_t>(i)];
}

double Field::max_abs() const {
    double m = 0.0;
    for (const auto& v : values) m = std::max(m, std::abs(v));
    return m;
}

Field operator+(const Field& a, const Field& b) {
    Field c = a;
    for (std::size_t p = 0; p < c.values.size(); ++p) c.values[p] += b.values[p];
    return c;
}

Field operator-(const Field& a, const Field& b) {
    Field c = a;
    for (std::size_t p = 0; p < c.values.size(); ++p) c.values[p] -= b.values[p];
    return c;
}

}  // namespace modescatter
