#include "capflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "capflow/errors.hpp"

namespace capflow {

std::vector<double> fd_weights(double x0, std::span<const double> nodes, int order) {
    const int n = static_cast<int>(nodes.size());
    // c[j][k]: weight of node j for derivative k.
    std::vector<std::vector<double>> c(n, std::vector<double>(order + 1, 0.0));
    double c1 = 1.0;
    double c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, order);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = nodes[i] - x0;
        for (int j = 0; j < i; ++j) {
            const double c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) {
                    c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) {
                c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (int j = 0; j < n; ++j) w[j] = c[j][order];
    return w;
}

namespace {

Stencil make_stencil(const Grid& g, double x0, const std::vector<int>& rows, int order) {
    std::vector<double> xs;
    for (int r : rows) xs.push_back(r < 0 ? -g.theta(-r - 1) : g.theta(r));
    const auto w = fd_weights(x0, xs, order);
    Stencil st;
    std::size_t k = 0;
    for (int r : rows) st.push_back({r, w[k++]});
    return st;
}

}  // namespace

Grid::Grid(int n_phi, int n_theta, double theta_max)
    : n_phi_(n_phi), n_theta_(n_theta), theta_max_(theta_max),
      h_phi_(2.0 * std::numbers::pi / n_phi), h_theta_(theta_max / n_theta) {
    if (n_phi < 8 || n_phi % 2 != 0) {
        throw Error(ErrorKind::InvalidArgument, "n_phi must be even and >= 8");
    }
    if (n_theta < 8) throw Error(ErrorKind::InvalidArgument, "n_theta must be >= 8");
    if (!(theta_max > 0.0 && theta_max < std::numbers::pi)) {
        throw Error(ErrorKind::InvalidArgument, "theta_max must lie in (0, pi)");
    }
    const int n = n_theta_;
    d1_.resize(n + 1);
    d2_.resize(n + 1);
    for (int j = 0; j < n; ++j) {
        // Five nearest rows; ghosts across the pole, the contact row caps the other end.
        const int lo = std::min(j - 2, n - 4);
        std::vector<int> rows;
        for (int r = lo; r <= lo + 4; ++r) rows.push_back(r);
        d1_[j] = make_stencil(*this, theta(j), rows, 1);
        d2_[j] = make_stencil(*this, theta(j), rows, 2);
    }
    d1_[n] = make_stencil(*this, theta_max_, {n, n - 1, n - 2, n - 3}, 1);
    d2_[n] = make_stencil(*this, theta_max_, {n, n - 1, n - 2, n - 3, n - 4}, 2);
}

Grid Grid::for_cap(const CapParams& cap, int n_phi, int n_theta) {
    return Grid(n_phi, n_theta, cap.theta_max());
}

Field Field::zeros(const Grid& grid) {
    Field f;
    f.n_phi = grid.n_phi();
    f.n_theta = grid.n_theta();
    f.interior = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f.n_phi) * f.n_theta);
    f.boundary = Eigen::VectorXd::Zero(f.n_phi);
    return f;
}

Field Field::sample(const Grid& grid, const std::function<double(double, double)>& fn) {
    Field f = zeros(grid);
    for (int i = 0; i < f.n_phi; ++i) {
        for (int j = 0; j < f.n_theta; ++j) f.at(i, j) = fn(grid.phi(i), grid.theta(j));
        f.boundary[i] = fn(grid.phi(i), grid.theta_max());
    }
    return f;
}

double Field::max_abs() const {
    double m = interior.size() ? interior.cwiseAbs().maxCoeff() : 0.0;
    if (boundary.size()) m = std::max(m, boundary.cwiseAbs().maxCoeff());
    return m;
}

Eigen::VectorXd Field::stacked() const {
    Eigen::VectorXd v(size());
    v << interior, boundary;
    return v;
}

Field Field::from_stacked(const Grid& grid, const Eigen::VectorXd& v) {
    Field f = zeros(grid);
    f.interior = v.head(f.interior.size());
    f.boundary = v.tail(f.boundary.size());
    return f;
}

Field& Field::operator+=(const Field& o) {
    interior += o.interior;
    boundary += o.boundary;
    return *this;
}

Field& Field::operator-=(const Field& o) {
    interior -= o.interior;
    boundary -= o.boundary;
    return *this;
}

Field& Field::operator*=(double s) {
    interior *= s;
    boundary *= s;
    return *this;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double s, Field a) { return a *= s; }

double trace_mismatch(const Grid& grid, const Field& f) {
    const int n = grid.n_theta();
    const double xs[] = {grid.theta(n - 4), grid.theta(n - 3), grid.theta(n - 2), grid.theta(n - 1)};
    const auto w = fd_weights(grid.theta_max(), xs, 0);
    double worst = 0.0;
    for (int i = 0; i < grid.n_phi(); ++i) {
        double extrap = 0.0;
        for (int k = 0; k < 4; ++k) extrap += w[k] * f.at(i, n - 4 + k);
        worst = std::max(worst, std::abs(extrap - f.boundary[i]));
    }
    return worst;
}

}  // namespace capflow
