#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "capflow/cap_geometry.hpp"

namespace capflow {

/// One term of a theta stencil. Negative rows address ghosts across the pole:
/// row -m is row m - 1 at azimuth phi + pi.
struct StencilTerm {
    int row;
    double weight;
};

using Stencil = std::vector<StencilTerm>;

/// Finite-difference weights for derivative `order` at x0 on arbitrary nodes (Fornberg).
std::vector<double> fd_weights(double x0, std::span<const double> nodes, int order);

/// Tensor-product (phi, theta) lattice over the reference cap.
///
/// Theta rows 0..n_theta-1 are cell centers (j + 1/2) h_theta; row n_theta is the
/// contact circle theta_max. Phi nodes are uniform and periodic.
class Grid {
public:
    Grid(int n_phi, int n_theta, double theta_max);
    static Grid for_cap(const CapParams& cap, int n_phi, int n_theta);

    int n_phi() const noexcept { return n_phi_; }
    int n_theta() const noexcept { return n_theta_; }
    int rows() const noexcept { return n_theta_ + 1; }
    double theta_max() const noexcept { return theta_max_; }
    double h_phi() const noexcept { return h_phi_; }
    double h_theta() const noexcept { return h_theta_; }

    double phi(int i) const noexcept { return h_phi_ * i; }
    double theta(int j) const noexcept { return j < n_theta_ ? (j + 0.5) * h_theta_ : theta_max_; }
    int wrap(int i) const noexcept {
        if (i >= 0 && i < n_phi_) return i;
        if (i < 0 && i >= -n_phi_) return i + n_phi_;
        if (i >= n_phi_ && i < 2 * n_phi_) return i - n_phi_;
        return ((i % n_phi_) + n_phi_) % n_phi_;
    }
    int antipode(int i) const noexcept { return wrap(i + n_phi_ / 2); }
    /// Flat index over all rows including the boundary row.
    int node(int i, int j) const noexcept { return i * (n_theta_ + 1) + j; }
    int node_count() const noexcept { return n_phi_ * (n_theta_ + 1); }

    const Stencil& d_theta(int j) const { return d1_[j]; }
    const Stencil& d2_theta(int j) const { return d2_[j]; }

private:
    int n_phi_;
    int n_theta_;
    double theta_max_;
    double h_phi_;
    double h_theta_;
    std::vector<Stencil> d1_;
    std::vector<Stencil> d2_;
};

/// Height function on the grid: interior node values plus its own boundary trace.
struct Field {
    int n_phi = 0;
    int n_theta = 0;
    Eigen::VectorXd interior;  ///< index i * n_theta + j
    Eigen::VectorXd boundary;  ///< index i

    static Field zeros(const Grid& grid);
    static Field sample(const Grid& grid, const std::function<double(double, double)>& f);

    double& at(int i, int j) { return interior[i * n_theta + j]; }
    double at(int i, int j) const { return interior[i * n_theta + j]; }
    /// Row n_theta maps to the boundary trace.
    double value(int i, int j) const { return j < n_theta ? at(i, j) : boundary[i]; }

    double max_abs() const;
    Eigen::Index size() const { return interior.size() + boundary.size(); }
    Eigen::VectorXd stacked() const;
    static Field from_stacked(const Grid& grid, const Eigen::VectorXd& v);

    Field& operator+=(const Field& o);
    Field& operator-=(const Field& o);
    Field& operator*=(double s);
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double s, Field a);

/// Max deviation between the trace and the cubic extrapolation of the interior.
double trace_mismatch(const Grid& grid, const Field& f);

/// Theta derivative at (i, j) of any row-addressable quantity.
template <class T, class Access>
T apply_theta(const Grid& grid, const Stencil& st, int i, Access&& value) {
    auto term = [&](const StencilTerm& t) -> T {
        return t.weight * (t.row < 0 ? value(grid.antipode(i), -t.row - 1) : value(i, t.row));
    };
    T acc = term(st.front());
    for (std::size_t s = 1; s < st.size(); ++s) acc += term(st[s]);
    return acc;
}

/// Fourth-order periodic centered first derivative in phi at column i.
template <class T, class Access>
T phi_derivative(const Grid& grid, int i, int j, Access&& value) {
    const double h = grid.h_phi();
    return (8.0 * (value(grid.wrap(i + 1), j) - value(grid.wrap(i - 1), j)) -
            (value(grid.wrap(i + 2), j) - value(grid.wrap(i - 2), j))) / (12.0 * h);
}

/// Fourth-order periodic centered second derivative in phi at column i.
template <class T, class Access>
T phi_second_derivative(const Grid& grid, int i, int j, Access&& value) {
    const double h = grid.h_phi();
    return (16.0 * (value(grid.wrap(i + 1), j) + value(grid.wrap(i - 1), j)) -
            (value(grid.wrap(i + 2), j) + value(grid.wrap(i - 2), j)) - 30.0 * value(i, j)) / (12.0 * h * h);
}

}  // namespace capflow
