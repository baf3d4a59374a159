#pragma once

#include <iosfwd>
#include <vector>

#include "capflow/curvilinear.hpp"
#include "capflow/grid.hpp"

namespace capflow {

/// Discrete surface over every grid node (interior rows and the contact row),
/// indexed by Grid::node(i, j).
struct Embedding {
    Grid grid;
    double R = 1.0;  ///< reference radius, sets geometric tolerances
    std::vector<Vec3> X;
    std::vector<Vec3> X_phi;
    std::vector<Vec3> X_theta;
    std::vector<Vec3> X_theta_theta;
    std::vector<Vec3> normal;
    std::vector<double> E, F, G;
    std::vector<double> e, f, g2;
    std::vector<double> H;
    std::vector<double> sqrt_det;

    double mean_curvature(int i, int j) const { return H[grid.node(i, j)]; }
    const Vec3& point(int i, int j) const { return X[grid.node(i, j)]; }
};

/// Chart evaluated once on the grid: Psi(q, w) = base + w * direction, since the
/// chart is affine in w.
struct ChartSamples {
    Grid grid;
    CapParams cap;
    double epsilon0 = 0.0;
    std::vector<Vec3> base;
    std::vector<Vec3> direction;

    ChartSamples(const Grid& grid, const CurvilinearChart& chart);
};

Embedding embed(const ChartSamples& chart, const Field& rho);
/// Same as embed, reusing the storage of `emb` (which must belong to the same grid).
void embed_into(Embedding& emb, const ChartSamples& chart, const Field& rho);
Embedding embed(const Grid& grid, const Field& rho, const CurvilinearChart& chart);
Embedding embed(const Grid& grid, const Field& rho, const CapParams& cap, const CutoffProfile& cutoff);

/// Integral over the surface of a field; only interior rows carry weight.
double area_integral(const Embedding& emb, const Field& f);
/// Same, for a per-node array indexed like Embedding members.
double area_integral(const Embedding& emb, const std::vector<double>& values);
double surface_area(const Embedding& emb);
double mean_of_H(const Embedding& emb);
double enclosed_volume(const Embedding& emb);
double energy(const Embedding& emb, double a, double b);

/// Wetted area enclosed by the contact curve (shoelace).
double contact_area(const Embedding& emb);
/// Length of the contact curve.
double contact_length(const Embedding& emb);

struct BoundaryQuantities {
    std::vector<double> curvature;   ///< signed planar curvature, -1/r on a circle
    std::vector<double> cos_angle;   ///< <n_Gamma, n_D> with n_D = -e3
    std::vector<Vec3> conormal;      ///< outward conormal of the contact curve in z = 0
    std::vector<double> speed;       ///< |dX/dphi| along the contact curve
};

BoundaryQuantities boundary_quantities(const Embedding& emb);

/// Throws ContactNotPlanar if the contact row leaves z = 0 by more than 1e-8 R.
void require_planar_contact(const Embedding& emb);

/// Explicit Laplace-Beltrami operator of the undeformed cap applied to rho.
Field laplace_beltrami_reference(const Grid& grid, const Field& rho, const CapParams& cap);

void write_field_csv(std::ostream& os, const Grid& grid, const Field& f);
Field read_field_csv(std::istream& is, const Grid& grid);
void write_embedding_csv(std::ostream& os, const Embedding& emb);

}  // namespace capflow
