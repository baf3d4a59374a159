#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "capflow/cap_geometry.hpp"
#include "capflow/grid.hpp"

namespace capflow {

/// Weak form of the mode-k operator on [0, theta_max] with linear elements.
/// Node 0 is the pole, node n_theta the contact circle.
struct ModeSystem {
    int k = 0;
    double h = 0.0;
    double theta_max = 0.0;
    Eigen::MatrixXd K;  ///< stiffness, all n_theta + 1 nodes
    Eigen::MatrixXd M;  ///< mass, all n_theta + 1 nodes
    bool pole_constrained = false;

    int first_dof() const noexcept { return pole_constrained ? 1 : 0; }
    Eigen::Index nodes() const noexcept { return K.rows(); }
};

/// Ascending eigenvalues with matching nodal eigenvectors (full length, pole entry
/// zero for constrained modes).
struct ModeSpectrum {
    int k = 0;
    std::vector<double> values;
    Eigen::MatrixXd vectors;
};

struct SpectrumReport {
    double a = 0.0, b = 0.0, r = 0.0, alpha = 0.0, R = 0.0, c_crit = 0.0;
    int n_theta = 0;
    std::vector<ModeSpectrum> modes;  ///< k = 0 (nonlocal) .. k_max
    double tol_null = 0.0;
    int nullspace_dim = 0;
    double min_positive = 0.0;
    bool has_negative = false;
};

/// Discrete nullspace basis sampled on a grid.
struct NullBasis {
    Field v0, v1, v2;
};

struct Projection {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0;
    Field remainder;
    double remainder_norm = 0.0;
};

/// Boundary terms of K and M are scaled by d; d = 1 is the full operator.
ModeSystem assemble_mode(int k, const CapParams& cap, int n_theta, double d = 1.0);
ModeSpectrum solve_mode(const ModeSystem& sys);

/// Mode-0 operator including the rank-one mean term.
ModeSpectrum nonlocal_mode0(const ModeSystem& sys, const CapParams& cap);
/// Coefficients of the mean functional: m(u) = m . u over all nodes.
Eigen::VectorXd mode0_mean_functional(const ModeSystem& sys, const CapParams& cap);

SpectrumReport spectrum(const CapParams& cap, int k_max, int n_theta);

/// Analytic d = 0 eigenvalues (l(l+1) - 2)/R^2, l = k, k+2, ... <= l_max.
std::vector<std::vector<double>> halfsphere_reference(const CapParams& cap, int k_max, int l_max);

struct HomotopyCurves {
    std::vector<double> d_values;
    /// values[d][k] holds the ascending local mode-k eigenvalues at d.
    std::vector<std::vector<std::vector<double>>> values;
};

HomotopyCurves homotopy_spectrum(const CapParams& cap, const std::vector<double>& d_values, int k_max,
                                 int n_theta, int n_eigs);
/// Largest jump between adjacent d values over the first n_eigs eigenvalues of modes 0..k_max.
double max_adjacent_jump(const HomotopyCurves& curves, int n_eigs);

NullBasis analytic_nullspace(const CapParams& cap, const Grid& grid);

/// Linearized operator on the grid, interior and contact components.
Field apply_A0(const Field& rho, const CapParams& cap, const Grid& grid);
/// Dense matrix of apply_A0 on stacked (interior, boundary) vectors.
Eigen::MatrixXd assemble_A0_dense(const CapParams& cap, const Grid& grid);

/// Weighted inner product: surface part plus boundary part with weight 1/sin^2(alpha).
double weighted_inner(const Field& u, const Field& v, const CapParams& cap, const Grid& grid);
/// Integral over the reference cap with its exact area element.
double reference_integral(const Field& u, const CapParams& cap, const Grid& grid);

Projection project_nullspace(const Field& v, const CapParams& cap, const Grid& grid);

/// Relative least-squares residual of the mode-0 system with a nonzero constant
/// source, measured along the near-null direction of the local operator.
double inhomogeneous_residual(const CapParams& cap, int n_theta);

/// Samples g(theta) cos(k phi) (or sin) from FE nodal values by cubic interpolation.
Field mode_field(const Grid& grid, const ModeSystem& sys, const Eigen::VectorXd& nodal, int k, bool sine);

enum class Region { S0, SPlus, SMinus };
const char* to_string(Region region);
Region classify(const CapParams& cap);

struct RRule {
    enum class Kind { Mid, FixedR, FixedAlpha } kind = Kind::Mid;
    double value = 0.0;
    static RRule parse(const std::string& text);
    std::string to_string() const;
};

/// Midpoint of the feasible r interval; 2 lo when the interval is unbounded.
double mid_interval_r(double a, double b);

struct StabilityCell {
    double a = 0.0, b = 0.0;
    std::string status = "ok";
    SpectrumReport report;
    Region region = Region::S0;
    double critical_margin = 0.0;
    bool above_critical = false;
};

std::vector<StabilityCell> scan_parameters(const std::vector<double>& a_list, const std::vector<double>& b_list,
                                           const RRule& rule, int k_max, int n_theta);

/// Flat CSV with header a,b,r,alpha,k,index,lambda.
void write_spectrum_csv(std::ostream& os, const SpectrumReport& report, int n_eigs);

}  // namespace capflow
