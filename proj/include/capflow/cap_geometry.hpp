#pragma once

#include <optional>
#include <string>

namespace capflow {

/// Open interval (lo, hi); hi may be +infinity.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double x) const noexcept { return x > lo && x < hi; }
    bool bounded() const noexcept;
    std::string to_string() const;
};

/// Stationary spherical cap on the plane z = 0.
///
/// `alpha` is the angle between the cap and the supporting plane measured
/// inside the enclosed region, so small alpha means an almost detached
/// droplet. The sphere center sits at height `H_center = R cos(alpha)`.
struct CapParams {
    double a = 0.0;            ///< contact-energy coefficient
    double b = 0.0;            ///< line-tension coefficient
    double r = 0.0;            ///< contact-circle radius
    double alpha = 0.0;        ///< contact angle in (0, pi)
    double cos_alpha = 0.0;
    double sin_alpha = 0.0;
    double R = 0.0;            ///< sphere radius
    double H_center = 0.0;     ///< signed height of the sphere center
    std::optional<double> c_alpha;  ///< empty on the degenerate branch
    double c_crit = 0.0;       ///< critical line tension

    double theta_max() const noexcept;
    bool above_critical() const noexcept { return b > c_crit; }
    bool degenerate_branch() const noexcept { return !c_alpha.has_value(); }
};

/// Curvature data of the stationary cap used throughout the linearization.
struct CapReference {
    double mean_curvature;         ///< H = -2/R (sum of principal curvatures)
    double second_form_sq;         ///< |sigma|^2 = 2/R^2
    double gauss_curvature;        ///< 1/R^2
    double contact_curvature;      ///< kappa = -1/r
    double second_form_conormal;   ///< II(n, n) = -1/R along the outward conormal
    double tangent_conormal_rate;  ///< <tau, d_sigma n_dD> = 1/(R sin alpha)
};

/// Cosine band excluded near detachment/flattening.
inline constexpr double kCosineMargin = 1e-8;
/// Relative band (times R) inside which R sin^2 = b cos is treated as equality.
inline constexpr double kDegenerateDenominator = 1e-9;

Interval feasible_r_range(double a, double b);
Interval feasible_alpha_range(double a, double b);

CapParams make_cap(double a, double b, double r);
/// Inverts cos(alpha) = b/r - a for r.
CapParams cap_from_angle(double a, double b, double alpha);
/// Cap on the degenerate branch R sin^2(alpha) = b cos(alpha) for given alpha and b.
CapParams make_degenerate_cap(double alpha, double b);

CapReference ssc_reference(const CapParams& cap);

/// (R cos sin^2 - b)/(R sin^2 - b cos); empty when the denominator vanishes.
std::optional<double> c_alpha_coefficient(double R, double cos_alpha, double sin_alpha, double b);
std::optional<double> c_alpha_coefficient(const CapParams& cap);

double critical_line_tension(double R, double cos_alpha, double sin_alpha);

}  // namespace capflow
