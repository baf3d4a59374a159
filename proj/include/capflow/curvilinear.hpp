#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "capflow/cap_geometry.hpp"

namespace capflow {

using Vec3 = Eigen::Vector3d;

/// Point of the reference cap in shifted spherical coordinates.
struct SurfacePoint {
    double phi = 0.0;    ///< azimuth, periodic
    double theta = 0.0;  ///< polar angle in [0, pi - alpha]
};

enum class CutoffShape { Quintic, Septic };

/// Smooth ramp eta(theta) that is 0 away from the contact circle and 1 on it.
class CutoffProfile {
public:
    /// Default support width is a quarter of the polar range.
    explicit CutoffProfile(const CapParams& cap, CutoffShape shape = CutoffShape::Quintic);
    CutoffProfile(double theta_max, double delta, CutoffShape shape);

    double operator()(double theta) const noexcept;
    double theta_max() const noexcept { return theta_max_; }
    double delta() const noexcept { return delta_; }
    /// Inner edge of the support; eta vanishes for theta <= support_begin().
    double support_begin() const noexcept { return theta_max_ - delta_; }

private:
    double theta_max_;
    double delta_;
    CutoffShape shape_;
};

Vec3 reference_point(const SurfacePoint& p, const CapParams& cap);
/// Outward unit normal of the reference cap.
Vec3 reference_normal(const SurfacePoint& p);
/// Unit tangent along increasing theta; equals the outward conormal on the contact circle.
Vec3 polar_tangent(const SurfacePoint& p);

/// Normal-offset chart with a tangential correction that pins the contact
/// circle to the plane z = 0:
///   Psi(q, w) = q + w n(q) - w eta(theta) cot(alpha) T(q).
class CurvilinearChart {
public:
    CurvilinearChart(const CapParams& cap, CutoffProfile cutoff);
    CurvilinearChart(const CapParams& cap, CutoffProfile cutoff, double epsilon0);

    Vec3 psi(const SurfacePoint& p, double w) const;
    /// Derivative in w; independent of w because the chart is affine in w.
    Vec3 dpsi_dw(const SurfacePoint& p, double w) const;

    const CapParams& cap() const noexcept { return cap_; }
    const CutoffProfile& cutoff() const noexcept { return cutoff_; }
    double epsilon0() const noexcept { return epsilon0_; }

    void check_offset(double w) const;

private:
    CapParams cap_;
    CutoffProfile cutoff_;
    double epsilon0_;
    double cot_alpha_;
};

}  // namespace capflow
