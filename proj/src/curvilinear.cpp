#include "capflow/curvilinear.hpp"

#include <cmath>
#include <sstream>

#include "capflow/errors.hpp"

namespace capflow {

namespace {

double smoothstep(double x, CutoffShape shape) noexcept {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    switch (shape) {
        case CutoffShape::Quintic:
            return x * x * x * (x * (6.0 * x - 15.0) + 10.0);
        case CutoffShape::Septic:
            return x * x * x * x * (35.0 + x * (-84.0 + x * (70.0 - 20.0 * x)));
    }
    return 0.0;
}

}  // namespace

CutoffProfile::CutoffProfile(const CapParams& cap, CutoffShape shape)
    : CutoffProfile(cap.theta_max(), 0.25 * cap.theta_max(), shape) {}

CutoffProfile::CutoffProfile(double theta_max, double delta, CutoffShape shape)
    : theta_max_(theta_max), delta_(delta), shape_(shape) {
    if (!(delta > 0.0) || delta > theta_max) {
        throw Error(ErrorKind::InvalidArgument, "cutoff width must lie in (0, theta_max]");
    }
}

double CutoffProfile::operator()(double theta) const noexcept {
    return smoothstep((theta - support_begin()) / delta_, shape_);
}

Vec3 reference_point(const SurfacePoint& p, const CapParams& cap) {
    const double st = std::sin(p.theta);
    return {cap.R * std::sin(p.phi) * st, cap.R * std::cos(p.phi) * st,
            cap.R * std::cos(p.theta) + cap.H_center};
}

Vec3 reference_normal(const SurfacePoint& p) {
    const double st = std::sin(p.theta);
    return {std::sin(p.phi) * st, std::cos(p.phi) * st, std::cos(p.theta)};
}

Vec3 polar_tangent(const SurfacePoint& p) {
    const double ct = std::cos(p.theta);
    return {std::sin(p.phi) * ct, std::cos(p.phi) * ct, -std::sin(p.theta)};
}

CurvilinearChart::CurvilinearChart(const CapParams& cap, CutoffProfile cutoff)
    : CurvilinearChart(cap, cutoff, 0.3 * cap.R) {}

CurvilinearChart::CurvilinearChart(const CapParams& cap, CutoffProfile cutoff, double epsilon0)
    : cap_(cap), cutoff_(cutoff), epsilon0_(epsilon0), cot_alpha_(cap.cos_alpha / cap.sin_alpha) {}

void CurvilinearChart::check_offset(double w) const {
    if (!(std::abs(w) < epsilon0_)) {
        std::ostringstream os;
        os.precision(17);
        os << "|w| = " << std::abs(w) << " >= epsilon0 = " << epsilon0_;
        throw Error(ErrorKind::OffsetOutOfChart, os.str());
    }
}

Vec3 CurvilinearChart::psi(const SurfacePoint& p, double w) const {
    check_offset(w);
    const double tangential = -w * cutoff_(p.theta) * cot_alpha_;
    return reference_point(p, cap_) + w * reference_normal(p) + tangential * polar_tangent(p);
}

Vec3 CurvilinearChart::dpsi_dw(const SurfacePoint& p, double w) const {
    check_offset(w);
    return reference_normal(p) - cutoff_(p.theta) * cot_alpha_ * polar_tangent(p);
}

}  // namespace capflow
