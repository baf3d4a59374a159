#include "capflow/cap_geometry.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "capflow/errors.hpp"

namespace capflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_parameters(double a, double b) {
    if (!(b > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "line tension b must be positive");
    }
    if (!(a > -1.0)) {
        throw Error(ErrorKind::NoStationaryCap, "a <= -1 admits no stationary cap");
    }
}

std::string format_bound(double x) {
    if (std::isinf(x)) return "inf";
    // Prefer the simple fractions that show up in the closed-form ranges.
    for (int den = 1; den <= 12; ++den) {
        const double num = x * den;
        if (std::abs(num - std::round(num)) < 1e-12 * std::max(1.0, std::abs(num))) {
            std::ostringstream os;
            os << static_cast<long long>(std::round(num));
            if (den != 1) os << '/' << den;
            return os.str();
        }
    }
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

}  // namespace

bool Interval::bounded() const noexcept { return std::isfinite(hi); }

std::string Interval::to_string() const {
    return "(" + format_bound(lo) + ", " + format_bound(hi) + ")";
}

double CapParams::theta_max() const noexcept { return std::numbers::pi - alpha; }

Interval feasible_r_range(double a, double b) {
    require_parameters(a, b);
    if (a <= 1.0) return {b / (a + 1.0), kInf};
    return {b / (a + 1.0), b / (a - 1.0)};
}

Interval feasible_alpha_range(double a, double b) {
    require_parameters(a, b);
    if (a < 1.0) return {0.0, std::acos(-a)};
    return {0.0, std::numbers::pi};
}

double critical_line_tension(double R, double cos_alpha, double sin_alpha) {
    return -R * sin_alpha * sin_alpha * cos_alpha / 3.0;
}

std::optional<double> c_alpha_coefficient(double R, double cos_alpha, double sin_alpha, double b) {
    const double s2 = sin_alpha * sin_alpha;
    const double den = R * s2 - b * cos_alpha;
    if (std::abs(den) < kDegenerateDenominator * R) return std::nullopt;
    return (R * cos_alpha * s2 - b) / den;
}

std::optional<double> c_alpha_coefficient(const CapParams& cap) {
    return c_alpha_coefficient(cap.R, cap.cos_alpha, cap.sin_alpha, cap.b);
}

namespace {

CapParams populate(double a, double b, double r, double cos_alpha) {
    if (std::abs(cos_alpha) > 1.0 - kCosineMargin) {
        std::ostringstream os;
        os.precision(17);
        os << "cos(alpha) = " << cos_alpha << " at the detachment/flattening limit";
        throw Error(ErrorKind::NoStationaryCap, os.str());
    }
    CapParams cap;
    cap.a = a;
    cap.b = b;
    cap.r = r;
    cap.cos_alpha = cos_alpha;
    // (1-c)(1+c) keeps sin accurate when |c| is close to 1.
    cap.sin_alpha = std::sqrt((1.0 - cos_alpha) * (1.0 + cos_alpha));
    cap.alpha = std::atan2(cap.sin_alpha, cos_alpha);
    cap.R = r / cap.sin_alpha;
    cap.H_center = cap.R * cos_alpha;
    cap.c_alpha = c_alpha_coefficient(cap.R, cos_alpha, cap.sin_alpha, b);
    cap.c_crit = critical_line_tension(cap.R, cos_alpha, cap.sin_alpha);
    return cap;
}

}  // namespace

CapParams make_cap(double a, double b, double r) {
    const Interval range = feasible_r_range(a, b);
    if (!range.contains(r)) {
        throw Error(ErrorKind::NoStationaryCap, "r outside " + range.to_string());
    }
    return populate(a, b, r, b / r - a);
}

CapParams cap_from_angle(double a, double b, double alpha) {
    const Interval range = feasible_alpha_range(a, b);
    if (!range.contains(alpha)) {
        throw Error(ErrorKind::NoStationaryCap, "alpha outside " + range.to_string());
    }
    const double c = std::cos(alpha);
    const double r = b / (c + a);
    return populate(a, b, r, b / r - a);
}

CapParams make_degenerate_cap(double alpha, double b) {
    // r sin = b cos together with cos = b/r - a gives a = tan - cos.
    const double c = std::cos(alpha);
    if (!(c > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "degenerate branch requires cos(alpha) > 0");
    }
    const double a = std::tan(alpha) - c;
    const double r = b * c / std::sin(alpha);
    CapParams cap = populate(a, b, r, c);
    cap.c_alpha.reset();
    return cap;
}

CapReference ssc_reference(const CapParams& cap) {
    const double R = cap.R;
    return CapReference{
        .mean_curvature = -2.0 / R,
        .second_form_sq = 2.0 / (R * R),
        .gauss_curvature = 1.0 / (R * R),
        .contact_curvature = -1.0 / cap.r,
        .second_form_conormal = -1.0 / R,
        .tangent_conormal_rate = 1.0 / (R * cap.sin_alpha),
    };
}

}  // namespace capflow
