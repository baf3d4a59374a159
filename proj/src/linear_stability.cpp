#include "capflow/linear_stability.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "capflow/errors.hpp"
#include "capflow/io.hpp"
#include "capflow/surface_calculus.hpp"

namespace capflow {

namespace {

// Three-point Gauss-Legendre on [0, 1].
constexpr std::array<double, 3> kGaussX = {0.11270166537925831148, 0.5, 0.88729833462074168852};
constexpr std::array<double, 3> kGaussW = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

constexpr double kImagTolerance = 1e-8;
constexpr double kHalfsphereTolerance = 1e-12;

ModeSpectrum symmetric_solve(const Eigen::MatrixXd& K, const Eigen::MatrixXd& M, int k, int first) {
    const Eigen::Index n = K.rows() - first;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K.bottomRightCorner(n, n),
                                                                 M.bottomRightCorner(n, n));
    if (es.info() != Eigen::Success) {
        throw Error(ErrorKind::SolverFailure, "generalized eigensolver did not converge for k = " + std::to_string(k));
    }
    ModeSpectrum out;
    out.k = k;
    out.values.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);
    out.vectors = Eigen::MatrixXd::Zero(K.rows(), n);
    out.vectors.bottomRows(n) = es.eigenvectors();
    return out;
}

}  // namespace

ModeSystem assemble_mode(int k, const CapParams& cap, int n_theta, double d) {
    if (k < 0) throw Error(ErrorKind::InvalidMode, "wavenumber must be non-negative");
    if (n_theta < 16) throw Error(ErrorKind::InvalidArgument, "n_theta must be >= 16");
    const int n = n_theta;
    ModeSystem sys;
    sys.k = k;
    sys.theta_max = cap.theta_max();
    sys.h = sys.theta_max / n;
    sys.pole_constrained = k >= 1;
    sys.K = Eigen::MatrixXd::Zero(n + 1, n + 1);
    sys.M = Eigen::MatrixXd::Zero(n + 1, n + 1);
    const double h = sys.h;
    const double k2 = static_cast<double>(k) * k;
    const double R2 = cap.R * cap.R;
    for (int e = 0; e < n; ++e) {
        const double t0 = e * h;
        for (int q = 0; q < 3; ++q) {
            const double t = t0 + kGaussX[q] * h;
            const double w = kGaussW[q] * h;
            const double s = std::sin(t);
            const double phi[2] = {1.0 - kGaussX[q], kGaussX[q]};
            const double dphi[2] = {-1.0 / h, 1.0 / h};
            for (int a = 0; a < 2; ++a) {
                for (int b = 0; b < 2; ++b) {
                    sys.K(e + a, e + b) += w * (dphi[a] * dphi[b] * s + (k2 / s - 2.0 * s) * phi[a] * phi[b]);
                    sys.M(e + a, e + b) += w * R2 * s * phi[a] * phi[b];
                }
            }
        }
    }
    const double s2 = cap.sin_alpha * cap.sin_alpha;
    sys.K(n, n) += d * (cap.cos_alpha - cap.b * (1.0 - k2) / (cap.R * s2));
    sys.M(n, n) += d * cap.R / cap.sin_alpha;
    return sys;
}

ModeSpectrum solve_mode(const ModeSystem& sys) { return symmetric_solve(sys.K, sys.M, sys.k, sys.first_dof()); }

Eigen::VectorXd mode0_mean_functional(const ModeSystem& sys, const CapParams& cap) {
    const Eigen::Index n = sys.nodes() - 1;
    const double R2 = cap.R * cap.R;
    // R^2 int u sin = sum of mass rows against ones, without the boundary mass.
    Eigen::VectorXd m = Eigen::VectorXd::Zero(n + 1);
    for (Eigen::Index e = 0; e < n; ++e) {
        for (int q = 0; q < 3; ++q) {
            const double t = (e + kGaussX[q]) * sys.h;
            const double w = kGaussW[q] * sys.h * std::sin(t);
            m(e) += 2.0 * w * (1.0 - kGaussX[q]);
            m(e + 1) += 2.0 * w * kGaussX[q];
        }
    }
    // Outward flux u_theta at the contact circle, one-sided second order.
    const double flux = cap.sin_alpha / (2.0 * sys.h);
    m(n) += 3.0 * flux;
    m(n - 1) -= 4.0 * flux;
    m(n - 2) += flux;
    return m / (R2 * (1.0 + cap.cos_alpha));
}

ModeSpectrum nonlocal_mode0(const ModeSystem& sys, const CapParams& cap) {
    if (sys.k != 0) throw Error(ErrorKind::InvalidMode, "nonlocal correction applies to k = 0 only");
    const Eigen::Index n = sys.nodes();
    // Load of the constant function in the interior: R^2 int phi_i sin.
    Eigen::VectorXd load = sys.M * Eigen::VectorXd::Ones(n);
    load(n - 1) -= cap.R / cap.sin_alpha;
    const Eigen::VectorXd m = mode0_mean_functional(sys, cap);
    const Eigen::MatrixXd A = sys.K + load * m.transpose();

    const Eigen::LLT<Eigen::MatrixXd> llt(sys.M);
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::SolverFailure, "mass matrix is not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    Eigen::MatrixXd B = L.triangularView<Eigen::Lower>().solve(A);
    B = L.triangularView<Eigen::Lower>().solve(B.transpose()).transpose();

    Eigen::EigenSolver<Eigen::MatrixXd> es(B);
    if (es.info() != Eigen::Success) throw Error(ErrorKind::SolverFailure, "nonsymmetric eigensolver did not converge");
    const Eigen::VectorXcd lam = es.eigenvalues();
    const double radius = lam.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        if (std::abs(lam(i).imag()) > kImagTolerance * radius) {
            std::ostringstream os;
            os << "eigenvalue " << lam(i).real() << " + " << lam(i).imag() << "i";
            throw Error(ErrorKind::ComplexSpectrum, os.str());
        }
    }
    std::vector<Eigen::Index> order(lam.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return lam(x).real() < lam(y).real(); });

    const Eigen::MatrixXd Y = es.eigenvectors().real();
    ModeSpectrum out;
    out.k = 0;
    out.vectors.resize(n, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        out.values.push_back(lam(order[c]).real());
        Eigen::VectorXd u = L.transpose().triangularView<Eigen::Upper>().solve(Y.col(order[c]));
        out.vectors.col(c) = u / std::sqrt(u.dot(sys.M * u));
    }
    return out;
}

SpectrumReport spectrum(const CapParams& cap, int k_max, int n_theta) {
    if (k_max < 2) throw Error(ErrorKind::InvalidArgument, "k_max must be >= 2");
    SpectrumReport rep;
    rep.a = cap.a;
    rep.b = cap.b;
    rep.r = cap.r;
    rep.alpha = cap.alpha;
    rep.R = cap.R;
    rep.c_crit = cap.c_crit;
    rep.n_theta = n_theta;
    rep.modes.push_back(nonlocal_mode0(assemble_mode(0, cap, n_theta), cap));
    for (int k = 1; k <= k_max; ++k) rep.modes.push_back(solve_mode(assemble_mode(k, cap, n_theta)));

    // Union with azimuthal multiplicity: modes k >= 1 come as cos/sin pairs.
    std::vector<double> all;
    for (const auto& m : rep.modes) {
        for (double v : m.values) {
            all.push_back(v);
            if (m.k > 0) all.push_back(v);
        }
    }
    std::sort(all.begin(), all.end());
    double scale = 0.0;
    for (std::size_t i = 0; i < std::min<std::size_t>(5, all.size()); ++i) scale = std::max(scale, std::abs(all[i]));
    const double h = cap.theta_max() / n_theta;
    rep.tol_null = 10.0 * scale * h * h;
    rep.min_positive = std::numeric_limits<double>::infinity();
    for (double v : all) {
        if (std::abs(v) < rep.tol_null) ++rep.nullspace_dim;
        if (v > rep.tol_null) rep.min_positive = std::min(rep.min_positive, v);
        if (v < -rep.tol_null) rep.has_negative = true;
    }
    return rep;
}

std::vector<std::vector<double>> halfsphere_reference(const CapParams& cap, int k_max, int l_max) {
    if (std::abs(cap.cos_alpha) > kHalfsphereTolerance) {
        throw Error(ErrorKind::NotHalfsphere, "reference spectrum needs cos(alpha) = 0");
    }
    std::vector<std::vector<double>> table(k_max + 1);
    for (int k = 0; k <= k_max; ++k) {
        for (int l = k; l <= l_max; l += 2) table[k].push_back((l * (l + 1.0) - 2.0) / (cap.R * cap.R));
    }
    return table;
}

HomotopyCurves homotopy_spectrum(const CapParams& cap, const std::vector<double>& d_values, int k_max,
                                 int n_theta, int n_eigs) {
    if (std::abs(cap.cos_alpha) > kHalfsphereTolerance) {
        throw Error(ErrorKind::NotHalfsphere, "homotopy is defined on the half-sphere");
    }
    HomotopyCurves curves;
    curves.d_values = d_values;
    for (double d : d_values) {
        if (d < 0.0 || d > 1.0) throw Error(ErrorKind::InvalidArgument, "d must lie in [0, 1]");
        std::vector<std::vector<double>> per_mode;
        for (int k = 0; k <= k_max; ++k) {
            auto sp = solve_mode(assemble_mode(k, cap, n_theta, d));
            sp.values.resize(std::min<std::size_t>(n_eigs, sp.values.size()));
            per_mode.push_back(std::move(sp.values));
        }
        curves.values.push_back(std::move(per_mode));
    }
    return curves;
}

double max_adjacent_jump(const HomotopyCurves& curves, int n_eigs) {
    double jump = 0.0;
    for (std::size_t s = 1; s < curves.values.size(); ++s) {
        for (std::size_t k = 0; k < curves.values[s].size(); ++k) {
            const auto& prev = curves.values[s - 1][k];
            const auto& cur = curves.values[s][k];
            for (std::size_t i = 0; i < std::min<std::size_t>(n_eigs, cur.size()); ++i) {
                jump = std::max(jump, std::abs(cur[i] - prev[i]));
            }
        }
    }
    return jump;
}

NullBasis analytic_nullspace(const CapParams& cap, const Grid& grid) {
    NullBasis nb;
    const auto c = cap.c_alpha;
    nb.v0 = c ? Field::sample(grid, [&](double, double t) { return 1.0 + *c * std::cos(t); })
              : Field::sample(grid, [](double, double t) { return std::cos(t); });
    nb.v1 = Field::sample(grid, [](double p, double t) { return std::sin(p) * std::sin(t); });
    nb.v2 = Field::sample(grid, [](double p, double t) { return std::cos(p) * std::sin(t); });
    return nb;
}

double reference_integral(const Field& u, const CapParams& cap, const Grid& grid) {
    double sum = 0.0;
    for (int j = 0; j < grid.n_theta(); ++j) {
        double row = 0.0;
        for (int i = 0; i < grid.n_phi(); ++i) row += u.at(i, j);
        sum += row * std::sin(grid.theta(j));
    }
    return sum * cap.R * cap.R * grid.h_phi() * grid.h_theta();
}

Field apply_A0(const Field& rho, const CapParams& cap, const Grid& grid) {
    Field out = laplace_beltrami_reference(grid, rho, cap);
    const double sigma2 = 2.0 / (cap.R * cap.R);
    out.interior += sigma2 * rho.interior;
    double area = 0.0;
    for (int j = 0; j < grid.n_theta(); ++j) area += std::sin(grid.theta(j));
    area *= cap.R * cap.R * grid.h_phi() * grid.h_theta() * grid.n_phi();
    const double mean = reference_integral(out, cap, grid) / area;
    out.interior = (mean - out.interior.array()).matrix();

    const int n = grid.n_theta();
    const double s = cap.sin_alpha;
    const double beta = cap.b / (cap.R * s * s);
    auto val = [&](int i, int j) { return rho.value(i, j); };
    for (int i = 0; i < grid.n_phi(); ++i) {
        const double rt = apply_theta<double>(grid, grid.d_theta(n), i, val);
        const double rpp = phi_second_derivative<double>(grid, i, n, val);
        const double r0 = rho.boundary[i];
        out.boundary[i] = -(s / cap.R) * (-s * rt - cap.cos_alpha * r0 + beta * (rpp + r0));
    }
    return out;
}

Eigen::MatrixXd assemble_A0_dense(const CapParams& cap, const Grid& grid) {
    Field unit = Field::zeros(grid);
    const Eigen::Index n = unit.size();
    Eigen::MatrixXd A(n, n);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    for (Eigen::Index c = 0; c < n; ++c) {
        e(c) = 1.0;
        A.col(c) = apply_A0(Field::from_stacked(grid, e), cap, grid).stacked();
        e(c) = 0.0;
    }
    return A;
}

double weighted_inner(const Field& u, const Field& v, const CapParams& cap, const Grid& grid) {
    Field prod = u;
    prod.interior = u.interior.cwiseProduct(v.interior);
    const double surface = reference_integral(prod, cap, grid);
    const double edge = u.boundary.dot(v.boundary) * cap.R * cap.sin_alpha * grid.h_phi();
    return surface + edge / (cap.sin_alpha * cap.sin_alpha);
}

Projection project_nullspace(const Field& v, const CapParams& cap, const Grid& grid) {
    const NullBasis nb = analytic_nullspace(cap, grid);
    Projection p;
    p.a0 = reference_integral(v, cap, grid) / reference_integral(nb.v0, cap, grid);
    p.a1 = weighted_inner(v, nb.v1, cap, grid) / weighted_inner(nb.v1, nb.v1, cap, grid);
    p.a2 = weighted_inner(v, nb.v2, cap, grid) / weighted_inner(nb.v2, nb.v2, cap, grid);
    p.remainder = v - p.a0 * nb.v0 - p.a1 * nb.v1 - p.a2 * nb.v2;
    p.remainder_norm = std::sqrt(weighted_inner(p.remainder, p.remainder, cap, grid));
    return p;
}

double inhomogeneous_residual(const CapParams& cap, int n_theta) {
    const ModeSystem sys = assemble_mode(0, cap, n_theta);
    const ModeSpectrum sp = solve_mode(sys);
    std::size_t best = 0;
    for (std::size_t i = 1; i < sp.values.size(); ++i) {
        if (std::abs(sp.values[i]) < std::abs(sp.values[best])) best = i;
    }
    Eigen::VectorXd load = sys.M * Eigen::VectorXd::Ones(sys.nodes());
    load(sys.nodes() - 1) -= cap.R / cap.sin_alpha;
    const Eigen::VectorXd z = sp.vectors.col(static_cast<Eigen::Index>(best));
    return std::abs(z.dot(load)) / (z.norm() * load.norm());
}

Field mode_field(const Grid& grid, const ModeSystem& sys, const Eigen::VectorXd& nodal, int k, bool sine) {
    if (std::abs(grid.theta_max() - sys.theta_max) > 1e-12 * sys.theta_max) {
        throw Error(ErrorKind::InvalidArgument, "grid and mode system cover different polar ranges");
    }
    const int n = static_cast<int>(sys.nodes()) - 1;
    auto profile = [&](double t) {
        const int c = std::clamp(static_cast<int>(std::floor(t / sys.h)) - 1, 0, n - 3);
        const double xs[4] = {c * sys.h, (c + 1) * sys.h, (c + 2) * sys.h, (c + 3) * sys.h};
        const auto w = fd_weights(t, xs, 0);
        double g = 0.0;
        for (int q = 0; q < 4; ++q) g += w[q] * nodal(c + q);
        return g;
    };
    return Field::sample(grid, [&](double p, double t) {
        return profile(t) * (sine ? std::sin(k * p) : std::cos(k * p));
    });
}

const char* to_string(Region region) {
    switch (region) {
        case Region::S0: return "S0";
        case Region::SPlus: return "S+";
        case Region::SMinus: return "S-";
    }
    return "?";
}

Region classify(const CapParams& cap) {
    if (std::abs(cap.cos_alpha) <= kHalfsphereTolerance) return Region::S0;
    return cap.cos_alpha > 0.0 ? Region::SPlus : Region::SMinus;
}

RRule RRule::parse(const std::string& text) {
    RRule rule;
    if (text == "mid") return rule;
    const auto colon = text.find(':');
    if (colon != std::string::npos) {
        const std::string key = text.substr(0, colon);
        rule.value = std::stod(text.substr(colon + 1));
        if (key == "r") {
            rule.kind = Kind::FixedR;
            return rule;
        }
        if (key == "alpha") {
            rule.kind = Kind::FixedAlpha;
            return rule;
        }
    }
    throw Error(ErrorKind::InvalidArgument, "r rule must be mid, r:<value> or alpha:<value>");
}

std::string RRule::to_string() const {
    switch (kind) {
        case Kind::Mid: return "mid";
        case Kind::FixedR: return "r:" + format_number(value);
        case Kind::FixedAlpha: return "alpha:" + format_number(value);
    }
    return "mid";
}

double mid_interval_r(double a, double b) {
    const Interval range = feasible_r_range(a, b);
    return range.bounded() ? 0.5 * (range.lo + range.hi) : 2.0 * range.lo;
}

std::vector<StabilityCell> scan_parameters(const std::vector<double>& a_list, const std::vector<double>& b_list,
                                           const RRule& rule, int k_max, int n_theta) {
    std::vector<StabilityCell> cells;
    for (double a : a_list) {
        for (double b : b_list) {
            StabilityCell cell;
            cell.a = a;
            cell.b = b;
            try {
                CapParams cap;
                switch (rule.kind) {
                    case RRule::Kind::Mid: cap = make_cap(a, b, mid_interval_r(a, b)); break;
                    case RRule::Kind::FixedR: cap = make_cap(a, b, rule.value); break;
                    case RRule::Kind::FixedAlpha: cap = cap_from_angle(a, b, rule.value); break;
                }
                cell.region = classify(cap);
                cell.critical_margin = cap.b - cap.c_crit;
                cell.above_critical = cap.above_critical();
                cell.report = spectrum(cap, k_max, n_theta);
            } catch (const Error& e) {
                cell.status = to_string(e.kind());
                cell.report.a = a;
                cell.report.b = b;
            }
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

void write_spectrum_csv(std::ostream& os, const SpectrumReport& report, int n_eigs) {
    os << "a,b,r,alpha,k,index,lambda\n";
    for (const auto& m : report.modes) {
        const std::size_t count = std::min<std::size_t>(n_eigs, m.values.size());
        for (std::size_t i = 0; i < count; ++i) {
            os << format_number(report.a) << ',' << format_number(report.b) << ',' << format_number(report.r) << ','
               << format_number(report.alpha) << ',' << m.k << ',' << i << ',' << format_number(m.values[i]) << '\n';
        }
    }
}

}  // namespace capflow
