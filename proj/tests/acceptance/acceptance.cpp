// One PASS/FAIL line per acceptance criterion; nonzero exit if any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "capflow/cap_geometry.hpp"
#include "capflow/errors.hpp"
#include "capflow/flow_sim.hpp"
#include "capflow/linear_stability.hpp"

using namespace capflow;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

int failures = 0;

void run(int id, const char* name, const std::function<Verdict()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!v.pass) ++failures;
    std::printf("%s %2d %s: %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str(), secs);
    std::fflush(stdout);
}

const CapParams kCap = make_cap(0.5, 0.3, 0.4);

// Sampled caps over S0, S+ and S- with b above the critical line tension.
std::vector<CapParams> sampled_caps() {
    const double abr[12][3] = {{1.0, 0.5, 0.5},  {1.0, 0.2, 0.2},  {1.0, 1.0, 1.0},   {1.0, 0.3, 0.3},
                               {0.5, 0.3, 0.4},  {0.0, 0.2, 0.4},  {0.5, 0.5, 0.6},   {-0.5, 0.3, 0.8},
                               {2.0, 1.0, 0.8},  {1.5, 0.5, 0.6},  {3.0, 1.0, 0.4},   {1.2, 0.3, 0.4}};
    std::vector<CapParams> caps;
    for (const auto& p : abr) caps.push_back(make_cap(p[0], p[1], p[2]));
    return caps;
}

Verdict stationary_algebra() {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> ua(-0.95, 3.0), ub(0.01, 2.0), unit(0.0, 1.0);
    double worst_cos = 0.0, worst_r = 0.0;
    int sign_mismatch = 0;
    for (int n = 0; n < 1000; ++n) {
        const double a = ua(rng), b = ub(rng);
        const Interval range = feasible_r_range(a, b);
        const double hi = range.bounded() ? range.hi : range.lo + 5.0;
        const double r = range.lo + (0.02 + 0.96 * unit(rng)) * (hi - range.lo);
        const CapParams cap = make_cap(a, b, r);
        worst_cos = std::max(worst_cos, std::abs(std::cos(cap.alpha) - (b / r - a)));
        worst_r = std::max(worst_r, std::abs(cap.R * std::sin(cap.alpha) - r) / r);
        const double c = b / r - a;
        const int expect = c > 0 ? -1 : (c < 0 ? 1 : 0);
        const int got = cap.c_crit > 0 ? 1 : (cap.c_crit < 0 ? -1 : 0);
        if (expect != got) ++sign_mismatch;
    }
    return {worst_cos <= 1e-12 && worst_r <= 1e-12 && sign_mismatch == 0,
            fmt("max|cos-(b/r-a)|=%.2e max|R sin-r|/r=%.2e sign mismatches=%d", worst_cos, worst_r, sign_mismatch)};
}

double halfsphere_error(int n_theta) {
    const CapParams hs = make_cap(1.0, 0.5, 0.5);
    const auto curves = homotopy_spectrum(hs, {0.0}, 2, n_theta, 4);
    double worst = 0.0;
    for (int k = 0; k <= 2; ++k) {
        for (int i = 0; i < 4; ++i) {
            const int l = k + 2 * i;
            const double exact = (l * (l + 1) - 2) / 0.25;
            const double err = std::abs(curves.values[0][k][i] - exact) / std::max(std::abs(exact), 1.0 / 0.25);
            worst = std::max(worst, err);
        }
    }
    return worst;
}

Verdict halfsphere_spectrum() {
    const double e400 = halfsphere_error(400);
    const double e800 = halfsphere_error(800);
    return {e400 < 1e-3 && e800 < 2.5e-4, fmt("rel err n=400 %.2e, n=800 %.2e, order %.2f", e400, e800, std::log2(e400 / e800))};
}

Verdict nullspace_basis() {
    int bad_dim = 0;
    double worst_ratio = 1e300;
    for (const auto& cap : sampled_caps()) {
        if (!cap.above_critical()) return {false, "sampled cap below the critical line tension"};
        if (spectrum(cap, 4, 200).nullspace_dim != 3) ++bad_dim;
        const Grid coarse = Grid::for_cap(cap, 32, 16), fine = Grid::for_cap(cap, 64, 32);
        const NullBasis bc = analytic_nullspace(cap, coarse), bf = analytic_nullspace(cap, fine);
        const Field* c[3] = {&bc.v0, &bc.v1, &bc.v2};
        const Field* f[3] = {&bf.v0, &bf.v1, &bf.v2};
        for (int i = 0; i < 3; ++i) {
            worst_ratio = std::min(worst_ratio, apply_A0(*c[i], cap, coarse).max_abs() / apply_A0(*f[i], cap, fine).max_abs());
        }
    }
    return {bad_dim == 0 && worst_ratio >= 3.5, fmt("caps with dim != 3: %d, min residual ratio %.2f", bad_dim, worst_ratio)};
}

Verdict spectral_positivity() {
    double min_pos = 1e300, min_k2 = 1e300;
    for (const auto& cap : sampled_caps()) {
        const auto rep = spectrum(cap, 4, 200);
        min_pos = std::min(min_pos, rep.min_positive);
        for (const auto& m : rep.modes) {
            if (m.k >= 2) min_k2 = std::min(min_k2, *std::min_element(m.values.begin(), m.values.end()));
        }
    }
    return {min_pos > 0.0 && min_k2 > 0.0, fmt("min min_positive %.4g, min k>=2 eigenvalue %.4g", min_pos, min_k2)};
}

Verdict lambda0_exclusion() {
    const CapParams hs = make_cap(1.0, 0.5, 0.5);
    const auto sp = nonlocal_mode0(assemble_mode(0, hs, 400), hs);
    const double l0 = -2.0 / (hs.R * hs.R);
    double closest = 1e300;
    for (double v : sp.values) closest = std::min(closest, std::abs(v - l0) / std::abs(l0));
    return {closest > 0.05, fmt("closest relative distance to -8: %.4f", closest)};
}

Verdict degenerate_branch() {
    const CapParams cap = make_degenerate_cap(0.9, 0.2);
    const double defect = std::abs(cap.R * cap.sin_alpha * cap.sin_alpha - cap.b * cap.cos_alpha);
    std::vector<double> angles, lambdas, residuals;
    for (int n : {50, 100, 200}) {
        const ModeSystem sys = assemble_mode(0, cap, n);
        const auto sp = solve_mode(sys);
        std::size_t idx = 0;
        for (std::size_t i = 1; i < sp.values.size(); ++i) {
            if (std::abs(sp.values[i]) < std::abs(sp.values[idx])) idx = i;
        }
        Eigen::VectorXd c(sys.nodes());
        for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = std::cos(i * sys.h);
        const Eigen::VectorXd v = sp.vectors.col(static_cast<Eigen::Index>(idx));
        angles.push_back(std::acos(std::min(1.0, std::abs(v.dot(c)) / (v.norm() * c.norm()))));
        lambdas.push_back(sp.values[idx]);
        residuals.push_back(inhomogeneous_residual(cap, n));
    }
    const double o1 = std::log2(angles[0] / angles[1]), o2 = std::log2(angles[1] / angles[2]);
    const double lam = std::max({std::abs(lambdas[0]), std::abs(lambdas[1]), std::abs(lambdas[2])});
    const double rmin = *std::min_element(residuals.begin(), residuals.end());
    const double rmax = *std::max_element(residuals.begin(), residuals.end());
    const bool ok = defect < 1e-12 && o1 > 1.5 && o2 > 1.5 && lam < 0.05 && rmin > 0.1 && rmin > 0.5 * rmax;
    return {ok, fmt("angle orders %.2f %.2f, max|lambda| %.2e, residuals %.3f %.3f %.3f", o1, o2, lam, residuals[0],
                    residuals[1], residuals[2])};
}

Verdict linear_decay() {
    const Grid grid = Grid::for_cap(kCap, 32, 32);
    const ModeIndex m = smallest_positive_mode(spectrum(kCap, 4, 128));
    const FlowProblem problem(kCap, grid, CutoffProfile(kCap), FlowModel::Linear);
    EvolveOptions o;
    o.T_end = 5.0 / m.lambda;
    o.sample_every = 100;
    const auto traj = evolve(eigenfunction_perturbation(kCap, grid, m.k, m.index, 0.01), problem, o);
    const DecayFit fit = decay_rate(traj, 0.5);
    const double rel = std::abs(fit.rate - m.lambda) / m.lambda;
    return {traj.status == "completed" && rel < 0.02 && fit.r_squared >= 0.999,
            fmt("mode k=%d lambda %.6f, rate %.6f (rel %.2e), R^2 %.6f", m.k, m.lambda, fit.rate, rel, fit.r_squared)};
}

Verdict nonlinear_convergence() {
    const Grid grid = Grid::for_cap(kCap, 64, 64);
    const FlowProblem problem(kCap, grid, CutoffProfile(kCap));
    const double lambda = smallest_positive_mode(spectrum(kCap, 4, 128)).lambda;
    EvolveOptions o;
    o.T_end = 5.0 / lambda;
    o.sample_every = 1000;
    const auto rho = Field::sample(grid, [](double p, double t) { return 0.01 * std::sin(t) * std::cos(2 * p); });
    const auto traj = evolve(rho, problem, o);
    const SphereFit& f = traj.final_fit;
    const double defect = std::abs(f.cos_alpha - (kCap.b / f.r_contact - kCap.a));
    const bool ok = traj.status == "completed" && traj.max_volume_drift < 1e-4 && traj.max_energy_increase <= 1e-10 &&
                    f.residual < 1e-4 * f.R && defect < 1e-3;
    return {ok, fmt("%ld steps, volume drift %.2e, max energy increase %.2e, fit residual/R %.2e, angle defect %.2e",
                    traj.steps, traj.max_volume_drift, traj.max_energy_increase, f.residual / f.R, defect)};
}

// Remainder of the exact chart representation of the reference cap shifted by dx.
double translated_cap_remainder(const FlowProblem& problem, double dx) {
    const CapParams& cap = problem.cap;
    const Grid& g = problem.grid;
    const Vec3 center(dx, 0.0, cap.H_center);
    Field rho = Field::zeros(g);
    for (int i = 0; i < g.n_phi(); ++i) {
        for (int j = 0; j < g.rows(); ++j) {
            const int k = g.node(i, j);
            const Vec3 p = problem.chart.base[k] - center;
            const Vec3& u = problem.chart.direction[k];
            const double A = u.squaredNorm(), B = 2.0 * p.dot(u), C = p.squaredNorm() - cap.R * cap.R;
            const double root = std::sqrt(B * B - 4.0 * A * C);
            const double w1 = (-B + root) / (2.0 * A), w2 = (-B - root) / (2.0 * A);
            (j < g.n_theta() ? rho.at(i, j) : rho.boundary[i]) = std::abs(w1) < std::abs(w2) ? w1 : w2;
        }
    }
    return project_nullspace(rho, cap, g).remainder_norm;
}

Verdict translation_neutrality() {
    const Grid grid = Grid::for_cap(kCap, 32, 32);
    const FlowProblem problem(kCap, grid, CutoffProfile(kCap));
    EvolveOptions o;
    o.T_end = 5.0 / smallest_positive_mode(spectrum(kCap, 4, 128)).lambda;
    o.sample_every = 200;
    const auto traj = evolve(0.02 * analytic_nullspace(kCap, grid).v1, problem, o);
    double worst = 0.0;
    for (const auto& s : traj.samples) worst = std::max(worst, s.remainder);
    const double shift = traj.final_fit.center.x();
    const double drift_y = std::abs(traj.final_fit.center.y());
    return {traj.status == "completed" && worst < 5e-4 && shift > 0.01 && drift_y < 1e-6,
            fmt("fitted center x %.5f (y %.1e), max remainder %.2e; exact cap shifted by 0.02 has remainder %.2e",
                shift, drift_y, worst, translated_cap_remainder(problem, 0.02))};
}

Verdict homotopy_continuity() {
    const CapParams hs = make_cap(1.0, 0.5, 0.5);
    auto jump = [&](int steps) {
        std::vector<double> d(steps + 1);
        for (int i = 0; i <= steps; ++i) d[i] = static_cast<double>(i) / steps;
        return max_adjacent_jump(homotopy_spectrum(hs, d, 3, 200, 5), 5);
    };
    const double j64 = jump(64), j128 = jump(128);
    const double ratio = j128 / j64;
    return {ratio >= 0.3 && ratio <= 0.7, fmt("max jump 64 steps %.4g, 128 steps %.4g, ratio %.3f", j64, j128, ratio)};
}

struct Consistency {
    double order_min = 1e300;
    double worst = 0.0;
};

Consistency consistency(const CapParams& cap) {
    const Grid grid = Grid::for_cap(cap, 32, 32);
    const FlowProblem problem(cap, grid, CutoffProfile(cap));
    const double eps[3] = {1e-2, 5e-3, 2.5e-3};
    Consistency c;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Field w = random_smooth_perturbation(grid, seed, 1.0);
        const Field lin = rhs_linear(w, cap, grid);
        double d[3];
        for (int n = 0; n < 3; ++n) {
            const Field nl = rhs_nonlinear(make_state(problem, eps[n] * w), problem);
            d[n] = (nl - eps[n] * lin).max_abs() / (eps[n] * w.max_abs());
            c.worst = std::max(c.worst, d[n] / eps[n]);
        }
        c.order_min = std::min({c.order_min, std::log2(d[0] / d[1]), std::log2(d[1] / d[2])});
    }
    return c;
}

Verdict linearization_consistency() {
    const Consistency generic = consistency(kCap);
    const Consistency hs = consistency(make_cap(1.0, 0.5, 0.5));
    return {generic.order_min >= 0.9,
            fmt("cap (0.5,0.3,0.4): min order %.2f, max C %.3g; half-sphere: min order %.2f, max C %.3g", generic.order_min,
                generic.worst, hs.order_min, hs.worst)};
}

}  // namespace

int main() {
    run(1, "stationary-cap algebra", stationary_algebra);
    run(2, "half-sphere reference spectrum", halfsphere_spectrum);
    run(3, "nullspace dimension and basis", nullspace_basis);
    run(4, "spectral positivity", spectral_positivity);
    run(5, "exclusion of -2/R^2", lambda0_exclusion);
    run(6, "degenerate branch", degenerate_branch);
    run(7, "linear flow decay", linear_decay);
    run(8, "nonlinear flow conservation and convergence", nonlinear_convergence);
    run(9, "translation-mode neutrality", translation_neutrality);
    run(10, "homotopy continuity", homotopy_continuity);
    run(11, "linearization consistency", linearization_consistency);
    std::printf("%d of 11 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
