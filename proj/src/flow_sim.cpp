#include "capflow/flow_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "capflow/errors.hpp"
#include "capflow/io.hpp"

namespace capflow {

namespace {

constexpr double kAngleMargin = 1e-3;
constexpr double kDecayFloor = 1e-13;

}  // namespace

FlowModel parse_flow_model(const std::string& text) {
    if (text == "nonlinear") return FlowModel::Nonlinear;
    if (text == "linear") return FlowModel::Linear;
    throw Error(ErrorKind::InvalidArgument, "flow model must be nonlinear or linear");
}

Scheme parse_scheme(const std::string& text) {
    if (text == "rk4") return Scheme::RK4;
    if (text == "euler") return Scheme::Euler;
    throw Error(ErrorKind::InvalidArgument, "scheme must be rk4 or euler");
}

PolarFilter::PolarFilter(const Grid& grid)
    : n_phi_(grid.n_phi()), n_theta_(grid.n_theta()), cutoff_(grid.n_theta()), cos_(), sin_() {
    const int nyquist = n_phi_ / 2;
    for (int j = 0; j < n_theta_; ++j) {
        const int kc = std::max(1, static_cast<int>(std::floor(2.0 * std::sin(grid.theta(j)) / grid.h_theta())));
        cutoff_[j] = std::min(kc, nyquist);
    }
    const int kmax = *std::max_element(cutoff_.begin(), cutoff_.end());
    cos_.resize(static_cast<std::size_t>(kmax + 1) * n_phi_);
    sin_.resize(cos_.size());
    for (int k = 0; k <= kmax; ++k) {
        for (int i = 0; i < n_phi_; ++i) {
            cos_[k * n_phi_ + i] = std::cos(k * grid.phi(i));
            sin_[k * n_phi_ + i] = std::sin(k * grid.phi(i));
        }
    }
}

void PolarFilter::apply(Field& f) const {
    const int nyquist = n_phi_ / 2;
    std::vector<double> row(n_phi_), ca, sa;
    for (int j = 0; j < n_theta_; ++j) {
        const int kc = cutoff_[j];
        if (kc >= nyquist) continue;
        for (int i = 0; i < n_phi_; ++i) row[i] = f.at(i, j);
        // Truncated Fourier series through mode kc.
        ca.assign(kc + 1, 0.0);
        sa.assign(kc + 1, 0.0);
        for (int k = 0; k <= kc; ++k) {
            const double* c = cos_.data() + k * n_phi_;
            const double* s = sin_.data() + k * n_phi_;
            for (int i = 0; i < n_phi_; ++i) {
                ca[k] += c[i] * row[i];
                sa[k] += s[i] * row[i];
            }
            ca[k] *= (k == 0 ? 1.0 : 2.0) / n_phi_;
            sa[k] *= 2.0 / n_phi_;
        }
        for (int i = 0; i < n_phi_; ++i) {
            double v = 0.0;
            for (int k = 0; k <= kc; ++k) v += ca[k] * cos_[k * n_phi_ + i] + sa[k] * sin_[k * n_phi_ + i];
            f.at(i, j) = v;
        }
    }
}

FlowProblem::FlowProblem(const CapParams& cap_, const Grid& grid_, const CutoffProfile& cutoff_, FlowModel model_,
                         bool balanced_)
    : cap(cap_), grid(grid_), cutoff(cutoff_), model(model_), chart(grid_, CurvilinearChart(cap_, cutoff_)),
      filter(grid_), reference_residual(Field::zeros(grid_)), balanced(balanced_) {
    if (model == FlowModel::Nonlinear && balanced) {
        reference_residual = rhs_nonlinear_raw(embed(chart, Field::zeros(grid)), chart);
    }
}

std::shared_ptr<const Embedding> FlowProblem::embedding_of(const Field& rho) const {
    auto it = std::find_if(pool_.begin(), pool_.end(), [](const auto& p) { return p.use_count() == 1; });
    if (it == pool_.end()) {
        pool_.push_back(std::make_shared<Embedding>(embed(chart, rho)));
        return pool_.back();
    }
    embed_into(**it, chart, rho);
    return *it;
}

FlowState make_state(const FlowProblem& problem, const Field& rho, double t) {
    FlowState s;
    s.t = t;
    s.rho = rho;
    s.embedding = problem.embedding_of(rho);
    return s;
}

Field rhs_nonlinear_raw(const Embedding& emb, const ChartSamples& chart) {
    const Grid& g = emb.grid;
    Field out = Field::zeros(g);
    const double hbar = mean_of_H(emb);
    for (int i = 0; i < g.n_phi(); ++i) {
        for (int j = 0; j < g.n_theta(); ++j) {
            const int k = g.node(i, j);
            out.at(i, j) = (emb.H[k] - hbar) / emb.normal[k].dot(chart.direction[k]);
        }
    }
    const BoundaryQuantities bq = boundary_quantities(emb);
    const CapParams& cap = chart.cap;
    for (int i = 0; i < g.n_phi(); ++i) {
        const double c = bq.cos_angle[i];
        if (std::abs(c) >= 1.0 - kAngleMargin) {
            std::ostringstream os;
            os << "<n_Gamma, n_D> = " << c << " at contact node " << i;
            throw Error(ErrorKind::AngleDegenerate, os.str());
        }
        const int k = g.node(i, g.n_theta());
        out.boundary[i] = (cap.a + cap.b * bq.curvature[i] + c) / bq.conormal[i].dot(chart.direction[k]);
    }
    return out;
}

Field rhs_nonlinear(const FlowState& state, const FlowProblem& problem) {
    const auto emb = state.embedding ? state.embedding : problem.embedding_of(state.rho);
    Field out = rhs_nonlinear_raw(*emb, problem.chart);
    if (problem.balanced) out -= problem.reference_residual;
    return out;
}

Field rhs_linear(const Field& rho, const CapParams& cap, const Grid& grid) {
    Field out = apply_A0(rho, cap, grid);
    out *= -1.0;
    return out;
}

double dt_stability_bound(const Grid& grid, const CapParams& cap, double c_cfl) {
    const double R2 = cap.R * cap.R;
    const PolarFilter filter(grid);
    double bound = R2 * grid.h_theta() * grid.h_theta();
    // Filtered rows keep k/sin(theta) <= 2/h_theta, the spectral scale of the polar second difference.
    for (int j = 0; j < grid.n_theta(); ++j) {
        const double s = std::sin(grid.theta(j));
        const double k = filter.cutoff(j);
        bound = std::min(bound, 4.0 * R2 * s * s / (k * k));
    }
    // Contact row: tangential diffusion b/(R^2 sin) d_phi^2 and the normal flux term.
    const double s = cap.sin_alpha;
    bound = std::min(bound, R2 * s * grid.h_phi() * grid.h_phi() / cap.b);
    bound = std::min(bound, cap.R * grid.h_theta() / (s * s));
    return c_cfl * bound;
}

namespace {

Field evaluate(const FlowState& state, const FlowProblem& problem) {
    Field f = problem.model == FlowModel::Nonlinear ? rhs_nonlinear(state, problem)
                                                     : rhs_linear(state.rho, problem.cap, problem.grid);
    problem.filter.apply(f);
    return f;
}

FlowState stage(const FlowProblem& problem, const Field& rho, double t) {
    FlowState s;
    s.t = t;
    s.rho = rho;
    if (problem.model == FlowModel::Nonlinear) s.embedding = problem.embedding_of(rho);
    return s;
}

double angle_margin(const Embedding& emb) {
    const BoundaryQuantities bq = boundary_quantities(emb);
    double margin = 1.0;
    for (double c : bq.cos_angle) margin = std::min(margin, 1.0 - std::abs(c));
    return margin;
}

}  // namespace

FlowState step(const FlowState& state, double dt, const FlowProblem& problem, Scheme scheme) {
    Field next;
    if (scheme == Scheme::Euler) {
        next = state.rho + dt * evaluate(state, problem);
    } else {
        const Field k1 = evaluate(state, problem);
        const Field k2 = evaluate(stage(problem, state.rho + (0.5 * dt) * k1, state.t + 0.5 * dt), problem);
        const Field k3 = evaluate(stage(problem, state.rho + (0.5 * dt) * k2, state.t + 0.5 * dt), problem);
        const Field k4 = evaluate(stage(problem, state.rho + dt * k3, state.t + dt), problem);
        next = state.rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    const double worst = next.max_abs();
    if (!(worst < problem.chart.epsilon0)) {
        std::ostringstream os;
        os << "max |rho| = " << worst << " left the chart";
        throw Error(ErrorKind::StepRejected, os.str());
    }
    FlowState out = stage(problem, next, state.t + dt);
    if (out.embedding && angle_margin(*out.embedding) <= kAngleMargin) {
        throw Error(ErrorKind::StepRejected, "contact angle degenerated");
    }
    return out;
}

SphereFit fit_sphere(const Embedding& emb) {
    const Eigen::Index n = static_cast<Eigen::Index>(emb.X.size());
    Eigen::MatrixXd A(n, 4);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Vec3& x = emb.X[k];
        A.row(k) << 2.0 * x.x(), 2.0 * x.y(), 2.0 * x.z(), 1.0;
        rhs(k) = x.squaredNorm();
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    if (qr.rank() < 4) throw Error(ErrorKind::DegenerateFit, "points are coplanar");
    const Eigen::Vector4d sol = qr.solve(rhs);
    SphereFit fit;
    fit.center = sol.head<3>();
    fit.R = std::sqrt(sol(3) + fit.center.squaredNorm());
    double ss = 0.0;
    for (const Vec3& x : emb.X) {
        const double d = (x - fit.center).norm() - fit.R;
        ss += d * d;
    }
    fit.residual = std::sqrt(ss / n);
    fit.cos_alpha = fit.center.z() / fit.R;
    fit.r_contact = std::sqrt(std::max(0.0, fit.R * fit.R - fit.center.z() * fit.center.z()));
    return fit;
}

namespace {

Sample diagnostics(const FlowProblem& problem, const FlowState& state) {
    const auto ptr = state.embedding ? state.embedding : problem.embedding_of(state.rho);
    const Embedding& emb = *ptr;
    Sample s;
    s.t = state.t;
    s.volume = enclosed_volume(emb);
    s.energy = energy(emb, problem.cap.a, problem.cap.b);
    s.max_rho = state.rho.max_abs();
    s.l2_rho = std::sqrt(weighted_inner(state.rho, state.rho, problem.cap, problem.grid));
    const Projection p = project_nullspace(state.rho, problem.cap, problem.grid);
    s.a0 = p.a0;
    s.a1 = p.a1;
    s.a2 = p.a2;
    s.remainder = p.remainder_norm;
    const SphereFit fit = fit_sphere(emb);
    s.fit_residual = fit.residual;
    s.fit_R = fit.R;
    s.fit_center = fit.center;
    s.angle_margin = angle_margin(emb);
    return s;
}

}  // namespace

Trajectory evolve(const Field& initial, const FlowProblem& problem, const EvolveOptions& options) {
    if (!(options.T_end > 0.0)) throw Error(ErrorKind::InvalidArgument, "T_end must be positive");
    if (options.sample_every < 1) throw Error(ErrorKind::InvalidArgument, "sample_every must be >= 1");
    const double dt_max = options.dt > 0.0 ? options.dt : dt_stability_bound(problem.grid, problem.cap);
    const long n_steps = static_cast<long>(std::ceil(options.T_end / dt_max - 1e-9));
    const double dt = options.T_end / n_steps;

    Trajectory traj;
    traj.dt = dt;
    // Unresolved polar modes never see the filtered right-hand side, so they are removed up front.
    Field start = initial;
    problem.filter.apply(start);
    FlowState state = make_state(problem, start);
    traj.samples.push_back(diagnostics(problem, state));
    const bool track = problem.model == FlowModel::Nonlinear;
    const double v0 = traj.samples.front().volume;
    double e_prev = traj.samples.front().energy;
    try {
        for (long n = 1; n <= n_steps; ++n) {
            state = step(state, dt, problem, options.scheme);
            state.t = n * dt;
            traj.steps = n;
            if (track) {
                const double e = energy(*state.embedding, problem.cap.a, problem.cap.b);
                traj.max_energy_increase = std::max(traj.max_energy_increase, (e - e_prev) / std::abs(e_prev));
                e_prev = e;
                const double v = enclosed_volume(*state.embedding);
                traj.max_volume_drift = std::max(traj.max_volume_drift, std::abs(v - v0) / v0);
            }
            if (n % options.sample_every == 0 || n == n_steps) traj.samples.push_back(diagnostics(problem, state));
        }
        if (state.rho.max_abs() == 0.0) traj.status = "stationary";
    } catch (const Error& e) {
        traj.status = "terminated";
        traj.message = e.what();
    }
    traj.final_rho = state.rho;
    traj.final_fit = fit_sphere(state.embedding ? *state.embedding : *problem.embedding_of(state.rho));
    return traj;
}

DecayFit decay_rate(const Trajectory& traj, double window) {
    if (!(window > 0.0 && window <= 1.0)) throw Error(ErrorKind::InvalidArgument, "window must lie in (0, 1]");
    const auto n = traj.samples.size();
    const auto count = static_cast<std::size_t>(std::floor(window * n));
    if (count < 10) throw Error(ErrorKind::InsufficientDecay, "fewer than 10 samples in the fit window");
    std::vector<double> t, y;
    for (std::size_t i = n - count; i < n; ++i) {
        const double r = traj.samples[i].remainder;
        if (r < kDecayFloor) throw Error(ErrorKind::InsufficientDecay, "remainder at the rounding floor");
        t.push_back(traj.samples[i].t);
        y.push_back(std::log(r));
    }
    const double tm = std::accumulate(t.begin(), t.end(), 0.0) / count;
    const double ym = std::accumulate(y.begin(), y.end(), 0.0) / count;
    double stt = 0.0, sty = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        stt += (t[i] - tm) * (t[i] - tm);
        sty += (t[i] - tm) * (y[i] - ym);
        syy += (y[i] - ym) * (y[i] - ym);
    }
    if (stt == 0.0) throw Error(ErrorKind::InsufficientDecay, "degenerate time window");
    DecayFit fit;
    const double slope = sty / stt;
    fit.rate = -slope;
    fit.r_squared = syy > 0.0 ? (sty * sty) / (stt * syy) : 1.0;
    return fit;
}

ModeIndex smallest_positive_mode(const SpectrumReport& report) {
    ModeIndex best{0, 0, std::numeric_limits<double>::infinity()};
    for (const auto& m : report.modes) {
        for (std::size_t i = 0; i < m.values.size(); ++i) {
            if (m.values[i] > report.tol_null && m.values[i] < best.lambda) {
                best = {m.k, static_cast<int>(i), m.values[i]};
            }
        }
    }
    return best;
}

Field eigenfunction_perturbation(const CapParams& cap, const Grid& grid, int k, int index, double amplitude) {
    const ModeSystem sys = assemble_mode(k, cap, 4 * grid.n_theta());
    const ModeSpectrum sp = k == 0 ? nonlocal_mode0(sys, cap) : solve_mode(sys);
    if (index < 0 || index >= static_cast<int>(sp.values.size())) {
        throw Error(ErrorKind::InvalidMode, "eigenvalue index out of range");
    }
    // Refine on the grid operator: column 0 of A0(e_j cos k phi) gives the mode-k row matrix.
    const int rows = grid.rows();
    Eigen::MatrixXd block(rows, rows);
    for (int j = 0; j < rows; ++j) {
        Field unit = Field::sample(grid, [k](double p, double) { return std::cos(k * p); });
        for (int i = 0; i < grid.n_phi(); ++i) {
            for (int m = 0; m < rows; ++m) {
                if (m != j) (m < grid.n_theta() ? unit.at(i, m) : unit.boundary[i]) = 0.0;
            }
        }
        const Field image = apply_A0(unit, cap, grid);
        for (int m = 0; m < rows; ++m) block(m, j) = image.value(0, m);
    }
    const Eigen::EigenSolver<Eigen::MatrixXd> es(block);
    Eigen::Index best = 0;
    for (Eigen::Index q = 1; q < es.eigenvalues().size(); ++q) {
        if (std::abs(es.eigenvalues()(q) - sp.values[index]) < std::abs(es.eigenvalues()(best) - sp.values[index])) best = q;
    }
    Eigen::VectorXcd v = es.eigenvectors().col(best);
    Eigen::Index top = 0;
    v.cwiseAbs().maxCoeff(&top);
    v *= std::conj(v(top)) / std::abs(v(top));
    Eigen::VectorXd g = v.real();
    if (g(rows - 1) < 0.0) g = -g;
    Field f = Field::sample(grid, [k](double p, double) { return std::cos(k * p); });
    for (int i = 0; i < grid.n_phi(); ++i) {
        for (int j = 0; j < grid.n_theta(); ++j) f.at(i, j) *= g(j);
        f.boundary[i] *= g(rows - 1);
    }
    f *= amplitude / f.max_abs();
    return f;
}

Field random_smooth_perturbation(const Grid& grid, std::uint64_t seed, double amplitude) {
    constexpr int kModes = 5;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    double A[kModes][kModes], B[kModes][kModes];
    for (int k = 0; k < kModes; ++k) {
        for (int j = 0; j < kModes; ++j) {
            const double decay = 1.0 / std::pow(1.0 + k * k + j * j, 2);
            A[k][j] = coef(rng) * decay;
            B[k][j] = k == 0 ? 0.0 : coef(rng) * decay;
        }
    }
    Field f = Field::sample(grid, [&](double p, double t) {
        double v = 0.0;
        for (int k = 0; k < kModes; ++k) {
            const double radial = std::pow(std::sin(t), k);
            for (int j = 0; j < kModes; ++j) {
                v += (A[k][j] * std::cos(k * p) + B[k][j] * std::sin(k * p)) * radial * std::pow(std::cos(t), j);
            }
        }
        return v;
    });
    f *= amplitude / f.max_abs();
    return f;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << "t,volume,energy,max_rho,l2_rho,a0,a1,a2,remainder,fit_residual,fit_R,angle_margin\n";
    for (const auto& s : traj.samples) {
        for (double v : {s.t, s.volume, s.energy, s.max_rho, s.l2_rho, s.a0, s.a1, s.a2, s.remainder, s.fit_residual,
                         s.fit_R}) {
            os << format_number(v) << ',';
        }
        os << format_number(s.angle_margin) << '\n';
    }
}

}  // namespace capflow
