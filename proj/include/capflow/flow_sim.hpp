#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "capflow/linear_stability.hpp"
#include "capflow/surface_calculus.hpp"

namespace capflow {

enum class FlowModel { Nonlinear, Linear };
enum class Scheme { RK4, Euler };

FlowModel parse_flow_model(const std::string& text);
Scheme parse_scheme(const std::string& text);

/// Removes azimuthal modes k > max(1, floor(2 sin(theta_j) / h_theta)) row by row.
/// Near the pole these modes are unresolved in theta but would dictate the explicit step.
class PolarFilter {
public:
    explicit PolarFilter(const Grid& grid);
    void apply(Field& f) const;
    int cutoff(int j) const { return cutoff_[j]; }

private:
    int n_phi_ = 0;
    int n_theta_ = 0;
    std::vector<int> cutoff_;
    std::vector<double> cos_, sin_;  ///< cos(k phi_i), sin(k phi_i) for k up to the largest cutoff
};

/// Everything the integrator needs about the reference configuration.
struct FlowProblem {
    CapParams cap;
    Grid grid;
    CutoffProfile cutoff;
    FlowModel model = FlowModel::Nonlinear;
    ChartSamples chart;
    PolarFilter filter;
    /// Nonlinear right-hand side at rho = 0; subtracted so the reference cap is an exact equilibrium.
    Field reference_residual;
    bool balanced = true;

    FlowProblem(const CapParams& cap, const Grid& grid, const CutoffProfile& cutoff,
                FlowModel model = FlowModel::Nonlinear, bool balanced = true);

    /// Embedding of rho in recycled storage; buffers return to the pool once no state holds them.
    std::shared_ptr<const Embedding> embedding_of(const Field& rho) const;

private:
    mutable std::vector<std::shared_ptr<Embedding>> pool_;
};

struct FlowState {
    double t = 0.0;
    Field rho;
    std::shared_ptr<const Embedding> embedding;
};

FlowState make_state(const FlowProblem& problem, const Field& rho, double t = 0.0);

/// Raw nonlinear velocity transported to the chart: interior (H - Hbar)/<n, d_w Psi>,
/// boundary (a + b kappa + <n, n_D>)/<n_dD, d_w Psi>.
Field rhs_nonlinear_raw(const Embedding& emb, const ChartSamples& chart);
/// Balanced nonlinear right-hand side used by the integrator.
Field rhs_nonlinear(const FlowState& state, const FlowProblem& problem);
Field rhs_linear(const Field& rho, const CapParams& cap, const Grid& grid);

double dt_stability_bound(const Grid& grid, const CapParams& cap, double c_cfl = 0.2);

FlowState step(const FlowState& state, double dt, const FlowProblem& problem, Scheme scheme = Scheme::RK4);

struct SphereFit {
    Vec3 center = Vec3::Zero();
    double R = 0.0;
    double residual = 0.0;
    /// Contact radius and cos(alpha) of the fitted sphere cut by z = 0.
    double r_contact = 0.0;
    double cos_alpha = 0.0;
};

SphereFit fit_sphere(const Embedding& emb);

struct Sample {
    double t = 0.0;
    double volume = 0.0;
    double energy = 0.0;
    double max_rho = 0.0;
    double l2_rho = 0.0;
    double a0 = 0.0, a1 = 0.0, a2 = 0.0;
    double remainder = 0.0;
    double fit_residual = 0.0;
    double fit_R = 0.0;
    Vec3 fit_center = Vec3::Zero();
    double angle_margin = 0.0;
};

struct Trajectory {
    std::vector<Sample> samples;
    std::string status = "completed";
    std::string message;
    double dt = 0.0;
    long steps = 0;
    /// Largest (E_{n+1} - E_n)/|E_n| over all accepted steps.
    double max_energy_increase = 0.0;
    /// Largest |V_n - V_0|/V_0 over all accepted steps.
    double max_volume_drift = 0.0;
    Field final_rho;
    SphereFit final_fit;
};

struct EvolveOptions {
    double T_end = 1.0;
    double dt = 0.0;  ///< 0 selects dt_stability_bound
    int sample_every = 100;
    Scheme scheme = Scheme::RK4;
};

Trajectory evolve(const Field& initial, const FlowProblem& problem, const EvolveOptions& options);

struct DecayFit {
    double rate = 0.0;
    double r_squared = 0.0;
};

/// Exponential rate of the remainder norm over the final `window` fraction of samples.
DecayFit decay_rate(const Trajectory& traj, double window);

/// Smallest eigenvalue above the null tolerance and where it lives.
struct ModeIndex {
    int k = 0;
    int index = 0;
    double lambda = 0.0;
};
ModeIndex smallest_positive_mode(const SpectrumReport& report);

/// Eigenfield g(theta) cos(k phi) of the grid operator apply_A0, matched to the mode-k
/// eigenvalue `index`, scaled to max |rho| = amplitude.
Field eigenfunction_perturbation(const CapParams& cap, const Grid& grid, int k, int index, double amplitude);
/// Deterministic smooth field sum (A cos k phi + B sin k phi) sin^k cos^j / (1 + k^2 + j^2)^2.
Field random_smooth_perturbation(const Grid& grid, std::uint64_t seed, double amplitude);

void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace capflow
