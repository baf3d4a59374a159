#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "capflow/cap_geometry.hpp"
#include "capflow/errors.hpp"
#include "capflow/flow_sim.hpp"
#include "capflow/io.hpp"
#include "capflow/linear_stability.hpp"

using namespace capflow;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 1, kInfeasible = 2, kSolver = 3, kFlow = 4, kScanFailed = 5 };

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::SolverFailure:
        case ErrorKind::ComplexSpectrum: return kSolver;
        case ErrorKind::StepRejected:
        case ErrorKind::AngleDegenerate:
        case ErrorKind::OffsetOutOfChart:
        case ErrorKind::DegenerateMetric:
        case ErrorKind::ContactNotPlanar:
        case ErrorKind::DegenerateFit: return kFlow;
        default: return kInfeasible;
    }
}

enum class Kind { Number, Integer, Text, List, Flag };

// Every recognised configuration key and its type.
const std::map<std::string, Kind> kKeys = {
    {"a", Kind::Number},          {"b", Kind::Number},          {"r", Kind::Number},
    {"alpha", Kind::Number},      {"n_phi", Kind::Integer},     {"n_theta", Kind::Integer},
    {"k_max", Kind::Integer},     {"n_eigs", Kind::Integer},    {"T_end", Kind::Text},
    {"dt", Kind::Text},           {"scheme", Kind::Text},       {"model", Kind::Text},
    {"sample_every", Kind::Integer}, {"perturbation", Kind::Text}, {"amplitude", Kind::Number},
    {"seed", Kind::Integer},      {"mode_k", Kind::Integer},    {"mode_index", Kind::Integer},
    {"window", Kind::Number},     {"a_list", Kind::List},       {"b_list", Kind::List},
    {"r_rule", Kind::Text},       {"d_values", Kind::List},     {"out", Kind::Text},
    {"reference", Kind::Flag},    {"balanced", Kind::Text},
};

json convert(const std::string& key, const std::string& text) {
    switch (kKeys.at(key)) {
        case Kind::Number: return std::stod(text);
        case Kind::Integer: return std::stoll(text);
        case Kind::Flag: return text.empty() || text == "true" || text == "1";
        case Kind::List: {
            json list = json::array();
            std::stringstream ss(text);
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (!item.empty()) list.push_back(std::stod(item));
            }
            return list;
        }
        case Kind::Text: break;
    }
    return text;
}

class Config {
public:
    explicit Config(json data) : data_(std::move(data)) {
        for (const auto& [key, value] : data_.items()) {
            if (!kKeys.count(key)) throw Error(ErrorKind::InvalidArgument, "unknown configuration key " + key);
        }
    }

    bool has(const std::string& key) const { return data_.contains(key) && !data_[key].is_null(); }

    double number(const std::string& key) const {
        if (!has(key)) throw Error(ErrorKind::InvalidArgument, "missing " + key);
        if (!data_[key].is_number()) throw Error(ErrorKind::InvalidArgument, key + " must be a number");
        return data_[key].get<double>();
    }
    double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

    int integer(const std::string& key, int fallback) const {
        if (!has(key)) return fallback;
        if (!data_[key].is_number_integer()) throw Error(ErrorKind::InvalidArgument, key + " must be an integer");
        return data_[key].get<int>();
    }
    int count(const std::string& key, int fallback) const {
        const int v = integer(key, fallback);
        if (v <= 0) throw Error(ErrorKind::InvalidArgument, key + " must be positive");
        return v;
    }

    std::string text(const std::string& key, const std::string& fallback) const {
        if (!has(key)) return fallback;
        if (data_[key].is_number()) return format_number(data_[key].get<double>());
        return data_[key].get<std::string>();
    }

    bool flag(const std::string& key) const { return has(key) && data_[key].get<bool>(); }

    std::vector<double> list(const std::string& key, std::vector<double> fallback = {}) const {
        if (!has(key)) {
            if (fallback.empty()) throw Error(ErrorKind::InvalidArgument, "missing " + key);
            return fallback;
        }
        return data_[key].get<std::vector<double>>();
    }

    CapParams cap() const {
        if (has("r") == has("alpha")) throw Error(ErrorKind::InvalidArgument, "give exactly one of r and alpha");
        return has("r") ? make_cap(number("a"), number("b"), number("r"))
                        : cap_from_angle(number("a"), number("b"), number("alpha"));
    }

    fs::path out() const { return text("out", "capflow_out"); }

private:
    json data_;
};

json interval_json(const Interval& iv) {
    return {{"lo", iv.lo}, {"hi", iv.bounded() ? json(iv.hi) : json(nullptr)}, {"text", iv.to_string()}};
}

json cap_json(const CapParams& cap) {
    return {{"a", cap.a},
            {"b", cap.b},
            {"r", cap.r},
            {"alpha", cap.alpha},
            {"R", cap.R},
            {"H_center", cap.H_center},
            {"cos_alpha", cap.cos_alpha},
            {"c_alpha", cap.c_alpha ? json(*cap.c_alpha) : json(nullptr)},
            {"c_crit", cap.c_crit},
            {"critical_margin", cap.b - cap.c_crit},
            {"above_critical", cap.above_critical()},
            {"region", to_string(classify(cap))}};
}

std::ofstream open_output(const Config& cfg, const std::string& name) {
    const fs::path dir = cfg.out();
    fs::create_directories(dir);
    std::ofstream os(dir / name);
    if (!os) throw Error(ErrorKind::InvalidArgument, "cannot write " + (dir / name).string());
    return os;
}

void emit(const Config& cfg, const std::string& name, const json& report) {
    open_output(cfg, name + ".json") << report.dump(2) << '\n';
    std::cout << report.dump(2) << '\n';
}

unsigned thread_cap() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("CAPFLOW_THREADS")) {
        const int v = std::atoi(env);
        if (v <= 0) throw Error(ErrorKind::InvalidArgument, "CAPFLOW_THREADS must be a positive integer");
        n = std::min<unsigned>(n, static_cast<unsigned>(v));
    }
    return n;
}

json spectrum_json(const SpectrumReport& rep) {
    json modes = json::array();
    for (const auto& m : rep.modes) {
        modes.push_back({{"k", m.k}, {"smallest", m.values.empty() ? json(nullptr) : json(m.values.front())}});
    }
    return {{"n_theta", rep.n_theta},         {"tol_null", rep.tol_null},
            {"nullspace_dim", rep.nullspace_dim}, {"min_positive", rep.min_positive},
            {"has_negative", rep.has_negative}, {"modes", modes}};
}

int cmd_stationary(const Config& cfg) {
    const CapParams cap = cfg.cap();
    const CapReference ref = ssc_reference(cap);
    json report = cap_json(cap);
    report["feasible_r"] = interval_json(feasible_r_range(cap.a, cap.b));
    report["feasible_alpha"] = interval_json(feasible_alpha_range(cap.a, cap.b));
    report["reference"] = {{"mean_curvature", ref.mean_curvature},
                           {"second_form_sq", ref.second_form_sq},
                           {"contact_curvature", ref.contact_curvature},
                           {"second_form_conormal", ref.second_form_conormal},
                           {"tangent_conormal_rate", ref.tangent_conormal_rate}};
    emit(cfg, "stationary", report);
    return kOk;
}

int cmd_spectrum(const Config& cfg) {
    const CapParams cap = cfg.cap();
    const int n_theta = cfg.count("n_theta", 200);
    const int k_max = cfg.count("k_max", 4);
    const int n_eigs = cfg.count("n_eigs", 5);
    const SpectrumReport rep = spectrum(cap, k_max, n_theta);
    {
        auto os = open_output(cfg, "spectrum.csv");
        write_spectrum_csv(os, rep, n_eigs);
    }
    json report = {{"cap", cap_json(cap)}, {"spectrum", spectrum_json(rep)}};
    if (cfg.flag("reference")) {
        const int l_max = k_max + 2 * (n_eigs - 1);
        const auto analytic = halfsphere_reference(cap, k_max, l_max);
        const auto curves = homotopy_spectrum(cap, {0.0}, k_max, n_theta, n_eigs);
        auto os = open_output(cfg, "spectrum_reference.csv");
        os << "k,index,computed,analytic,relative_error\n";
        double worst = 0.0;
        for (int k = 0; k <= k_max; ++k) {
            const auto& computed = curves.values[0][k];
            const std::size_t n = std::min(computed.size(), analytic[k].size());
            for (std::size_t i = 0; i < n; ++i) {
                const double denom = std::max(std::abs(analytic[k][i]), 1.0 / (cap.R * cap.R));
                const double err = std::abs(computed[i] - analytic[k][i]) / denom;
                worst = std::max(worst, err);
                os << k << ',' << i << ',' << format_number(computed[i]) << ',' << format_number(analytic[k][i])
                   << ',' << format_number(err) << '\n';
            }
        }
        report["reference_max_relative_error"] = worst;
    }
    emit(cfg, "spectrum", report);
    return kOk;
}

int cmd_nullspace(const Config& cfg) {
    const CapParams cap = cfg.cap();
    const int n_phi = cfg.count("n_phi", 32);
    const int n_theta = cfg.count("n_theta", 32);
    std::array<std::array<double, 3>, 2> res{};
    auto os = open_output(cfg, "nullspace.csv");
    os << "n_phi,n_theta,field,residual\n";
    for (int level = 0; level < 2; ++level) {
        const int scale = 1 << level;
        const Grid grid = Grid::for_cap(cap, scale * n_phi, scale * n_theta);
        const NullBasis basis = analytic_nullspace(cap, grid);
        const Field* fields[3] = {&basis.v0, &basis.v1, &basis.v2};
        for (int f = 0; f < 3; ++f) {
            res[level][f] = apply_A0(*fields[f], cap, grid).max_abs();
            os << grid.n_phi() << ',' << grid.n_theta() << ",v" << f << ',' << format_number(res[level][f]) << '\n';
        }
    }
    json ratios = json::array();
    for (int f = 0; f < 3; ++f) ratios.push_back(res[0][f] / res[1][f]);
    emit(cfg, "nullspace", {{"cap", cap_json(cap)}, {"coarse", res[0]}, {"fine", res[1]}, {"ratio", ratios}});
    return kOk;
}

int cmd_scan(const Config& cfg) {
    const auto a_list = cfg.list("a_list");
    const auto b_list = cfg.list("b_list");
    const RRule rule = RRule::parse(cfg.text("r_rule", "mid"));
    const int k_max = cfg.count("k_max", 4);
    const int n_theta = cfg.count("n_theta", 100);

    std::vector<std::pair<double, double>> jobs;
    for (double a : a_list) {
        for (double b : b_list) jobs.emplace_back(a, b);
    }
    std::vector<StabilityCell> cells(jobs.size());
    const std::size_t workers = std::min<std::size_t>(thread_cap(), jobs.size());
    std::vector<std::future<void>> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t n = w; n < jobs.size(); n += workers) {
                cells[n] = scan_parameters({jobs[n].first}, {jobs[n].second}, rule, k_max, n_theta).front();
            }
        }));
    }
    for (auto& f : pool) f.get();

    int failed = 0;
    auto os = open_output(cfg, "scan.csv");
    os << "a,b,r,alpha,region,status,nullspace_dim,min_positive,has_negative,c_crit,critical_margin\n";
    for (const auto& c : cells) {
        const bool ok = c.status == "ok";
        failed += ok ? 0 : 1;
        const auto num = [ok](double x) { return ok ? format_number(x) : std::string(); };
        os << format_number(c.a) << ',' << format_number(c.b) << ',' << num(c.report.r) << ',' << num(c.report.alpha)
           << ',' << (ok ? to_string(c.region) : "") << ',' << c.status << ',' << (ok ? std::to_string(c.report.nullspace_dim) : "")
           << ',' << num(c.report.min_positive) << ',' << (ok ? (c.report.has_negative ? "1" : "0") : "") << ','
           << num(c.report.c_crit) << ',' << num(c.critical_margin) << '\n';
    }
    const bool total = !cells.empty() && failed == static_cast<int>(cells.size());
    emit(cfg, "scan", {{"cells", cells.size()}, {"failed", failed}, {"r_rule", rule.to_string()},
                       {"status", total ? "failed" : "ok"}});
    return total ? kScanFailed : kOk;
}

int cmd_homotopy(const Config& cfg) {
    const CapParams cap = cfg.cap();
    const auto d_values = cfg.list("d_values", {0.0, 0.25, 0.5, 0.75, 1.0});
    const int k_max = cfg.count("k_max", 3);
    const int n_theta = cfg.count("n_theta", 200);
    const int n_eigs = cfg.count("n_eigs", 5);
    const auto curves = homotopy_spectrum(cap, d_values, k_max, n_theta, n_eigs);
    {
        auto os = open_output(cfg, "homotopy.csv");
        os << "d,k";
        for (int i = 0; i < n_eigs; ++i) os << ",lambda_" << i;
        os << '\n';
        for (std::size_t n = 0; n < d_values.size(); ++n) {
            for (int k = 0; k <= k_max; ++k) {
                os << format_number(d_values[n]) << ',' << k;
                for (int i = 0; i < n_eigs; ++i) {
                    os << ',';
                    if (i < static_cast<int>(curves.values[n][k].size())) os << format_number(curves.values[n][k][i]);
                }
                os << '\n';
            }
        }
    }
    json report = {{"cap", cap_json(cap)}, {"max_adjacent_jump", max_adjacent_jump(curves, n_eigs)}};
    // Endpoint checks against the analytic d = 0 table and the full d = 1 operator.
    const double scale = 1.0 / (cap.R * cap.R);
    for (std::size_t n = 0; n < d_values.size(); ++n) {
        double worst = 0.0;
        if (d_values[n] == 1.0) {
            for (int k = 0; k <= k_max; ++k) {
                const auto full = solve_mode(assemble_mode(k, cap, n_theta)).values;
                for (int i = 0; i < n_eigs && i < static_cast<int>(curves.values[n][k].size()); ++i) {
                    worst = std::max(worst, std::abs(curves.values[n][k][i] - full[i]) / std::max(std::abs(full[i]), scale));
                }
            }
            report["d1_max_relative_error"] = worst;
        } else if (d_values[n] == 0.0 && classify(cap) == Region::S0) {
            const auto analytic = halfsphere_reference(cap, k_max, k_max + 2 * (n_eigs - 1));
            for (int k = 0; k <= k_max; ++k) {
                for (std::size_t i = 0; i < analytic[k].size() && i < curves.values[n][k].size(); ++i) {
                    worst = std::max(worst, std::abs(curves.values[n][k][i] - analytic[k][i]) /
                                                std::max(std::abs(analytic[k][i]), scale));
                }
            }
            report["d0_max_relative_error"] = worst;
        }
    }
    emit(cfg, "homotopy", report);
    return kOk;
}

double auto_or(const Config& cfg, const std::string& key, const std::function<double()>& automatic) {
    const std::string v = cfg.text(key, "auto");
    if (v == "auto") return automatic();
    const double x = std::stod(v);
    if (!(x > 0.0)) throw Error(ErrorKind::InvalidArgument, key + " must be positive");
    return x;
}

Field initial_field(const Config& cfg, const CapParams& cap, const Grid& grid) {
    const std::string kind = cfg.text("perturbation", "zero");
    const double amp = cfg.number("amplitude", 0.01);
    if (kind == "zero") return Field::zeros(grid);
    if (kind == "eigen") return eigenfunction_perturbation(cap, grid, cfg.integer("mode_k", 2), cfg.integer("mode_index", 0), amp);
    if (kind == "random") {
        if (!cfg.has("seed")) throw Error(ErrorKind::InvalidArgument, "random perturbation requires a seed");
        return random_smooth_perturbation(grid, static_cast<std::uint64_t>(cfg.integer("seed", 0)), amp);
    }
    if (kind == "sin2") {
        return Field::sample(grid, [amp](double p, double t) { return amp * std::sin(t) * std::cos(2 * p); });
    }
    throw Error(ErrorKind::InvalidArgument, "unknown perturbation " + kind);
}

int cmd_evolve(const Config& cfg) {
    const CapParams cap = cfg.cap();
    const Grid grid = Grid::for_cap(cap, cfg.count("n_phi", 32), cfg.count("n_theta", 32));
    const FlowModel model = parse_flow_model(cfg.text("model", "nonlinear"));
    const std::string balanced = cfg.text("balanced", "true");
    const FlowProblem problem(cap, grid, CutoffProfile(cap), model, balanced != "false");

    double lambda = std::numeric_limits<double>::quiet_NaN();
    auto smallest = [&] {
        if (std::isnan(lambda)) lambda = smallest_positive_mode(spectrum(cap, cfg.count("k_max", 4), 4 * grid.n_theta())).lambda;
        return lambda;
    };
    EvolveOptions opts;
    opts.T_end = auto_or(cfg, "T_end", [&] { return 5.0 / smallest(); });
    opts.dt = auto_or(cfg, "dt", [&] { return dt_stability_bound(grid, cap); });
    opts.sample_every = cfg.count("sample_every", 100);
    opts.scheme = parse_scheme(cfg.text("scheme", "rk4"));

    const Trajectory traj = evolve(initial_field(cfg, cap, grid), problem, opts);
    {
        auto os = open_output(cfg, "trajectory.csv");
        write_trajectory_csv(os, traj);
    }

    json summary = {{"status", traj.status},
                    {"dt", traj.dt},
                    {"steps", traj.steps},
                    {"T_end", opts.T_end},
                    {"n_phi", grid.n_phi()},
                    {"n_theta", grid.n_theta()},
                    {"model", model == FlowModel::Linear ? "linear" : "nonlinear"},
                    {"max_energy_increase", traj.max_energy_increase},
                    {"max_volume_drift", traj.max_volume_drift}};
    if (!std::isnan(lambda)) summary["lambda_min_positive"] = lambda;
    if (!traj.message.empty()) {
        summary["kind"] = traj.message.substr(0, traj.message.find(':'));
        summary["reason"] = traj.message;
    }
    try {
        const DecayFit fit = decay_rate(traj, cfg.number("window", 0.5));
        summary["decay"] = {{"rate", fit.rate}, {"r_squared", fit.r_squared}};
    } catch (const Error& e) {
        summary["decay"] = to_string(e.kind());
    }
    const SphereFit& f = traj.final_fit;
    summary["fitted_cap"] = {{"center", {f.center.x(), f.center.y(), f.center.z()}},
                             {"R", f.R},
                             {"r", f.r_contact},
                             {"cos_alpha", f.cos_alpha},
                             {"residual", f.residual},
                             {"angle_defect", f.r_contact > 0.0 ? json(f.cos_alpha - (cap.b / f.r_contact - cap.a)) : json(nullptr)}};
    emit(cfg, "evolve", summary);
    return traj.status == "terminated" ? kFlow : kOk;
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream is(path);
    if (!is) throw Error(ErrorKind::InvalidArgument, "cannot read config " + path);
    json data = json::parse(is);
    if (!data.is_object()) throw Error(ErrorKind::InvalidArgument, "config must be a JSON object");
    return data;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spherical-cap stability and flow experiments"};
    app.require_subcommand(1);

    using Handler = int (*)(const Config&);
    const std::vector<std::tuple<std::string, std::string, Handler>> commands = {
        {"stationary", "stationary cap parameters", cmd_stationary},
        {"spectrum", "linearized spectrum by azimuthal mode", cmd_spectrum},
        {"nullspace", "residuals of the analytic nullspace fields", cmd_nullspace},
        {"scan", "stability over an (a, b) lattice", cmd_scan},
        {"homotopy", "eigenvalues along the boundary homotopy", cmd_homotopy},
        {"evolve", "time integration of the flow", cmd_evolve},
    };

    std::string config_path;
    std::map<std::string, std::string> flags;
    std::map<std::string, Handler> handlers;
    for (const auto& [name, help, handler] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON configuration file");
        for (const auto& [key, kind] : kKeys) {
            if (kind == Kind::Flag) {
                sub->add_flag_callback("--" + key, [&flags, key = key] { flags[key] = "true"; });
            } else {
                sub->add_option_function<std::string>("--" + key, [&flags, key = key](const std::string& v) { flags[key] = v; });
            }
        }
        handlers[name] = handler;
    }
    CLI11_PARSE(app, argc, argv);

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        json data = load_config(config_path);
        for (const auto& [key, value] : flags) data[key] = convert(key, value);
        return handlers.at(name)(Config(std::move(data)));
    } catch (const Error& e) {
        std::cout << json{{"status", "error"}, {"command", name}, {"kind", to_string(e.kind())}, {"reason", e.reason()}}.dump(2)
                  << '\n';
        return exit_code(e.kind());
    } catch (const json::exception& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "malformed value: " << e.what() << '\n';
        return kUsage;
    }
}
