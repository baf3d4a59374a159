#include "capflow/surface_calculus.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "capflow/errors.hpp"
#include "capflow/io.hpp"

namespace capflow {

namespace {

constexpr double kPlanarTolerance = 1e-8;
constexpr double kMinAreaElement = 1e-12;

}  // namespace

ChartSamples::ChartSamples(const Grid& g, const CurvilinearChart& chart)
    : grid(g), cap(chart.cap()), epsilon0(chart.epsilon0()) {
    base.resize(grid.node_count());
    direction.resize(grid.node_count());
    for (int i = 0; i < grid.n_phi(); ++i) {
        for (int j = 0; j < grid.rows(); ++j) {
            const SurfacePoint p{grid.phi(i), grid.theta(j)};
            base[grid.node(i, j)] = chart.psi(p, 0.0);
            direction[grid.node(i, j)] = chart.dpsi_dw(p, 0.0);
        }
    }
}

Embedding embed(const Grid& grid, const Field& rho, const CurvilinearChart& chart) {
    return embed(ChartSamples(grid, chart), rho);
}

Embedding embed(const ChartSamples& chart, const Field& rho) {
    Embedding emb{chart.grid, 1.0, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}};
    embed_into(emb, chart, rho);
    return emb;
}

void embed_into(Embedding& emb, const ChartSamples& chart, const Field& rho) {
    const Grid& grid = chart.grid;
    if (rho.n_phi != grid.n_phi() || rho.n_theta != grid.n_theta()) {
        throw Error(ErrorKind::InvalidArgument, "field does not match grid");
    }
    const double worst = rho.max_abs();
    if (!(worst < chart.epsilon0)) {
        std::ostringstream os;
        os.precision(17);
        os << "|w| = " << worst << " >= epsilon0 = " << chart.epsilon0;
        throw Error(ErrorKind::OffsetOutOfChart, os.str());
    }
    const int np = grid.n_phi();
    const int rows = grid.rows();
    const std::size_t nn = grid.node_count();
    emb.R = chart.cap.R;
    for (auto* v : {&emb.X, &emb.X_phi, &emb.X_theta, &emb.X_theta_theta, &emb.normal}) v->resize(nn);
    for (auto* v : {&emb.E, &emb.F, &emb.G, &emb.e, &emb.f, &emb.g2, &emb.H, &emb.sqrt_det}) v->resize(nn);

    for (int i = 0; i < np; ++i) {
        for (int j = 0; j < rows; ++j) {
            const int k = grid.node(i, j);
            emb.X[k] = chart.base[k] + rho.value(i, j) * chart.direction[k];
        }
    }

    // Flattened theta stencils: node offsets relative to the own column, or to the antipodal one.
    struct Flat {
        int count = 0;
        int row[5];
        bool ghost[5];
        double w1[5];
        double w2[5];
    };
    std::vector<Flat> flat(rows);
    for (int j = 0; j < rows; ++j) {
        const Stencil& s1 = grid.d_theta(j);
        const Stencil& s2 = grid.d2_theta(j);
        Flat& fl = flat[j];
        for (const auto& t : s2) {
            fl.ghost[fl.count] = t.row < 0;
            fl.row[fl.count] = t.row < 0 ? -t.row - 1 : t.row;
            fl.w2[fl.count] = t.weight;
            fl.w1[fl.count] = 0.0;
            for (const auto& u : s1) {
                if (u.row == t.row) fl.w1[fl.count] = u.weight;
            }
            ++fl.count;
        }
    }

    std::vector<Vec3>& xtt = emb.X_theta_theta;
    for (int i = 0; i < np; ++i) {
        const Vec3* own = emb.X.data() + grid.node(i, 0);
        const Vec3* anti = emb.X.data() + grid.node(grid.antipode(i), 0);
        for (int j = 0; j < rows; ++j) {
            const Flat& fl = flat[j];
            Vec3 d1 = Vec3::Zero(), d2 = Vec3::Zero();
            for (int s = 0; s < fl.count; ++s) {
                const Vec3& x = (fl.ghost[s] ? anti : own)[fl.row[s]];
                d1 += fl.w1[s] * x;
                d2 += fl.w2[s] * x;
            }
            emb.X_theta[grid.node(i, j)] = d1;
            xtt[grid.node(i, j)] = d2;
        }
    }

    const double h = grid.h_phi();
    const double c1 = 1.0 / (12.0 * h), c2 = 1.0 / (12.0 * h * h);
    for (int i = 0; i < np; ++i) {
        const int o = grid.node(i, 0);
        const int m1 = grid.node(grid.wrap(i - 1), 0), m2 = grid.node(grid.wrap(i - 2), 0);
        const int p1 = grid.node(grid.wrap(i + 1), 0), p2 = grid.node(grid.wrap(i + 2), 0);
        for (int j = 0; j < rows; ++j) {
            const int k = o + j;
            const Vec3* X = emb.X.data();
            const Vec3* T = emb.X_theta.data();
            const Vec3 xp = (8.0 * (X[p1 + j] - X[m1 + j]) - (X[p2 + j] - X[m2 + j])) * c1;
            const Vec3 xpp = (16.0 * (X[p1 + j] + X[m1 + j]) - (X[p2 + j] + X[m2 + j]) - 30.0 * X[k]) * c2;
            const Vec3 xpt = (8.0 * (T[p1 + j] - T[m1 + j]) - (T[p2 + j] - T[m2 + j])) * c1;
            const Vec3& xt = T[k];

            const double E = xp.dot(xp), F = xp.dot(xt), G = xt.dot(xt);
            const double det = E * G - F * F;
            const double sd = det > 0.0 ? std::sqrt(det) : 0.0;
            if (sd < kMinAreaElement) {
                std::ostringstream os;
                os << "area element " << sd << " at node (" << i << ", " << j << ")";
                throw Error(ErrorKind::DegenerateMetric, os.str());
            }
            const Vec3 n = xp.cross(xt) / sd;
            const double e = xpp.dot(n), f = xpt.dot(n), g = xtt[k].dot(n);

            emb.X_phi[k] = xp;
            emb.normal[k] = n;
            emb.E[k] = E;
            emb.F[k] = F;
            emb.G[k] = G;
            emb.e[k] = e;
            emb.f[k] = f;
            emb.g2[k] = g;
            emb.sqrt_det[k] = sd;
            emb.H[k] = (e * G - 2.0 * f * F + g * E) / det;
        }
    }
}

Embedding embed(const Grid& grid, const Field& rho, const CapParams& cap, const CutoffProfile& cutoff) {
    return embed(grid, rho, CurvilinearChart(cap, cutoff));
}

double area_integral(const Embedding& emb, const std::vector<double>& values) {
    const Grid& g = emb.grid;
    double sum = 0.0;
    for (int i = 0; i < g.n_phi(); ++i) {
        for (int j = 0; j < g.n_theta(); ++j) {
            const int k = g.node(i, j);
            sum += values[k] * emb.sqrt_det[k];
        }
    }
    return sum * g.h_phi() * g.h_theta();
}

double area_integral(const Embedding& emb, const Field& f) {
    const Grid& g = emb.grid;
    double sum = 0.0;
    for (int i = 0; i < g.n_phi(); ++i) {
        for (int j = 0; j < g.n_theta(); ++j) sum += f.at(i, j) * emb.sqrt_det[g.node(i, j)];
    }
    return sum * g.h_phi() * g.h_theta();
}

double surface_area(const Embedding& emb) {
    return area_integral(emb, std::vector<double>(emb.sqrt_det.size(), 1.0));
}

double mean_of_H(const Embedding& emb) { return area_integral(emb, emb.H) / surface_area(emb); }

void require_planar_contact(const Embedding& emb) {
    const Grid& g = emb.grid;
    double worst = 0.0;
    for (int i = 0; i < g.n_phi(); ++i) worst = std::max(worst, std::abs(emb.X[g.node(i, g.n_theta())].z()));
    if (worst > kPlanarTolerance * emb.R) {
        std::ostringstream os;
        os << "max |z| on contact curve = " << worst;
        throw Error(ErrorKind::ContactNotPlanar, os.str());
    }
}

double enclosed_volume(const Embedding& emb) {
    require_planar_contact(emb);
    std::vector<double> support(emb.X.size());
    for (std::size_t k = 0; k < support.size(); ++k) support[k] = emb.X[k].dot(emb.normal[k]);
    return area_integral(emb, support) / 3.0;
}

double contact_area(const Embedding& emb) {
    // Green's formula with the same phi derivative as the surface, trapezoid in phi.
    const Grid& g = emb.grid;
    const int n = g.n_theta();
    double twice = 0.0;
    for (int i = 0; i < g.n_phi(); ++i) {
        const Vec3& p = emb.X[g.node(i, n)];
        const Vec3& dp = emb.X_phi[g.node(i, n)];
        twice += p.x() * dp.y() - p.y() * dp.x();
    }
    return 0.5 * std::abs(twice) * g.h_phi();
}

double contact_length(const Embedding& emb) {
    const Grid& g = emb.grid;
    double len = 0.0;
    for (int i = 0; i < g.n_phi(); ++i) len += emb.X_phi[g.node(i, g.n_theta())].norm();
    return len * g.h_phi();
}

double energy(const Embedding& emb, double a, double b) {
    return surface_area(emb) - a * contact_area(emb) + b * contact_length(emb);
}

BoundaryQuantities boundary_quantities(const Embedding& emb) {
    require_planar_contact(emb);
    const Grid& g = emb.grid;
    const int np = g.n_phi();
    const int n = g.n_theta();
    auto X = [&](int i, int j) -> const Vec3& { return emb.X[g.node(i, j)]; };
    BoundaryQuantities bq;
    bq.curvature.resize(np);
    bq.cos_angle.resize(np);
    bq.conormal.resize(np);
    bq.speed.resize(np);
    for (int i = 0; i < np; ++i) {
        const Vec3& xp = emb.X_phi[g.node(i, n)];
        const Vec3 xpp = phi_second_derivative<Vec3>(g, i, n, X);
        const double speed = xp.norm();
        const Vec3 tau = xp / speed;
        const Vec3 nu(-tau.y(), tau.x(), 0.0);
        bq.speed[i] = speed;
        bq.conormal[i] = nu;
        bq.curvature[i] = xpp.dot(nu) / (speed * speed);
        bq.cos_angle[i] = -emb.normal[g.node(i, n)].z();
    }
    return bq;
}

Field laplace_beltrami_reference(const Grid& grid, const Field& rho, const CapParams& cap) {
    Field out = Field::zeros(grid);
    const double inv_r2 = 1.0 / (cap.R * cap.R);
    auto val = [&](int i, int j) { return rho.value(i, j); };
    for (int i = 0; i < grid.n_phi(); ++i) {
        for (int j = 0; j < grid.rows(); ++j) {
            const double th = grid.theta(j);
            const double s = std::sin(th);
            const double rt = apply_theta<double>(grid, grid.d_theta(j), i, val);
            const double rtt = apply_theta<double>(grid, grid.d2_theta(j), i, val);
            const double rpp = phi_second_derivative<double>(grid, i, j, val);
            const double lap = inv_r2 * (rtt + std::cos(th) / s * rt + rpp / (s * s));
            if (j < grid.n_theta()) {
                out.at(i, j) = lap;
            } else {
                out.boundary[i] = lap;
            }
        }
    }
    return out;
}

void write_field_csv(std::ostream& os, const Grid& grid, const Field& f) {
    os << "phi,theta,value\n";
    for (int i = 0; i < grid.n_phi(); ++i) {
        for (int j = 0; j < grid.rows(); ++j) {
            os << format_number(grid.phi(i)) << ',' << format_number(grid.theta(j)) << ','
               << format_number(f.value(i, j)) << '\n';
        }
    }
}

Field read_field_csv(std::istream& is, const Grid& grid) {
    Field f = Field::zeros(grid);
    std::string line;
    if (!std::getline(is, line) || line.rfind("phi,theta,value", 0) != 0) {
        throw Error(ErrorKind::InvalidArgument, "field CSV must start with header phi,theta,value");
    }
    for (int i = 0; i < grid.n_phi(); ++i) {
        for (int j = 0; j < grid.rows(); ++j) {
            if (!std::getline(is, line)) throw Error(ErrorKind::InvalidArgument, "field CSV too short");
            const auto last = line.rfind(',');
            if (last == std::string::npos) throw Error(ErrorKind::InvalidArgument, "malformed field CSV row");
            const double v = std::stod(line.substr(last + 1));
            if (j < grid.n_theta()) {
                f.at(i, j) = v;
            } else {
                f.boundary[i] = v;
            }
        }
    }
    return f;
}

void write_embedding_csv(std::ostream& os, const Embedding& emb) {
    const Grid& g = emb.grid;
    os << "phi,theta,x,y,z,H\n";
    for (int i = 0; i < g.n_phi(); ++i) {
        for (int j = 0; j < g.rows(); ++j) {
            const int k = g.node(i, j);
            os << format_number(g.phi(i)) << ',' << format_number(g.theta(j)) << ','
               << format_number(emb.X[k].x()) << ',' << format_number(emb.X[k].y()) << ','
               << format_number(emb.X[k].z()) << ',' << format_number(emb.H[k]) << '\n';
        }
    }
}

}  // namespace capflow
