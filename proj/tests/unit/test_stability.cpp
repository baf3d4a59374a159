#include "doctest.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "capflow/errors.hpp"
#include "capflow/curvilinear.hpp"
#include "capflow/linear_stability.hpp"

using namespace capflow;
using doctest::Approx;

namespace {

CapParams half_sphere() { return make_cap(1.0, 0.5, 0.5); }

double cosine_angle(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    return std::abs(u.dot(v)) / (u.norm() * v.norm());
}

Eigen::VectorXd nodal(const ModeSystem& sys, double (*f)(double)) {
    Eigen::VectorXd v(sys.nodes());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = f(i * sys.h);
    return v;
}

}  // namespace

TEST_CASE("mode-0 stiffness on constants") {
    const CapParams cap = make_cap(0.5, 0.3, 0.4);
    const ModeSystem sys = assemble_mode(0, cap, 200);
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(sys.nodes());
    const double expected = -2.0 * (1.0 - std::cos(cap.theta_max())) +
                            (cap.cos_alpha - cap.b / (cap.R * cap.sin_alpha * cap.sin_alpha));
    CHECK(one.dot(sys.K * one) == Approx(expected).epsilon(1e-8));
}

TEST_CASE("assembled matrices are symmetric") {
    const CapParams cap = make_cap(0.5, 0.3, 0.4);
    for (int k : {0, 1, 3}) {
        const ModeSystem sys = assemble_mode(k, cap, 40);
        CHECK((sys.K - sys.K.transpose()).cwiseAbs().maxCoeff() <= 1e-14 * sys.K.cwiseAbs().maxCoeff());
        CHECK((sys.M - sys.M.transpose()).cwiseAbs().maxCoeff() <= 1e-14 * sys.M.cwiseAbs().maxCoeff());
        CHECK(sys.pole_constrained == (k >= 1));
    }
}

TEST_CASE("mode solves: positivity, orthonormality, translation mode") {
    const CapParams hs = half_sphere();
    const auto k2 = solve_mode(assemble_mode(2, hs, 100));
    CHECK(std::all_of(k2.values.begin(), k2.values.end(), [](double x) { return x > 0.0; }));

    const CapParams cap = make_cap(0.5, 0.3, 0.4);
    const ModeSystem sys = assemble_mode(1, cap, 100);
    const auto sp = solve_mode(sys);
    CHECK(std::is_sorted(sp.values.begin(), sp.values.end()));
    const Eigen::MatrixXd gram = sp.vectors.transpose() * sys.M * sp.vectors;
    CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() < 1e-10);

    CHECK(std::abs(sp.values[0]) < 10.0 * sys.h * sys.h * std::abs(sp.values[1]));
    const Eigen::VectorXd s = nodal(sys, [](double t) { return std::sin(t); });
    CHECK(cosine_angle(sp.vectors.col(0), s) > 1.0 - 1e-4);
}

TEST_CASE("degenerate branch: cos(theta) is nearly null and the inhomogeneous system fails") {
    const CapParams cap = make_degenerate_cap(0.9, 0.2);
    CHECK(cap.R * cap.sin_alpha * cap.sin_alpha == Approx(cap.b * cap.cos_alpha).epsilon(1e-12));
    CHECK_FALSE(cap.c_alpha.has_value());
    double prev_angle = 1.0;
    for (int n : {50, 100}) {
        const ModeSystem sys = assemble_mode(0, cap, n);
        const auto sp = solve_mode(sys);
        std::size_t idx = 0;
        for (std::size_t i = 1; i < sp.values.size(); ++i) {
            if (std::abs(sp.values[i]) < std::abs(sp.values[idx])) idx = i;
        }
        CHECK(std::abs(sp.values[idx]) < 0.05);
        const Eigen::VectorXd c = nodal(sys, [](double t) { return std::cos(t); });
        const double angle = std::acos(std::min(1.0, cosine_angle(sp.vectors.col(static_cast<Eigen::Index>(idx)), c)));
        CHECK(angle < 0.5 * prev_angle);
        prev_angle = angle;
        CHECK(inhomogeneous_residual(cap, n) > 0.1);
    }
}

TEST_CASE("nonlocal mode 0") {
    const CapParams hs = half_sphere();
    const auto sp = nonlocal_mode0(assemble_mode(0, hs, 200), hs);
    const double lambda0 = -2.0 / (hs.R * hs.R);
    for (double v : sp.values) CHECK(std::abs(v - lambda0) > 0.05 * std::abs(lambda0));

    const CapParams cap = make_cap(0.5, 0.3, 0.4);
    const ModeSystem sys = assemble_mode(0, cap, 200);
    const auto nl = nonlocal_mode0(sys, cap);
    std::size_t idx = 0;
    for (std::size_t i = 1; i < nl.values.size(); ++i) {
        if (std::abs(nl.values[i]) < std::abs(nl.values[idx])) idx = i;
    }
    CHECK(std::abs(nl.values[idx]) < 1e-2);
    Eigen::VectorXd expected(sys.nodes());
    for (Eigen::Index i = 0; i < expected.size(); ++i) expected(i) = 1.0 + *cap.c_alpha * std::cos(i * sys.h);
    CHECK(cosine_angle(nl.vectors.col(static_cast<Eigen::Index>(idx)), expected) > 1.0 - 1e-6);
}

TEST_CASE("half-sphere reference spectrum") {
    const CapParams hs = half_sphere();
    const auto ref = halfsphere_reference(hs, 2, 6);
    REQUIRE(ref.size() == 3);
    const std::vector<double> k0{-8.0, 16.0, 72.0, 160.0};
    REQUIRE(ref[0].size() == k0.size());
    for (std::size_t i = 0; i < k0.size(); ++i) CHECK(ref[0][i] == Approx(k0[i]).epsilon(1e-14));
    CHECK(ref[1][0] == 0.0);
    CHECK(ref[1][1] == Approx(40.0));
    CHECK_THROWS_AS(halfsphere_reference(make_cap(0.5, 0.3, 0.4), 2, 6), Error);
}

TEST_CASE("homotopy endpoints") {
    const CapParams hs = half_sphere();
    const auto curves = homotopy_spectrum(hs, {0.0, 1.0}, 2, 200, 4);
    const auto ref = halfsphere_reference(hs, 2, 12);
    for (int k = 0; k <= 2; ++k) {
        const auto& d0 = curves.values[0][k];
        for (int i = 0; i < 3; ++i) {
            CHECK(std::abs(d0[i] - ref[k][i]) < 1e-3 * std::max(std::abs(ref[k][i]), 1.0 / (hs.R * hs.R)));
        }
        const auto direct = solve_mode(assemble_mode(k, hs, 200));
        for (int i = 0; i < 4; ++i) CHECK(curves.values[1][k][i] == Approx(direct.values[i]).epsilon(1e-10));
    }
    CHECK_THROWS_AS(homotopy_spectrum(make_cap(0.5, 0.3, 0.4), {0.0, 1.0}, 2, 50, 4), Error);
}

TEST_CASE("mode eigenvalues converge at second order") {
    const CapParams cap = make_cap(0.5, 0.3, 0.4);
    for (int k = 0; k <= 3; ++k) {
        const auto a = solve_mode(assemble_mode(k, cap, 50)).values;
        const auto b = solve_mode(assemble_mode(k, cap, 100)).values;
        const auto c = solve_mode(assemble_mode(k, cap, 200)).values;
        for (int i = 0; i < 5; ++i) {
            const double e1 = std::abs(a[i] - b[i]), e2 = std::abs(b[i] - c[i]);
            if (e2 < 1e-10 * std::max(1.0, std::abs(c[i]))) continue;
            CHECK(std::log2(e1 / e2) >= 1.9);
        }
    }
}

TEST_CASE("analytic nullspace fields") {
    const CapParams hs = half_sphere();
    const Grid g = Grid::for_cap(hs, 16, 16);
    const NullBasis nb = analytic_nullspace(hs, g);
    CHECK(nb.v1.boundary[4] == Approx(1.0).epsilon(1e-15));
    CHECK(*hs.c_alpha == Approx(-1.0));
    CHECK(std::abs(nb.v0.at(3, 0)) < g.h_theta() * g.h_theta());
    for (int i = 0; i < g.n_phi(); ++i) {
        for (int j = 0; j <= g.n_theta(); ++j) {
            const Vec3 x = reference_point({g.phi(i), g.theta(j)}, hs);
            CHECK(nb.v1.value(i, j) == Approx(x.x() / hs.R).epsilon(1e-12));
            CHECK(nb.v2.value(i, j) == Approx(x.y() / hs.R).epsilon(1e-12));
        }
    }
}

TEST_CASE("A0 on constants and on azimuthal modes") {
    const CapParams hs = half_sphere();
    const Grid g = Grid::for_cap(hs, 32, 32);
    const Field out = apply_A0(Field::sample(g, [](double, double) { return 1.0; }), hs, g);
    CHECK(out.interior.cwiseAbs().maxCoeff() < 1e-10);
    for (int i = 0; i < g.n_phi(); ++i) CHECK(out.boundary[i] == Approx(-2.0).epsilon(1e-10));

    const CapParams cap = make_cap(0.5, 0.3, 0.4);
    const Grid g2 = Grid::for_cap(cap, 32, 32);
    const Field w = apply_A0(Field::sample(g2, [](double p, double t) { return std::sin(t) * std::cos(2 * p); }), cap, g2);
    CHECK(std::abs(reference_integral(w, cap, g2)) < 1e-10);
}

TEST_CASE("A0 annihilates the nullspace at second order") {
    const CapParams cap = make_cap(0.5, 0.3, 0.4);
    double prev[3] = {0, 0, 0};
    for (int n : {16, 32, 64}) {
        const Grid g = Grid::for_cap(cap, 2 * n, n);
        const NullBasis nb = analytic_nullspace(cap, g);
        const Field* v[3] = {&nb.v0, &nb.v1, &nb.v2};
        for (int i = 0; i < 3; ++i) {
            const double r = apply_A0(*v[i], cap, g).max_abs();
            if (n > 16) CHECK(prev[i] / r >= 3.5);
            prev[i] = r;
        }
    }
}

TEST_CASE("nullspace projection") {
    const CapParams cap = make_cap(0.5, 0.3, 0.4);
    const Grid g = Grid::for_cap(cap, 32, 24);
    const NullBasis nb = analytic_nullspace(cap, g);

    const Projection p1 = project_nullspace(nb.v1, cap, g);
    CHECK(std::abs(p1.a0) < 1e-10);
    CHECK(p1.a1 == Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(p1.a2) < 1e-10);
    CHECK(p1.remainder_norm < 1e-10);

    const Projection p = project_nullspace(3.0 * nb.v0 - 2.0 * nb.v2, cap, g);
    CHECK(p.a0 == Approx(3.0).epsilon(1e-10));
    CHECK(std::abs(p.a1) < 1e-10);
    CHECK(p.a2 == Approx(-2.0).epsilon(1e-10));

    const Field w = Field::sample(g, [](double ph, double t) { return std::cos(t) + 0.3 * std::sin(ph) * t * t; });
    const Projection pw = project_nullspace(w, cap, g);
    const Projection again = project_nullspace(pw.a0 * nb.v0 + pw.a1 * nb.v1 + pw.a2 * nb.v2, cap, g);
    CHECK(again.a0 == Approx(pw.a0).epsilon(1e-12));
    CHECK(again.a1 == Approx(pw.a1).epsilon(1e-12));
    CHECK(again.a2 == Approx(pw.a2).epsilon(1e-12));

    // P A0 = 0
    const Field img = apply_A0(Field::sample(g, [](double ph, double t) { return std::cos(t) * (1 + std::sin(ph)); }), cap, g);
    CHECK(std::abs(project_nullspace(img, cap, g).a0) < 1e-10 * img.max_abs());
}

TEST_CASE("spectrum reports for caps in all regions") {
    const std::vector<std::array<double, 3>> caps = {{1.0, 0.5, 0.5}, {0.5, 0.3, 0.4}, {-0.5, 0.3, 0.8}};
    for (const auto& c : caps) {
        const CapParams cap = make_cap(c[0], c[1], c[2]);
        const SpectrumReport rep = spectrum(cap, 4, 100);
        CHECK(rep.nullspace_dim == 3);
        CHECK(rep.min_positive > 0.0);
        for (std::size_t k = 2; k < rep.modes.size(); ++k) {
            for (double v : rep.modes[k].values) CHECK(v > 0.0);
        }
    }
    CHECK_THROWS_AS(spectrum(make_cap(0.5, 0.3, 0.4), 1, 50), Error);
}

TEST_CASE("discrete A0 spectrum lies near the mode spectra") {
    const CapParams cap = make_cap(0.5, 0.3, 0.4);
    const Grid g = Grid::for_cap(cap, 32, 16);
    const Eigen::EigenSolver<Eigen::MatrixXd> es(assemble_A0_dense(cap, g), false);
    const SpectrumReport rep = spectrum(cap, 8, 400);
    std::vector<double> modes;
    for (const auto& m : rep.modes) modes.insert(modes.end(), m.values.begin(), m.values.end());
    modes.push_back(-2.0 / (cap.R * cap.R));
    std::vector<double> lam;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        CHECK(std::abs(es.eigenvalues()(i).imag()) < 1e-6 * (1.0 + std::abs(es.eigenvalues()(i).real())));
        lam.push_back(es.eigenvalues()(i).real());
    }
    std::sort(lam.begin(), lam.end());
    for (std::size_t i = 0; i < 12; ++i) {
        double best = 1e300;
        for (double m : modes) best = std::min(best, std::abs(lam[i] - m));
        CHECK(best < 0.05 * std::max(1.0, std::abs(lam[i])));
    }
}

TEST_CASE("scan bookkeeping") {
    CHECK(RRule::parse("mid").kind == RRule::Kind::Mid);
    CHECK(RRule::parse("r:0.4").value == 0.4);
    CHECK(RRule::parse("alpha:1.2").kind == RRule::Kind::FixedAlpha);
    CHECK(RRule::parse("r:0.5").to_string() == "r:0.5");
    CHECK_THROWS_AS(RRule::parse("radius"), Error);
    CHECK(mid_interval_r(2.0, 1.0) == Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(mid_interval_r(1.0, 0.5) == Approx(0.5).epsilon(1e-12));

    const auto cells = scan_parameters({0.0, 0.5, 1.0}, {0.2, 0.5}, RRule::parse("mid"), 3, 60);
    CHECK(cells.size() == 6);
    for (const auto& c : cells) {
        CHECK(c.status == "ok");
        CHECK(c.report.nullspace_dim == 3);
    }
    const auto bad = scan_parameters({2.0}, {1.0}, RRule::parse("r:2"), 2, 20);
    REQUIRE(bad.size() == 1);
    CHECK(bad[0].status == "NoStationaryCap");
}

TEST_CASE("spectrum CSV") {
    const SpectrumReport rep = spectrum(half_sphere(), 2, 30);
    std::ostringstream os;
    write_spectrum_csv(os, rep, 2);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "a,b,r,alpha,k,index,lambda");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 6);
}
