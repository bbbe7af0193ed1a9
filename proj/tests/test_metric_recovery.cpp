#include "doctest.h"
#include "support.hpp"

#include "poisson_embed/metric_recovery.hpp"

using namespace poisson_embed;
using test_support::code_of;
using test_support::nearest_node;
using test_support::Uniform;

namespace {

Mat diag14() { return (Mat(2, 2) << 1, 0, 0, 4).finished(); }

Vec nodal(const TriMesh& mesh, double (*f)(double, double)) {
    Vec u(mesh.num_nodes());
    for (int i = 0; i < mesh.num_nodes(); ++i) {
        const Point2& p = mesh.nodes[static_cast<std::size_t>(i)];
        u(i) = f(p.x(), p.y());
    }
    return u;
}

struct Setup {
    HarmonicSolver solver;
    SourceBasis basis;
    Mat fields;

    Setup(double h, const MetricField& g, int k = 32)
        : solver(build_disk_mesh(1.0, h), g), basis(SourceBasis::fourier(solver, k)), fields(solve_basis(solver, basis)) {}
    int node(const Point2& p) const { return nearest_node(solver.mesh(), p); }
};

} // namespace

TEST_CASE("quadratic fit is exact on quadratics") {
    const TriMesh mesh = build_disk_mesh(1.0, 0.05);
    const Point2 p(0.2, -0.1);
    const LocalChart chart = cartesian_chart(mesh, p, 0.2);
    Vec u(mesh.num_nodes());
    for (int i = 0; i < mesh.num_nodes(); ++i) {
        const Point2 d = mesh.nodes[static_cast<std::size_t>(i)] - p;
        u(i) = 1.5 - 2.0 * d.x() + 0.5 * d.y() + 0.5 * 3.0 * d.x() * d.x() - 0.7 * d.x() * d.y() + 0.5 * 0.4 * d.y() * d.y();
    }
    const QuadraticFit fit = local_quadratic_fit(u, chart);
    CHECK(std::abs(fit.value - 1.5) < 1e-10);
    CHECK((fit.gradient - Eigen::Vector2d(-2.0, 0.5)).norm() < 1e-10);
    Eigen::Matrix2d hess;
    hess << 3.0, -0.7, -0.7, 0.4;
    CHECK((fit.hessian - hess).norm() < 1e-9);
    CHECK(fit.residual < 1e-10);

    const QuadraticFitOperator op(chart);
    const Mat coef = op.coefficients(u);
    CHECK(std::abs(coef(3, 0) - 3.0) < 1e-9);
    CHECK(std::abs(coef(4, 0) + 0.7) < 1e-9);

    CHECK(code_of([&] { QuadraticFitOperator(cartesian_chart(mesh, p, 0.06)); }) == ErrorCode::RankDeficientStencil);
}

TEST_CASE("harmonic chart of the Euclidean disk is the identity to first order") {
    const Setup s(0.05, MetricField::euclidean(2));
    for (const Point2& p : {Point2(0, 0), Point2(0.3, -0.2)}) {
        const LocalChart chart = build_harmonic_chart(s.solver, s.basis, s.fields, s.node(p));
        CHECK(chart.kind == ChartKind::Harmonic);
        CHECK((chart.jacobian - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() <= s.solver.mesh().h);
        CHECK(chart.jacobian_condition() < 1.2);
    }
    CHECK(code_of([&] { build_harmonic_chart(s.solver, s.basis, s.fields, s.node(Point2(0.95, 0))); }) ==
          ErrorCode::InvalidArgument);
    CHECK(code_of([&] { build_harmonic_chart(s.solver, s.basis, s.fields, s.solver.mesh().boundary_loop[0]); }) ==
          ErrorCode::BoundaryNodeRequested);
}

TEST_CASE("inverse metric from explicit Hessians") {
    const std::vector<Mat> flat = {(Mat(2, 2) << 1, 0, 0, -1).finished(), (Mat(2, 2) << 0, 1, 1, 0).finished()};
    const InverseMetricEstimate e = inverse_metric_from_hessians(flat);
    CHECK((e.direction - Mat::Identity(2, 2) / std::sqrt(2.0)).norm() < 1e-12);
    CHECK(e.route_agreement <= 1e-8);
    CHECK(e.singular_values.size() == 2);

    // Trace-free for g^{-1} = diag(1, 1/4).
    const std::vector<Mat> aniso = {(Mat(2, 2) << 1, 0, 0, -4).finished(), (Mat(2, 2) << 0, 1, 1, 0).finished()};
    const Mat gi = diag14().inverse();
    CHECK((inverse_metric_from_hessians(aniso).direction - gi / gi.norm()).norm() < 1e-12);
    CHECK((normalized_inverse_metric(diag14()) - gi / gi.norm()).norm() < 1e-14);
    Eigen::Matrix2d jac;
    jac << 1, 0, 0, 2;
    CHECK((normalized_inverse_metric(diag14(), jac) - Mat::Identity(2, 2) / std::sqrt(2.0)).norm() < 1e-14);

    CHECK(code_of([&] { inverse_metric_from_hessians(std::vector<Mat>{flat[0]}); }) == ErrorCode::NullspaceNotOneDim);
    CHECK(code_of([&] { inverse_metric_from_hessians(std::vector<Mat>{flat[0], 2.0 * flat[0]}); }) ==
          ErrorCode::NullspaceNotOneDim);
    CHECK(code_of([&] { inverse_metric_from_hessians(std::vector<Mat>{}); }) == ErrorCode::InvalidArgument);
    const std::vector<Mat> indefinite = {Mat::Identity(2, 2), flat[1]};
    CHECK(code_of([&] { inverse_metric_from_hessians(indefinite); }) == ErrorCode::NotPositiveDefinite);
}

TEST_CASE("random trace-free Hessians recover g^{-1} in three dimensions") {
    Uniform u(41);
    for (int trial = 0; trial < 5; ++trial) {
        Mat a(3, 3);
        for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = u(-1, 1);
        const Mat gi = (a * a.transpose() + Mat::Identity(3, 3)).inverse();
        std::vector<Mat> hess;
        for (int k = 0; k < 5; ++k) {
            Mat s(3, 3);
            for (int i = 0; i < 9; ++i) s(i / 3, i % 3) = u(-1, 1);
            s = (0.5 * (s + s.transpose())).eval();
            s -= (s.cwiseProduct(gi).sum() / gi.squaredNorm()) * gi;
            hess.push_back(s);
        }
        const InverseMetricEstimate e = inverse_metric_from_hessians(hess);
        CHECK((e.direction - gi / gi.norm()).norm() <= 1e-10);
        CHECK(e.route_agreement <= 1e-8);
    }
}

TEST_CASE("constant anisotropic metric is recovered in harmonic coordinates") {
    const MetricField g = MetricField::constant(diag14());
    const Setup s(0.05, g);
    for (const Point2& p : {Point2(0, 0), Point2(0.2, 0.1), Point2(-0.3, 0.25), Point2(0.1, -0.4)}) {
        const int x0 = s.node(p);
        const LocalChart chart = build_harmonic_chart(s.solver, s.basis, s.fields, x0);
        const InverseMetricEstimate e = recover_inverse_metric(s.solver, s.basis, s.fields, chart);
        const Mat truth = normalized_inverse_metric(diag14(), chart.jacobian);
        INFO("point " << p.transpose() << " error " << (e.direction - truth).norm());
        CHECK((e.direction - truth).norm() <= 0.05);
        CHECK(e.route_agreement <= 1e-8);
        CHECK(std::abs(e.direction.norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("Euclidean harmonic conjugates") {
    const TriMesh mesh = build_disk_mesh(1.0, 0.05);
    const ElementMetric eu = sample_metric(mesh, MetricField::euclidean(2));
    const int root = nearest_node(mesh, Point2(0, 0));
    const Point2 r = mesh.nodes[static_cast<std::size_t>(root)];

    const Conjugate lin = harmonic_conjugate(mesh, eu, nodal(mesh, [](double x, double) { return x; }), root);
    CHECK(lin.root == root);
    for (int i = 0; i < mesh.num_nodes(); ++i) {
        CHECK(std::abs(lin.v(i) - (mesh.nodes[static_cast<std::size_t>(i)].y() - r.y())) < 1e-12);
    }
    CHECK(lin.max_circulation < 1e-12);

    const Conjugate sq = harmonic_conjugate(mesh, eu, nodal(mesh, [](double x, double y) { return x * x - y * y; }), root);
    double err = 0.0;
    for (int i = 0; i < mesh.num_nodes(); ++i) {
        const Point2& p = mesh.nodes[static_cast<std::size_t>(i)];
        err = std::max(err, std::abs(sq.v(i) - (2.0 * p.x() * p.y() - 2.0 * r.x() * r.y())));
    }
    INFO("Im z^2 error " << err);
    CHECK(err <= 10.0 * mesh.h * mesh.h);

    const HarmonicSolver solver(mesh, eu);
    const Vec f = solver.boundary_angles().unaryExpr([](double t) { return std::cos(2.0 * t); });
    CHECK(harmonic_conjugate(mesh, eu, solver.solve_dirichlet(f), root).max_dual_circulation < 1e-10);

    CHECK(code_of([&] { harmonic_conjugate(mesh, eu, Vec(Vec::Constant(mesh.num_nodes(), 2.0)), root); }) ==
          ErrorCode::DegenerateGradient);
    CHECK(code_of([&] { harmonic_conjugate(mesh, eu, nodal(mesh, [](double x, double y) { return x * x + y * y; }), root); }) ==
          ErrorCode::LargeCurlResidual);
    CHECK(code_of([&] { harmonic_conjugate(mesh, eu, lin.v, -1); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("isothermal charts") {
    SUBCASE("Euclidean") {
        const Setup s(0.05, MetricField::euclidean(2));
        const IsothermalChart c = build_isothermal_chart(s.solver, s.basis, s.fields, s.node(Point2(0.1, 0.1)));
        CHECK(c.chart.kind == ChartKind::Isothermal);
        CHECK(std::abs(c.conformal_factor - 1.0) <= 0.05);
        CHECK(c.off_diagonal_ratio <= c.tolerance);
        CHECK(std::abs(c.normalization - 1.0) <= 0.05);
    }
    SUBCASE("conformal e^{2 x1}") {
        const Setup s(0.05, MetricField::conformal_exp((Vec(2) << 1.0, 0.0).finished()));
        for (const Point2& p : {Point2(0, 0), Point2(0.3, 0), Point2(-0.3, 0.1), Point2(0, 0.35), Point2(0.2, -0.25)}) {
            const int x0 = s.node(p);
            const IsothermalChart c = build_isothermal_chart(s.solver, s.basis, s.fields, x0);
            const double expected = std::exp(2.0 * s.solver.mesh().nodes[static_cast<std::size_t>(x0)].x());
            CHECK(std::abs(c.conformal_factor - expected) <= 0.05 * expected);
            CHECK(c.off_diagonal_ratio <= 0.05);
            CHECK(std::abs(c.normalization - 1.0) <= 0.05);
        }
    }
    SUBCASE("constant anisotropic metric") {
        // u ~ x1 and v ~ 2 x2, which pulls diag(1, 4) back to the identity.
        const Setup s(0.05, MetricField::constant(diag14()));
        const IsothermalChart c = build_isothermal_chart(s.solver, s.basis, s.fields, s.node(Point2(0, 0)));
        CHECK(std::abs(c.conformal_factor - 1.0) <= 0.05);
        CHECK(std::abs(c.chart.jacobian(1, 1) - 2.0) <= 0.1);
        CHECK(c.diagonal_mismatch <= c.tolerance);
    }
    SUBCASE("preconditions") {
        const Setup s(0.1, MetricField::euclidean(2), 16);
        CHECK(code_of([&] { build_isothermal_chart(s.solver, s.basis, s.fields, s.node(Point2(0.9, 0))); }) ==
              ErrorCode::InvalidArgument);
    }
}

TEST_CASE("boundary homothety") {
    const TriMesh mesh = build_disk_mesh(1.0, 0.05);
    const MetricField g = MetricField::conformal_exp((Vec(2) << 0.5, -0.3).finished());
    const HomothetyReport same = boundary_homothety_check(mesh, g, g);
    CHECK(same.count == mesh.num_boundary());
    CHECK(std::abs(same.mean - 1.0) < 1e-14);
    CHECK(same.max_deviation < 1e-14);

    const ScalarField two{[](const Vec&) { return 2.0; }, [](const Vec& x) { return Vec(Vec::Zero(x.size())); }};
    CHECK(std::abs(boundary_homothety_check(mesh, g, MetricField::scaled(g, two)).mean - 0.5) < 1e-14);

    const HomothetyReport pulled = boundary_homothety_check(mesh, g, pullback_metric(g, Diffeo::radial_disk(0.3)));
    CHECK(pulled.max_deviation <= 1e-10);

    const TriMesh half = build_disk_mesh(1.0, 0.1, Arc{0.0, test_support::kPi});
    const HomothetyReport partial = boundary_homothety_check(half, g, g);
    CHECK(partial.count < half.num_boundary());
    CHECK(partial.count > 0);
}
