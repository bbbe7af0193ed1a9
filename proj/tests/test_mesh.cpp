#include "doctest.h"
#include "support.hpp"

#include "poisson_embed/grid.hpp"
#include "poisson_embed/mesh.hpp"

#include <map>
#include <sstream>

using namespace poisson_embed;
using test_support::code_of;
using test_support::kPi;

namespace {

void check_topology(const TriMesh& mesh) {
    for (int t = 0; t < mesh.num_triangles(); ++t) CHECK(mesh.signed_area(t) > 0.0);
    std::map<std::array<int, 2>, int> uses;
    for (const auto& tri : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            int a = tri[static_cast<std::size_t>(k)], b = tri[static_cast<std::size_t>((k + 1) % 3)];
            if (a > b) std::swap(a, b);
            ++uses[{a, b}];
        }
    }
    std::map<std::array<int, 2>, int> loop_edges;
    const int nb = mesh.num_boundary();
    for (int i = 0; i < nb; ++i) {
        int a = mesh.boundary_loop[static_cast<std::size_t>(i)];
        int b = mesh.boundary_loop[static_cast<std::size_t>((i + 1) % nb)];
        if (a > b) std::swap(a, b);
        loop_edges[{a, b}] = 1;
    }
    int bad = 0;
    for (const auto& [edge, count] : uses) bad += (count != (loop_edges.count(edge) ? 1 : 2));
    CHECK(bad == 0);
    // Euler characteristic of a disk.
    CHECK(mesh.num_nodes() - static_cast<int>(uses.size()) + mesh.num_triangles() == 1);
}

double max_edge(const TriMesh& mesh) {
    double h = 0.0;
    for (const auto& e : mesh.edges()) {
        h = std::max(h, (mesh.nodes[static_cast<std::size_t>(e[0])] - mesh.nodes[static_cast<std::size_t>(e[1])]).norm());
    }
    return h;
}

ElementMetric twisted_metric(const TriMesh& mesh) {
    return sample_metric(mesh, MetricField(2, [](const Vec& x) {
                             Mat g(2, 2);
                             g << 1.5 + x(0), 0.2 * x(1), 0.2 * x(1), 1.0 + 0.5 * x(0) * x(0);
                             return g;
                         }));
}

} // namespace

TEST_CASE("disk mesh basic structure") {
    for (double h : {0.2, 0.1, 0.05}) {
        const TriMesh mesh = build_disk_mesh(1.0, h);
        check_topology(mesh);
        CHECK(mesh.h == doctest::Approx(max_edge(mesh)).epsilon(1e-15));
        CHECK(mesh.h <= 1.5 * h);
        CHECK(mesh.non_obtuse);
        CHECK(mesh.delaunay);
        for (int b : mesh.boundary_loop) {
            CHECK(std::abs(mesh.nodes[static_cast<std::size_t>(b)].norm() - 1.0) < 1e-15);
            CHECK(mesh.gamma_mask[static_cast<std::size_t>(b)] == 1);
        }
    }
}

TEST_CASE("half-circle Gamma marks about half of the boundary") {
    const TriMesh mesh = build_disk_mesh(1.0, 0.05, Arc{0.0, kPi});
    int marked = 0, expected = 0;
    for (int b : mesh.boundary_loop) {
        const Point2& p = mesh.nodes[static_cast<std::size_t>(b)];
        marked += mesh.gamma_mask[static_cast<std::size_t>(b)];
        const double th = std::atan2(p.y(), p.x());
        expected += (th >= -1e-12 && th <= kPi + 1e-12);
    }
    CHECK(std::abs(marked - mesh.num_boundary() / 2) <= 2);
    CHECK(marked == expected);
    for (int i = 0; i < mesh.num_nodes(); ++i) {
        if (mesh.boundary_position()[static_cast<std::size_t>(i)] < 0) CHECK(mesh.gamma_mask[static_cast<std::size_t>(i)] == 0);
    }
}

TEST_CASE("disk mesh preconditions") {
    CHECK(code_of([] { build_disk_mesh(1.0, 0.4); }) == ErrorCode::DegenerateMesh);
    CHECK(code_of([] { build_disk_mesh(1.0, 0.0); }) == ErrorCode::DegenerateMesh);
    CHECK(code_of([] { build_disk_mesh(1.0, 0.1, Arc{0.0, 0.3}); }) == ErrorCode::DegenerateArc);
    CHECK_NOTHROW(build_disk_mesh(1.0, 0.1, Arc{0.0, 0.5}));
}

TEST_CASE("refinement roughly halves h") {
    // Ring meshes: h / dr grows slowly toward sqrt(1 + (pi / 3)^2) as rings
    // are added, so halving target_h gives a ratio slightly above 1/2.
    double prev = build_disk_mesh(1.0, 0.1).h;
    for (double t : {0.05, 0.025, 0.0125}) {
        const double h = build_disk_mesh(1.0, t).h;
        const double rings = std::ceil(1.0 / t);
        CHECK(h / prev <= 0.51);
        CHECK(h * rings <= std::sqrt(1.0 + kPi * kPi / 9.0));
        prev = h;
    }
}

TEST_CASE("local stiffness of the unit right triangle") {
    const Eigen::Matrix3d k =
        local_stiffness(Point2(0, 0), Point2(1, 0), Point2(0, 1), Eigen::Matrix2d::Identity());
    Eigen::Matrix3d expected;
    expected << 1, -0.5, -0.5, -0.5, 0.5, 0, -0.5, 0, 0.5;
    CHECK((k - expected).cwiseAbs().maxCoeff() < 1e-15);

    // Hand integration for a constant metric: |T| sqrt|g| G^T g^{-1} G.
    Eigen::Matrix2d g;
    g << 2.0, 0.3, 0.3, 1.0;
    Eigen::Matrix<double, 2, 3> grads;
    grads << -1, 1, 0, -1, 0, 1;
    const Eigen::Matrix3d oracle = 0.5 * std::sqrt(g.determinant()) * grads.transpose() * g.inverse() * grads;
    CHECK((local_stiffness(Point2(0, 0), Point2(1, 0), Point2(0, 1), g) - oracle).cwiseAbs().maxCoeff() < 1e-15);

    CHECK(code_of([] {
              local_stiffness(Point2(0, 0), Point2(0, 1), Point2(1, 0), Eigen::Matrix2d::Identity());
          }) == ErrorCode::InvertedTriangle);
    CHECK(code_of([] {
              local_stiffness(Point2(0, 0), Point2(1, 0), Point2(0, 1), Eigen::Matrix2d(-Eigen::Matrix2d::Identity()));
          }) == ErrorCode::NonSpdMetric);
}

TEST_CASE("assembled stiffness is symmetric with constants in its kernel") {
    const TriMesh mesh = build_disk_mesh(1.0, 0.1);
    const AssembledOperator op = assemble_operator(mesh, twisted_metric(mesh));
    const Mat k = Mat(op.stiffness);
    CHECK((k - k.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((k * Vec::Ones(k.rows())).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(op.boundary_mass.rows() == mesh.num_boundary());
    const Mat m = Mat(op.boundary_mass);
    CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);

    // Euclidean boundary mass integrates 1 to the polygon perimeter.
    const AssembledOperator flat = assemble_operator(mesh, MetricField::euclidean(2));
    double perimeter = 0.0;
    for (int i = 0; i < mesh.num_boundary(); ++i) {
        perimeter += (mesh.nodes[static_cast<std::size_t>(mesh.boundary_loop[static_cast<std::size_t>(i)])] -
                      mesh.nodes[static_cast<std::size_t>(
                          mesh.boundary_loop[static_cast<std::size_t>((i + 1) % mesh.num_boundary())])])
                         .norm();
    }
    const Vec ones = Vec::Ones(mesh.num_boundary());
    CHECK(ones.dot(flat.boundary_mass * ones) == doctest::Approx(perimeter).epsilon(1e-13));
    CHECK(is_m_matrix(flat.stiffness));
}

TEST_CASE("2D stiffness is invariant under constant scaling of the metric") {
    const TriMesh mesh = build_disk_mesh(1.0, 0.1);
    const Mat k1 = Mat(assemble_operator(mesh, MetricField::euclidean(2)).stiffness);
    const Mat k4 = Mat(assemble_operator(mesh, MetricField::constant(4.0 * Mat::Identity(2, 2))).stiffness);
    CHECK((k1 - k4).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("pullback mesh") {
    const TriMesh mesh = build_disk_mesh(1.0, 0.1);
    const TriMesh same = pullback_mesh(mesh, Diffeo::identity(2));
    for (int i = 0; i < mesh.num_nodes(); ++i) {
        CHECK((same.nodes[static_cast<std::size_t>(i)] - mesh.nodes[static_cast<std::size_t>(i)]).norm() == 0.0);
    }
    CHECK(same.triangles == mesh.triangles);

    const TriMesh moved = pullback_mesh(mesh, Diffeo::radial_disk(0.3));
    CHECK(moved.triangles == mesh.triangles);
    for (int b : mesh.boundary_loop) {
        CHECK(moved.nodes[static_cast<std::size_t>(b)].x() == mesh.nodes[static_cast<std::size_t>(b)].x());
        CHECK(moved.nodes[static_cast<std::size_t>(b)].y() == mesh.nodes[static_cast<std::size_t>(b)].y());
    }
    // Interior nodes follow the map.
    const Diffeo phi = Diffeo::radial_disk(0.3);
    for (int i = 0; i < mesh.num_nodes(); ++i) {
        const Vec img = phi(Vec(mesh.nodes[static_cast<std::size_t>(i)]));
        CHECK((moved.nodes[static_cast<std::size_t>(i)] - Point2(img(0), img(1))).norm() < 1e-14);
    }

    CHECK(code_of([&] { pullback_mesh(mesh, Diffeo::radial_disk(-3.0)); }) == ErrorCode::InvertedTriangle);
    Mat shift = 1.1 * Mat::Identity(2, 2);
    CHECK(code_of([&] { pullback_mesh(mesh, Diffeo::linear(shift)); }) == ErrorCode::NotBoundaryFixing);
}

TEST_CASE("discrete pullback invariance of the stiffness matrix") {
    const TriMesh mesh = build_disk_mesh(1.0, 0.05);
    const ElementMetric g = twisted_metric(mesh);
    const AssembledOperator a1 = assemble_operator(mesh, g);
    const Diffeo twist = Diffeo::from_map(
        [](const Vec& x) {
            const double r2 = x.squaredNorm(), s = 0.4 * (1.0 - r2);
            Vec y(2);
            y << std::cos(s) * x(0) - std::sin(s) * x(1), std::sin(s) * x(0) + std::cos(s) * x(1);
            return y;
        },
        2);
    for (const Diffeo& phi : {Diffeo::radial_disk(0.3), Diffeo::radial_disk(-0.2), twist}) {
        const TriMesh m2 = pullback_mesh(mesh, phi);
        const AssembledOperator a2 = assemble_operator(m2, push_forward_metric(mesh, m2, g));
        CHECK(Mat(a1.stiffness - a2.stiffness).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(Mat(a1.boundary_mass - a2.boundary_mass).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("scale_metric and sample_metric") {
    const TriMesh mesh = build_disk_mesh(1.0, 0.2);
    const ElementMetric g = sample_metric(mesh, MetricField::conformal_exp((Vec(2) << 0.5, 0.0).finished()));
    const ElementMetric s = scale_metric(mesh, g, [](const Point2& p) { return 2.0 + p.x(); });
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const Point2 c = mesh.centroid(t);
        CHECK((g[static_cast<std::size_t>(t)] - std::exp(c.x()) * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() <
              1e-14);
        CHECK((s[static_cast<std::size_t>(t)] - (2.0 + c.x()) * g[static_cast<std::size_t>(t)]).cwiseAbs().maxCoeff() <
              1e-14);
    }
    CHECK(code_of([&] { scale_metric(mesh, g, [](const Point2&) { return 0.0; }); }) ==
          ErrorCode::NonPositiveConformalFactor);
}

TEST_CASE("mesh file round trip") {
    const TriMesh mesh = build_disk_mesh(1.0, 0.1, Arc{0.5, 3.0});
    std::stringstream ss;
    write_mesh(ss, mesh);
    const TriMesh back = read_mesh(ss);
    REQUIRE(back.num_nodes() == mesh.num_nodes());
    for (int i = 0; i < mesh.num_nodes(); ++i) {
        CHECK(back.nodes[static_cast<std::size_t>(i)] == mesh.nodes[static_cast<std::size_t>(i)]);
    }
    CHECK(back.triangles == mesh.triangles);
    CHECK(back.boundary_loop == mesh.boundary_loop);
    CHECK(back.gamma_mask == mesh.gamma_mask);
    CHECK(back.h == mesh.h);

    std::stringstream bad("3 1");
    CHECK(code_of([&] { read_mesh(bad); }) == ErrorCode::IoError);
    CHECK(code_of([] { read_mesh_file("/nonexistent/mesh.txt"); }) == ErrorCode::IoError);
}

TEST_CASE("grid window and finite differences") {
    const Grid grid(32, Box{0.25, 0.75, 0.25, 0.75});
    CHECK(grid.h() == 1.0 / 32);
    CHECK(grid.num_interior() == 31 * 31);
    for (int node : grid.window_nodes()) CHECK(grid.window().contains(grid.point(node)));
    CHECK(grid.window_nodes().size() == 17u * 17u);
    for (int idx = 0; idx < grid.num_interior(); ++idx) CHECK(grid.interior_index(grid.interior_node(idx)) == idx);
    CHECK(grid.nearest_node(Point2(0.51, 0.49)) == grid.node(16, 16));

    // Central differences are exact on quadratics.
    const Vec u = grid.sample([](const Point2& p) { return 1.0 + 2.0 * p.x() - p.y() + 3.0 * p.x() * p.x() + p.x() * p.y() - 2.0 * p.y() * p.y(); });
    const int node = grid.node(9, 20);
    const Point2 p = grid.point(node);
    const Eigen::Vector2d grad = grid.gradient(u, node);
    CHECK(grad.x() == doctest::Approx(2.0 + 6.0 * p.x() + p.y()).epsilon(1e-12));
    CHECK(grad.y() == doctest::Approx(-1.0 + p.x() - 4.0 * p.y()).epsilon(1e-12));
    const Eigen::Matrix2d hess = grid.hessian(u, node);
    CHECK(hess(0, 0) == doctest::Approx(6.0).epsilon(1e-9));
    CHECK(hess(0, 1) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(hess(1, 1) == doctest::Approx(-4.0).epsilon(1e-9));

    CHECK(code_of([] { Grid(32, Box{0.02, 0.5, 0.25, 0.75}); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { Grid(3); }) == ErrorCode::InvalidArgument);
}
