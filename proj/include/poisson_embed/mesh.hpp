#pragma once

#include "poisson_embed/geometry.hpp"

#include <Eigen/Sparse>

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace poisson_embed {

using Point2 = Eigen::Vector2d;
using SpMat = Eigen::SparseMatrix<double>;

// Angular interval [begin, end] in radians; end - begin >= 2 pi means the full circle.
struct Arc {
    double begin = 0.0;
    double end = 2.0 * 3.14159265358979323846;

    bool full() const;
    bool contains(double angle) const;
    double length() const;
};

// Triangulated disk-type domain. Triangles are counterclockwise; the boundary
// loop is the ordered list of boundary node indices.
struct TriMesh {
    std::vector<Point2> nodes;
    std::vector<std::array<int, 3>> triangles;
    std::vector<int> boundary_loop;
    // Per node; true only for boundary nodes on Gamma.
    std::vector<char> gamma_mask;
    double h = 0.0;
    bool delaunay = false;
    bool non_obtuse = false;

    int num_nodes() const { return static_cast<int>(nodes.size()); }
    int num_triangles() const { return static_cast<int>(triangles.size()); }
    int num_boundary() const { return static_cast<int>(boundary_loop.size()); }

    double signed_area(int t) const;
    Point2 centroid(int t) const;
    // 2x3 matrix of barycentric basis gradients on triangle t.
    Eigen::Matrix<double, 2, 3> basis_gradients(int t) const;

    // Per-node flag, 1 on the boundary loop.
    std::vector<char> boundary_flags() const;
    // Position of each node in boundary_loop, -1 for interior nodes.
    std::vector<int> boundary_position() const;
    // Triangles incident to each node.
    std::vector<std::vector<int>> node_triangles() const;
    // Unique undirected edges (i < j).
    std::vector<std::array<int, 2>> edges() const;

    // Recomputes h and the quality flags; validates the invariants.
    void finalize();
};

TriMesh build_disk_mesh(double radius, double target_h, const Arc& gamma_arc = {});

// Maps node positions through phi, keeping connectivity.
TriMesh map_mesh(const TriMesh& mesh, const Diffeo& phi);

// map_mesh for boundary-fixing maps: boundary nodes keep their exact
// coordinates (displacements up to 1e-14 are snapped back).
TriMesh pullback_mesh(const TriMesh& mesh, const Diffeo& phi);

// Piecewise-constant metric, one SPD 2x2 matrix per triangle.
using ElementMetric = std::vector<Eigen::Matrix2d>;

// Samples g at triangle centroids.
ElementMetric sample_metric(const TriMesh& mesh, const MetricField& metric);

// Transports per-triangle metric data from src to dst (same connectivity)
// through the affine map of each triangle: g' = A^{-T} g A^{-1}.
ElementMetric push_forward_metric(const TriMesh& src, const TriMesh& dst, const ElementMetric& metric);

// Multiplies each triangle's metric by c(centroid).
ElementMetric scale_metric(const TriMesh& mesh, const ElementMetric& metric,
                           const std::function<double(const Point2&)>& c);

struct AssembledOperator {
    // Weak Laplace-Beltrami stiffness, sum_T |T| sqrt|g| g^{ab} d_a phi_i d_b phi_j.
    SpMat stiffness;
    // Consistent P1 mass on the boundary loop, indexed by boundary position,
    // using the metric arc length of each boundary edge.
    SpMat boundary_mass;
};

Eigen::Matrix3d local_stiffness(const Point2& p0, const Point2& p1, const Point2& p2, const Eigen::Matrix2d& g);

AssembledOperator assemble_operator(const TriMesh& mesh, const ElementMetric& metric);
AssembledOperator assemble_operator(const TriMesh& mesh, const MetricField& metric);

// True when every off-diagonal entry is <= tol * max|diag|.
bool is_m_matrix(const SpMat& k, double tol = 1e-12);

void write_mesh(std::ostream& os, const TriMesh& mesh);
TriMesh read_mesh(std::istream& is);
void write_mesh_file(const std::string& path, const TriMesh& mesh);
TriMesh read_mesh_file(const std::string& path);

} // namespace poisson_embed
