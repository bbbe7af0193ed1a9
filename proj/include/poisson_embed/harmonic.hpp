#pragma once

#include "poisson_embed/mesh.hpp"

#include <Eigen/SparseCholesky>

#include <memory>
#include <optional>

namespace poisson_embed {

// Weak Dirichlet-to-Neumann map on the boundary loop.
struct DnMap {
    Mat lambda;
    SpMat boundary_mass;

    // Discrete Neumann data M^{-1} Lambda f.
    Vec neumann_values(const Vec& f) const;
    // f^T Lambda f / f^T M f
    double rayleigh_quotient(const Vec& f) const;
};

// Discrete harmonic measure of an interior node: a probability vector over
// the boundary loop with weights . f == u_f(node).
struct HarmonicMeasureRow {
    int node = -1;
    Vec weights;
};

// Factorized discrete Dirichlet problem on a triangulated domain.
// Immutable after construction; solves may run concurrently.
class HarmonicSolver {
public:
    HarmonicSolver(TriMesh mesh, ElementMetric metric, std::optional<MetricField> field = std::nullopt);
    HarmonicSolver(TriMesh mesh, const MetricField& metric);

    const TriMesh& mesh() const { return mesh_; }
    const ElementMetric& element_metric() const { return metric_; }
    const std::optional<MetricField>& metric_field() const { return field_; }
    const SpMat& stiffness() const { return op_.stiffness; }
    const SpMat& boundary_mass() const { return op_.boundary_mass; }
    const std::vector<int>& interior_nodes() const { return interior_; }
    int num_boundary() const { return mesh_.num_boundary(); }

    // f is indexed by boundary-loop position; returns the full nodal field.
    Vec solve_dirichlet(const Vec& f) const;
    Mat solve_dirichlet(const Mat& f) const;

    // Zero Dirichlet data, load vector b (full nodal vector, boundary rows ignored).
    Vec solve_load(const Vec& b) const;

    DnMap dn_map() const;
    HarmonicMeasureRow harmonic_measure_row(int node) const;

    // Nodal values of a function at the boundary-loop nodes.
    Vec boundary_values(const std::function<double(const Point2&)>& f) const;
    // Polar angle of each boundary-loop node.
    Vec boundary_angles() const;

private:
    TriMesh mesh_;
    ElementMetric metric_;
    std::optional<MetricField> field_;
    AssembledOperator op_;
    std::vector<int> interior_;
    std::vector<int> interior_pos_;
    SpMat k_ii_, k_ib_, k_bb_;
    std::shared_ptr<const Eigen::SimplicialLLT<SpMat>> factor_;

    void setup();
};

struct ConformalCheck {
    double dn_discrepancy = 0.0;
    // Set when c != 1 somewhere on the boundary.
    bool boundary_warning = false;
};

// Max-norm difference of the DN matrices for g and c g.
ConformalCheck conformal_invariance_check_2d(const TriMesh& mesh, const MetricField& metric,
                                             const std::function<double(const Point2&)>& c);

// Area-weighted average of the adjacent P1 triangle gradients (n x 2).
Eigen::MatrixX2d recover_gradients(const TriMesh& mesh, const Vec& u);

} // namespace poisson_embed
