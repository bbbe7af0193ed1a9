#pragma once

#include "poisson_embed/chart.hpp"
#include "poisson_embed/grid.hpp"
#include "poisson_embed/harmonic.hpp"

namespace poisson_embed {

enum class SourceKind { BoundaryOnGamma, InteriorOnW };

// Columns are source vectors: boundary data indexed by boundary-loop
// position, or interior sources as full nodal vectors.
struct SourceBasis {
    SourceKind kind = SourceKind::BoundaryOnGamma;
    Mat vectors;

    int size() const { return static_cast<int>(vectors.cols()); }
    SourceBasis columns(const std::vector<int>& cols) const;

    // 1, cos t, sin t, cos 2t, ... (K columns). Gamma must be the full circle.
    static SourceBasis fourier(const HarmonicSolver& solver, int count);
    // K hat functions on a uniform grid of the Gamma arc, vanishing at its ends.
    static SourceBasis hats(const HarmonicSolver& solver, int count);
    // Fourier modes on a full-circle Gamma, hats otherwise.
    static SourceBasis for_gamma(const HarmonicSolver& solver, int count);
    // One nodal source per window node.
    static SourceBasis interior_nodes(const TriMesh& mesh, const std::vector<int>& window);
};

// Nodal fields u_{f_k} for every basis vector (n x K).
Mat solve_basis(const HarmonicSolver& solver, const SourceBasis& basis);

// Tikhonov solution of min |A x - b|^2 + reg |x|^2 with reg = reg_rel * |A^T A|,
// falling back to truncated SVD when cond(A) > 1e12.
struct RegularizedSolution {
    Vec x;
    double condition = 0.0;
    bool truncated = false;
    int rank = 0;
};
RegularizedSolution regularized_lstsq(const Mat& a, const Vec& b, double reg_rel = 1e-10);

struct LocalFit {
    Vec coefficients;
    double relative_residual = 0.0;
    bool target_not_harmonic = false;
    double harmonicity_defect = 0.0;
    double condition = 0.0;
};

// Fits sum_k c_k u_{f_k} to target on the node set U in the lumped L2(U) norm.
// target is a full nodal vector; only its values on U are used.
LocalFit fit_local_solution(const HarmonicSolver& solver, const Mat& basis_fields, const std::vector<int>& region,
                            const Vec& target, double reg_rel = 1e-10);
LocalFit fit_local_solution(const HarmonicSolver& solver, const SourceBasis& basis, const std::vector<int>& region,
                            const Vec& target, double reg_rel = 1e-10);

// Metric at p: the analytic field when present, otherwise the element
// metric of the triangle with the nearest centroid.
Eigen::Matrix2d metric_at(const HarmonicSolver& solver, const Point2& p);

// Nodes within radius of center.
std::vector<int> nodes_in_ball(const TriMesh& mesh, const Point2& center, double radius);

struct Jet {
    double value = 0.0;
    Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
    Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();
};

// Target 2-jet; hessian must be trace-free for the metric at p.
struct Jet2Target {
    Point2 p = Point2::Zero();
    double a0 = 0.0;
    Eigen::Vector2d xi0 = Eigen::Vector2d::Zero();
    Eigen::Matrix2d h0 = Eigen::Matrix2d::Zero();
};

struct JetFit {
    Vec coefficients;
    Vec boundary_data;
    Vec field;
    Jet target;
    Jet achieved;
    double tol_jet = 0.0;
    double max_error = 0.0;
    bool within_tolerance = false;
};

// tol_jet = max(1e-3, h)
double jet_tolerance(double h);

// Patch radius used for all jet readouts.
double readout_radius(double h);

// Boundary data on Gamma whose solution has the given value, gradient and
// covariant Hessian at p (read by a local quadratic fit around p).
JetFit prescribe_jet(const HarmonicSolver& solver, const SourceBasis& basis, const Jet2Target& target,
                     double reg_rel = 1e-10);
JetFit prescribe_jet(const HarmonicSolver& solver, const SourceBasis& basis, const Mat& basis_fields,
                     const Jet2Target& target, double reg_rel = 1e-10);

// Generic form: constrains value, gradient and the Hessian components along
// an orthonormal set of symmetric matrices, all read in the given chart.
JetFit prescribe_jet_in_chart(const SourceBasis& basis, const Mat& basis_fields, const LocalChart& chart,
                              const Jet& target, const std::vector<Eigen::Matrix2d>& hessian_directions,
                              double h, double reg_rel = 1e-10);

struct Separation {
    Vec coefficients;
    Vec boundary_data;
    double separation = 0.0;
};

// Unit-norm coefficients maximizing |u_f(x) - u_f(y)|.
Separation separate_points(const HarmonicSolver& solver, const SourceBasis& basis, int x, int y);

// Sparse grid operator on interior unknowns with factorizations of L and L^T.
class GridLinearSolver {
public:
    GridLinearSolver(const Grid& grid, SpMat matrix);

    const Grid& grid() const { return grid_; }
    const SpMat& matrix() const { return matrix_; }
    // Interior-indexed solves.
    Vec solve(const Vec& rhs) const;
    Vec solve_transpose(const Vec& rhs) const;
    // Full nodal field from a full nodal source (zero Dirichlet data).
    Vec solve_source(const Vec& source) const;
    // 2-norm condition number estimate: power iteration on L^T L and on its inverse.
    double condition_estimate(int iterations = 40) const;

private:
    Grid grid_;
    SpMat matrix_;
    std::shared_ptr<const Eigen::SparseLU<SpMat>> lu_;
    std::shared_ptr<const Eigen::SparseLU<SpMat>> lu_t_;
};

struct InteriorSourceControl {
    Vec source;           // full nodal vector, supported in the window
    Vec field;            // zero-Dirichlet solution
    Eigen::Vector2d achieved = Eigen::Vector2d::Zero();
    double tol_jet = 0.0;
    bool within_tolerance = false;
};

// Window-supported source whose solution has gradient v at node x.
InteriorSourceControl prescribe_gradient_interior_source(const GridLinearSolver& op, const std::vector<int>& window,
                                                         int x, const Eigen::Vector2d& v, double reg_rel = 1e-10);

} // namespace poisson_embed
