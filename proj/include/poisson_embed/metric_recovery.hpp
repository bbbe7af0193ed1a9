#pragma once

#include "poisson_embed/runge.hpp"

#include <span>

namespace poisson_embed {

// Chart (u, v) at x0 from two solutions with du(x0) = e1, dv(x0) = e2.
// fields are the basis solutions (n x K). The patch radius is readout_radius(h).
LocalChart build_harmonic_chart(const HarmonicSolver& solver, const SourceBasis& basis, const Mat& fields, int x0);

struct InverseMetricEstimate {
    // Unit Hilbert-Schmidt norm, positive definite.
    Mat direction;
    Mat svd_route;
    Mat hodge_route;
    double route_agreement = 0.0;
    // Singular values of the stacked vectorized Hessians.
    Vec singular_values;
    std::vector<Mat> hessians;
};

// Direction of g^{-1} from dim(Sym) - 1 independent Hessians of harmonic
// functions in harmonic coordinates, by the SVD nullspace and by the Hodge
// star; the two must agree to 1e-8.
InverseMetricEstimate inverse_metric_from_hessians(std::span<const Mat> hessians);

// Full pipeline at the chart center: learns the Hessian plane of the basis
// solutions, prescribes two fields with Hessians spanning it, reads their
// chart Hessians and recovers the direction of g^{-1} in chart coordinates.
InverseMetricEstimate recover_inverse_metric(const HarmonicSolver& solver, const SourceBasis& basis,
                                             const Mat& fields, const LocalChart& chart);

// Unit-HS g^{-1} in the coordinates of a chart with Jacobian jac: jac g^{-1} jac^T.
Mat normalized_inverse_metric(const Eigen::Matrix2d& g, const Eigen::Matrix2d& jac = Eigen::Matrix2d::Identity());

struct Conjugate {
    Vec v;
    // Max over triangles of |circulation| / (perimeter * RMS |*du|), with
    // edge forms averaged over adjacent triangles.
    double max_circulation = 0.0;
    // Max over interior nodes of the dual-cell circulation / (dual area * RMS |*du|).
    double max_dual_circulation = 0.0;
    int root = -1;
};

// v with dv = *_g du (for g = I, u = x1 gives v = x2), v(root) = 0, integrated
// along a breadth-first spanning tree of mesh edges.
Conjugate harmonic_conjugate(const TriMesh& mesh, const ElementMetric& metric, const Vec& u, int root);

struct IsothermalChart {
    LocalChart chart;
    // J^{-T} g J^{-1} at x0.
    Eigen::Matrix2d pulled_back = Eigen::Matrix2d::Identity();
    double conformal_factor = 0.0;
    double off_diagonal_ratio = 0.0;
    double diagonal_mismatch = 0.0;
    // c |du|_g^2, equal to 1 for an isothermal chart.
    double normalization = 0.0;
    double tolerance = 0.0;
    Conjugate conjugate;
};

IsothermalChart build_isothermal_chart(const HarmonicSolver& solver, const SourceBasis& basis, const Mat& fields,
                                       int x0);

struct HomothetyReport {
    double mean = 0.0;
    double max_deviation = 0.0;
    int count = 0;
};

// Ratio g1(t, t) / g2(t, t) for boundary tangents t at Gamma nodes.
HomothetyReport boundary_homothety_check(const TriMesh& mesh, const MetricField& g1, const MetricField& g2);

} // namespace poisson_embed
