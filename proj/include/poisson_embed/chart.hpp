#pragma once

#include "poisson_embed/mesh.hpp"

namespace poisson_embed {

enum class ChartKind { Cartesian, Harmonic, Isothermal, SolutionCoords };

// Local coordinates around a center point, sampled on a patch of nodes.
struct LocalChart {
    ChartKind kind = ChartKind::Cartesian;
    // -1 when the center is not a mesh node.
    int center_node = -1;
    Point2 center = Point2::Zero();
    double radius = 0.0;
    std::vector<int> patch;
    // Chart coordinates of the patch nodes relative to the chart value at the center.
    Eigen::MatrixX2d coords;
    // d(chart)/dx at the center; row i is the differential of coordinate i.
    Eigen::Matrix2d jacobian = Eigen::Matrix2d::Identity();
    // Nodal coordinate fields (empty for Cartesian charts).
    Mat fields;

    double jacobian_condition() const;
};

// Nodes within radius of p, coordinates x - p.
LocalChart cartesian_chart(const TriMesh& mesh, const Point2& p, double radius);

// Chart (u1, u2) centered at node x0 with the patch of nodes within radius.
// The Jacobian is read by a Cartesian quadratic fit of each field.
LocalChart field_chart(const TriMesh& mesh, int x0, const Vec& u1, const Vec& u2, double radius, ChartKind kind);

// Value, gradient and coordinate Hessian of a function at a chart center.
struct QuadraticFit {
    Point2 center = Point2::Zero();
    double value = 0.0;
    Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
    Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();
    // RMS misfit of the quadratic on the patch.
    double residual = 0.0;
    double radius = 0.0;
};

// Linear map from patch values to the 6 quadratic coefficients
// (value, d1, d2, d11, d12, d22) of a least-squares fit in chart coordinates.
class QuadraticFitOperator {
public:
    explicit QuadraticFitOperator(const LocalChart& chart);

    const Eigen::Matrix<double, 6, Eigen::Dynamic>& matrix() const { return op_; }
    // Applies to a full nodal field.
    QuadraticFit fit(const Vec& field) const;
    // Coefficient rows for many nodal fields at once (6 x cols).
    Mat coefficients(const Mat& fields) const;

private:
    std::vector<int> patch_;
    Point2 center_;
    double radius_;
    Eigen::Matrix<double, 6, Eigen::Dynamic> op_;
    Mat design_;
};

QuadraticFit local_quadratic_fit(const Vec& field, const LocalChart& chart);

QuadraticFit fit_from_coefficients(const Eigen::Matrix<double, 6, 1>& c);

} // namespace poisson_embed
