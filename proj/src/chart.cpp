#include "poisson_embed/chart.hpp"

#include "poisson_embed/errors.hpp"

#include <cmath>

namespace poisson_embed {

double LocalChart::jacobian_condition() const {
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(jacobian);
    const auto s = svd.singularValues();
    return s(1) > 0.0 ? s(0) / s(1) : std::numeric_limits<double>::infinity();
}

LocalChart cartesian_chart(const TriMesh& mesh, const Point2& p, double radius) {
    LocalChart chart;
    chart.kind = ChartKind::Cartesian;
    chart.center = p;
    chart.radius = radius;
    for (int i = 0; i < mesh.num_nodes(); ++i) {
        if ((mesh.nodes[i] - p).norm() <= radius) chart.patch.push_back(i);
        if ((mesh.nodes[i] - p).norm() == 0.0) chart.center_node = i;
    }
    chart.coords.resize(static_cast<Eigen::Index>(chart.patch.size()), 2);
    for (std::size_t k = 0; k < chart.patch.size(); ++k) {
        chart.coords.row(static_cast<Eigen::Index>(k)) = (mesh.nodes[chart.patch[k]] - p).transpose();
    }
    return chart;
}

LocalChart field_chart(const TriMesh& mesh, int x0, const Vec& u1, const Vec& u2, double radius, ChartKind kind) {
    LocalChart cart = cartesian_chart(mesh, mesh.nodes[x0], radius);
    const QuadraticFitOperator fit(cart);
    LocalChart chart = cart;
    chart.kind = kind;
    chart.center_node = x0;
    chart.fields.resize(mesh.num_nodes(), 2);
    chart.fields.col(0) = u1;
    chart.fields.col(1) = u2;
    chart.jacobian.row(0) = fit.fit(u1).gradient.transpose();
    chart.jacobian.row(1) = fit.fit(u2).gradient.transpose();
    for (std::size_t k = 0; k < chart.patch.size(); ++k) {
        const int n = chart.patch[k];
        chart.coords(static_cast<Eigen::Index>(k), 0) = u1(n) - u1(x0);
        chart.coords(static_cast<Eigen::Index>(k), 1) = u2(n) - u2(x0);
    }
    return chart;
}

QuadraticFitOperator::QuadraticFitOperator(const LocalChart& chart)
    : patch_(chart.patch), center_(chart.center), radius_(chart.radius) {
    const auto np = static_cast<Eigen::Index>(patch_.size());
    if (np < 12) {
        throw Error(ErrorCode::RankDeficientStencil,
                    "quadratic fit needs at least 12 patch nodes, got " + std::to_string(np));
    }
    // Coordinates scaled by their extent so the design matrix is O(1).
    double scale = 0.0;
    for (Eigen::Index k = 0; k < np; ++k) scale = std::max(scale, chart.coords.row(k).norm());
    if (!(scale > 0.0)) throw Error(ErrorCode::RankDeficientStencil, "patch coordinates are degenerate");

    design_.resize(np, 6);
    for (Eigen::Index k = 0; k < np; ++k) {
        const double a = chart.coords(k, 0) / scale, b = chart.coords(k, 1) / scale;
        design_.row(k) << 1.0, a, b, 0.5 * a * a, a * b, 0.5 * b * b;
    }
    Eigen::JacobiSVD<Mat> svd(design_, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec s = svd.singularValues();
    if (!(s(5) > 1e-10 * s(0))) throw Error(ErrorCode::RankDeficientStencil, "patch does not determine a quadratic");
    const Mat pinv = svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
    Eigen::Matrix<double, 6, 1> unscale;
    unscale << 1.0, 1.0 / scale, 1.0 / scale, 1.0 / (scale * scale), 1.0 / (scale * scale), 1.0 / (scale * scale);
    op_ = unscale.asDiagonal() * pinv;
    for (Eigen::Index k = 0; k < np; ++k) {
        design_.row(k) << 1.0, chart.coords(k, 0), chart.coords(k, 1), 0.5 * chart.coords(k, 0) * chart.coords(k, 0),
            chart.coords(k, 0) * chart.coords(k, 1), 0.5 * chart.coords(k, 1) * chart.coords(k, 1);
    }
}

QuadraticFit fit_from_coefficients(const Eigen::Matrix<double, 6, 1>& c) {
    QuadraticFit f;
    f.value = c(0);
    f.gradient = Eigen::Vector2d(c(1), c(2));
    f.hessian << c(3), c(4), c(4), c(5);
    return f;
}

QuadraticFit QuadraticFitOperator::fit(const Vec& field) const {
    Vec local(static_cast<Eigen::Index>(patch_.size()));
    for (std::size_t k = 0; k < patch_.size(); ++k) local(static_cast<Eigen::Index>(k)) = field(patch_[k]);
    const Eigen::Matrix<double, 6, 1> c = op_ * local;
    QuadraticFit f = fit_from_coefficients(c);
    f.center = center_;
    f.radius = radius_;
    f.residual = std::sqrt((design_ * c - local).squaredNorm() / static_cast<double>(local.size()));
    return f;
}

Mat QuadraticFitOperator::coefficients(const Mat& fields) const {
    Mat local(static_cast<Eigen::Index>(patch_.size()), fields.cols());
    for (std::size_t k = 0; k < patch_.size(); ++k) local.row(static_cast<Eigen::Index>(k)) = fields.row(patch_[k]);
    return op_ * local;
}

QuadraticFit local_quadratic_fit(const Vec& field, const LocalChart& chart) {
    return QuadraticFitOperator(chart).fit(field);
}

} // namespace poisson_embed
