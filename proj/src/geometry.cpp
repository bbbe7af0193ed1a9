#include "poisson_embed/geometry.hpp"

#include "poisson_embed/errors.hpp"

#include <cmath>
#include <sstream>

namespace poisson_embed {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonSpdMetric: return "NonSpdMetric";
    case ErrorCode::NonPositiveConformalFactor: return "NonPositiveConformalFactor";
    case ErrorCode::DependentInputs: return "DependentInputs";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::DegenerateMesh: return "DegenerateMesh";
    case ErrorCode::DegenerateArc: return "DegenerateArc";
    case ErrorCode::InvertedTriangle: return "InvertedTriangle";
    case ErrorCode::NotBoundaryFixing: return "NotBoundaryFixing";
    case ErrorCode::FactorizationFailed: return "FactorizationFailed";
    case ErrorCode::BoundaryNodeRequested: return "BoundaryNodeRequested";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::InfeasibleTrace: return "InfeasibleTrace";
    case ErrorCode::XInsideW: return "XInsideW";
    case ErrorCode::RankDeficientGradients: return "RankDeficientGradients";
    case ErrorCode::RankDeficientStencil: return "RankDeficientStencil";
    case ErrorCode::NullspaceNotOneDim: return "NullspaceNotOneDim";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::LargeCurlResidual: return "LargeCurlResidual";
    case ErrorCode::DegenerateGradient: return "DegenerateGradient";
    case ErrorCode::NotConformalAtTolerance: return "NotConformalAtTolerance";
    case ErrorCode::DegenerateTangent: return "DegenerateTangent";
    case ErrorCode::NewtonDiverged: return "NewtonDiverged";
    case ErrorCode::SingularLinearization: return "SingularLinearization";
    case ErrorCode::AmplitudeCap: return "AmplitudeCap";
    case ErrorCode::ProbeOutsideSmallData: return "ProbeOutsideSmallData";
    case ErrorCode::CutoffOverlap: return "CutoffOverlap";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::MissingBaseline: return "MissingBaseline";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

// ---------------------------------------------------------------------------
// MetricField

MetricField::MetricField(int dim, ValueFn value, DerivFn deriv, double fd_step)
    : dim_(dim), value_(std::move(value)), deriv_(std::move(deriv)), fd_step_(fd_step) {
    if (dim < 1 || !value_) {
        throw Error(ErrorCode::InvalidArgument, "metric field needs a positive dimension and a value closure");
    }
}

Mat MetricField::operator()(const Vec& x) const { return value_(x); }

std::vector<Mat> MetricField::fd_derivative(const Vec& x) const {
    std::vector<Mat> d(dim_);
    for (int c = 0; c < dim_; ++c) {
        Vec xp = x, xm = x;
        xp(c) += fd_step_;
        xm(c) -= fd_step_;
        d[c] = (value_(xp) - value_(xm)) / (2.0 * fd_step_);
    }
    return d;
}

std::vector<Mat> MetricField::derivative(const Vec& x) const {
    return deriv_ ? deriv_(x) : fd_derivative(x);
}

void MetricField::check_spd(const Vec& x, double floor) const {
    const Mat g = value_(x);
    const double asym = (g - g.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, g.cwiseAbs().maxCoeff())) {
        throw Error(ErrorCode::NonSpdMetric, "metric is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(g, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > floor)) {
        std::ostringstream os;
        os << "minimum eigenvalue " << eig.eigenvalues().minCoeff() << " below floor " << floor;
        throw Error(ErrorCode::NonSpdMetric, os.str());
    }
}

MetricField MetricField::euclidean(int dim) {
    return MetricField(
        dim, [dim](const Vec&) { return Mat(Mat::Identity(dim, dim)); },
        [dim](const Vec&) { return std::vector<Mat>(dim, Mat::Zero(dim, dim)); });
}

MetricField MetricField::constant(const Mat& g) {
    const int n = static_cast<int>(g.rows());
    return MetricField(
        n, [g](const Vec&) { return g; },
        [n](const Vec&) { return std::vector<Mat>(n, Mat::Zero(n, n)); });
}

MetricField MetricField::conformal_exp(const Vec& a) {
    const int n = static_cast<int>(a.size());
    return MetricField(
        n, [a, n](const Vec& x) { return Mat(std::exp(2.0 * a.dot(x)) * Mat::Identity(n, n)); },
        [a, n](const Vec& x) {
            const double e = std::exp(2.0 * a.dot(x));
            std::vector<Mat> d(n);
            for (int c = 0; c < n; ++c) d[c] = 2.0 * a(c) * e * Mat::Identity(n, n);
            return d;
        });
}

MetricField MetricField::scaled(const MetricField& base, const ScalarField& lambda) {
    return MetricField(
        base.dim(), [base, lambda](const Vec& x) { return Mat(lambda.value(x) * base(x)); },
        [base, lambda](const Vec& x) {
            const double l = lambda.value(x);
            const Vec dl = lambda.gradient(x);
            const Mat g = base(x);
            std::vector<Mat> d = base.derivative(x);
            for (int c = 0; c < base.dim(); ++c) d[c] = dl(c) * g + l * d[c];
            return d;
        });
}

// ---------------------------------------------------------------------------
// Diffeo

Diffeo Diffeo::identity(int dim) {
    return {[](const Vec& x) { return x; }, [dim](const Vec&) { return Mat(Mat::Identity(dim, dim)); }};
}

Diffeo Diffeo::linear(const Mat& a) {
    return {[a](const Vec& x) { return Vec(a * x); }, [a](const Vec&) { return a; }};
}

namespace {

Mat radial_jacobian(double amp, const Vec& x) {
    const double r = x.norm();
    if (r == 0.0) return (1.0 + amp) * Mat::Identity(2, 2);
    return (1.0 + amp - amp * r) * Mat::Identity(2, 2) - amp * x * x.transpose() / r;
}

Vec radial_inverse(double amp, const Vec& y) {
    const double s = y.norm();
    if (s == 0.0) return y;
    if (amp == 0.0) return y;
    const double b = 1.0 + amp;
    // Root of amp r^2 - b r + s = 0 on [0, 1], written to avoid cancellation.
    const double r = 2.0 * s / (b + std::sqrt(b * b - 4.0 * amp * s));
    return (r / s) * y;
}

} // namespace

Diffeo Diffeo::radial_disk(double amplitude) {
    return {[amplitude](const Vec& x) { return Vec((1.0 + amplitude - amplitude * x.norm()) * x); },
            [amplitude](const Vec& x) { return radial_jacobian(amplitude, x); }};
}

Diffeo Diffeo::radial_disk_inverse(double amplitude) {
    return {[amplitude](const Vec& y) { return radial_inverse(amplitude, y); },
            [amplitude](const Vec& y) {
                return Mat(radial_jacobian(amplitude, radial_inverse(amplitude, y)).inverse());
            }};
}

Diffeo Diffeo::from_map(std::function<Vec(const Vec&)> map, int dim, double step) {
    auto jac = [map, dim, step](const Vec& x) {
        Mat j(dim, dim);
        for (int c = 0; c < dim; ++c) {
            Vec xp = x, xm = x;
            xp(c) += step;
            xm(c) -= step;
            j.col(c) = (map(xp) - map(xm)) / (2.0 * step);
        }
        return j;
    };
    return {map, jac};
}

Diffeo compose(const Diffeo& outer, const Diffeo& inner) {
    return {[outer, inner](const Vec& x) { return outer.map(inner.map(x)); },
            [outer, inner](const Vec& x) { return Mat(outer.jacobian(inner.map(x)) * inner.jacobian(x)); }};
}

// ---------------------------------------------------------------------------
// Christoffel symbols

namespace {

Eigen::LLT<Mat> factor_metric(const Mat& g) {
    Eigen::LLT<Mat> llt(g);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::NonSpdMetric, "Cholesky of metric failed");
    return llt;
}

} // namespace

ChristoffelData christoffel(const MetricField& metric, const Vec& x) {
    const int n = metric.dim();
    const Mat g = metric(x);
    const Mat ginv = factor_metric(g).solve(Mat::Identity(n, n));
    const std::vector<Mat> dg = metric.derivative(x);

    ChristoffelData out;
    out.gamma.assign(n, Mat::Zero(n, n));
    for (int k = 0; k < n; ++k) {
        for (int a = 0; a < n; ++a) {
            for (int b = a; b < n; ++b) {
                double s = 0.0;
                for (int l = 0; l < n; ++l) {
                    s += ginv(k, l) * (dg[a](b, l) + dg[b](a, l) - dg[l](a, b));
                }
                out.gamma[k](a, b) = 0.5 * s;
                out.gamma[k](b, a) = 0.5 * s;
            }
        }
    }
    // Gamma_a = g_ak g^ij Gamma^k_ij
    Vec contracted_up(n);
    for (int k = 0; k < n; ++k) contracted_up(k) = (ginv.cwiseProduct(out.gamma[k])).sum();
    out.contracted = g * contracted_up;
    return out;
}

Vec contracted_christoffel(const MetricField& metric, const Vec& x) {
    const int n = metric.dim();
    const Mat g = metric(x);
    const Mat ginv = factor_metric(g).solve(Mat::Identity(n, n));
    const std::vector<Mat> dg = metric.derivative(x);
    // |g|^{-1/2} d_c(|g|^{1/2} g^{bc}), the |g|^{1/2} factors cancel.
    Vec div = Vec::Zero(n);
    for (int c = 0; c < n; ++c) {
        const double half_trace = 0.5 * (ginv * dg[c]).trace();
        const Mat dginv = -ginv * dg[c] * ginv;
        div += half_trace * ginv.col(c) + dginv.col(c);
    }
    return -g * div;
}

double contracted_christoffel_scaling_check(const MetricField& metric, const ScalarField& lambda, const Vec& x) {
    const double l = lambda.value(x);
    if (!(l > 0.0)) throw Error(ErrorCode::NonPositiveConformalFactor, "conformal factor must be positive");
    const int n = metric.dim();
    const MetricField scaled = MetricField::scaled(metric, lambda);
    const Vec dlog = lambda.gradient(x) / l;
    const Vec residual =
        contracted_christoffel(scaled, x) - contracted_christoffel(metric, x) + 0.5 * (n - 2) * dlog;
    return residual.cwiseAbs().maxCoeff();
}

MetricField pullback_metric(const MetricField& metric, const Diffeo& phi) {
    auto value = [metric, phi](const Vec& x) {
        const Mat j = phi.jacobian(x);
        if (std::abs(j.determinant()) < 1e-14) {
            throw Error(ErrorCode::SingularJacobian, "pullback through a singular Jacobian");
        }
        return Mat(j.transpose() * metric(phi.map(x)) * j);
    };
    return MetricField(metric.dim(), value);
}

// ---------------------------------------------------------------------------
// Symmetric matrices

SymSpace::SymSpace(int n) : n_(n) {
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "SymSpace dimension must be positive");
}

Vec SymSpace::vectorize(const Mat& s) const {
    Vec v(dim());
    int idx = 0;
    for (int i = 0; i < n_; ++i) {
        v(idx++) = s(i, i);
        for (int j = i + 1; j < n_; ++j) v(idx++) = std::sqrt(2.0) * 0.5 * (s(i, j) + s(j, i));
    }
    return v;
}

Mat SymSpace::unvectorize(const Vec& v) const {
    Mat s(n_, n_);
    int idx = 0;
    for (int i = 0; i < n_; ++i) {
        s(i, i) = v(idx++);
        for (int j = i + 1; j < n_; ++j) {
            s(i, j) = s(j, i) = v(idx++) / std::sqrt(2.0);
        }
    }
    return s;
}

std::vector<Mat> SymSpace::orthonormal_basis() const {
    std::vector<Mat> basis;
    for (int k = 0; k < dim(); ++k) basis.push_back(unvectorize(Vec::Unit(dim(), k)));
    return basis;
}

Mat canonical_sign(const SymSpace& space, const Mat& s) {
    const double tr = s.trace();
    const double scale = s.norm();
    if (std::abs(tr) > 1e-14 * scale) return tr > 0 ? s : Mat(-s);
    const Vec v = space.vectorize(s);
    for (int i = 0; i < v.size(); ++i) {
        if (std::abs(v(i)) > 1e-14 * scale) return v(i) > 0 ? s : Mat(-s);
    }
    return s;
}

Mat hodge_star_sym(const SymSpace& space, std::span<const Mat> matrices) {
    const int d = space.dim();
    const int m = d - 1;
    if (static_cast<int>(matrices.size()) != m) {
        throw Error(ErrorCode::InvalidArgument, "hodge_star_sym needs exactly n(n+1)/2 - 1 matrices");
    }
    Mat rows(m, d);
    for (int i = 0; i < m; ++i) rows.row(i) = space.vectorize(matrices[i]).transpose();

    Eigen::SelfAdjointEigenSolver<Mat> gram(rows * rows.transpose(), Eigen::EigenvaluesOnly);
    const double smax = std::sqrt(std::max(gram.eigenvalues().maxCoeff(), 0.0));
    const double smin = std::sqrt(std::max(gram.eigenvalues().minCoeff(), 0.0));
    if (!(smin > 1e-10 * smax)) throw Error(ErrorCode::DependentInputs, "inputs are linearly dependent");

    // w_i = det[rows; e_i], cofactor expansion along the appended row.
    Vec w(d);
    for (int i = 0; i < d; ++i) {
        Mat minor(m, m);
        for (int c = 0, cc = 0; c < d; ++c) {
            if (c == i) continue;
            minor.col(cc++) = rows.col(c);
        }
        const double sign = ((m + i) % 2 == 0) ? 1.0 : -1.0;
        w(i) = sign * (m == 0 ? 1.0 : minor.determinant());
    }
    return canonical_sign(space, space.unvectorize(w / w.norm()));
}

} // namespace poisson_embed
