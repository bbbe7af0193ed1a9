#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

namespace poisson_embed {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Scalar field with gradient, used for conformal factors.
struct ScalarField {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient;
};

enum class Provenance { Analytic, FiniteDifference };

// Smooth field x -> g_ab(x) of symmetric positive definite matrices.
// When no derivative closure is given the first derivatives are taken by
// central differences with step fd_step.
class MetricField {
public:
    using ValueFn = std::function<Mat(const Vec&)>;
    // Returns {d_0 g, ..., d_{n-1} g}.
    using DerivFn = std::function<std::vector<Mat>(const Vec&)>;

    static constexpr double kDefaultStep = 1e-5;

    MetricField(int dim, ValueFn value, DerivFn deriv = {}, double fd_step = kDefaultStep);

    int dim() const { return dim_; }
    Provenance provenance() const { return deriv_ ? Provenance::Analytic : Provenance::FiniteDifference; }
    double fd_step() const { return fd_step_; }

    Mat operator()(const Vec& x) const;
    std::vector<Mat> derivative(const Vec& x) const;
    // Central differences of the value closure, regardless of provenance.
    std::vector<Mat> fd_derivative(const Vec& x) const;

    // Throws NonSpdMetric unless g(x) is symmetric with min eigenvalue >= floor.
    void check_spd(const Vec& x, double floor = 0.0) const;

    static MetricField euclidean(int dim);
    static MetricField constant(const Mat& g);
    // g = exp(2 a.x) I
    static MetricField conformal_exp(const Vec& a);
    // g = lambda(x) * base(x)
    static MetricField scaled(const MetricField& base, const ScalarField& lambda);

private:
    int dim_;
    ValueFn value_;
    DerivFn deriv_;
    double fd_step_;
};

// Smooth map with Jacobian.
struct Diffeo {
    std::function<Vec(const Vec&)> map;
    std::function<Mat(const Vec&)> jacobian;

    Vec operator()(const Vec& x) const { return map(x); }

    static Diffeo identity(int dim);
    static Diffeo linear(const Mat& a);
    // (r, theta) -> (r + amplitude * r (1 - r), theta) on the unit disk.
    static Diffeo radial_disk(double amplitude);
    static Diffeo radial_disk_inverse(double amplitude);
    // Jacobian from central differences of the map.
    static Diffeo from_map(std::function<Vec(const Vec&)> map, int dim, double step = 1e-6);
};

// outer(inner(x))
Diffeo compose(const Diffeo& outer, const Diffeo& inner);

struct ChristoffelData {
    // gamma[k](a, b) = Gamma^k_ab
    std::vector<Mat> gamma;
    // Gamma_a = -|g|^{-1/2} g_ab d_c(|g|^{1/2} g^bc)
    Vec contracted;
};

ChristoffelData christoffel(const MetricField& metric, const Vec& x);

// Gamma_a from the divergence form, without going through Gamma^k_ab.
Vec contracted_christoffel(const MetricField& metric, const Vec& x);

// max_a |Gamma_a(lambda g) - Gamma_a(g) + (n-2)/2 d_a log lambda|
double contracted_christoffel_scaling_check(const MetricField& metric, const ScalarField& lambda,
                                            const Vec& x);

// (phi^* g)(x) = Dphi(x)^T g(phi(x)) Dphi(x)
MetricField pullback_metric(const MetricField& metric, const Diffeo& phi);

// Symmetric n x n matrices with the Hilbert-Schmidt inner product.
// Vectorization walks the upper triangle row by row and scales off-diagonal
// entries by sqrt(2), so the Euclidean product of vectors is <A,B>_HS.
class SymSpace {
public:
    explicit SymSpace(int n);

    int n() const { return n_; }
    int dim() const { return n_ * (n_ + 1) / 2; }

    Vec vectorize(const Mat& s) const;
    Mat unvectorize(const Vec& v) const;
    static double inner(const Mat& a, const Mat& b) { return (a.transpose() * b).trace(); }
    std::vector<Mat> orthonormal_basis() const;

private:
    int n_;
};

// Unit-norm symmetric matrix orthogonal to dim-1 independent inputs, computed
// as the Hodge dual of their wedge (generalized cross product by cofactors).
// Sign: nonnegative trace, then first nonzero vectorized entry positive.
Mat hodge_star_sym(const SymSpace& space, std::span<const Mat> matrices);

// Applies the sign convention of hodge_star_sym to a unit matrix.
Mat canonical_sign(const SymSpace& space, const Mat& s);

} // namespace poisson_embed
